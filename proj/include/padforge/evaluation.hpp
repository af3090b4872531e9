#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "padforge/attacks.hpp"
#include "padforge/data.hpp"
#include "padforge/models.hpp"

namespace padforge {

struct Threshold {
  double tau = 0.0;
  double k_percent = 5.0;
};

/// Smallest score value such that strictly greater scores account for at
/// most k percent of the validation population.
Threshold calibrate_tau(Vector scores, double k_percent);

enum class Prediction { benign, malicious, not_sure };

/// The joint decision rule: below the threshold the classifier speaks; a
/// flagged input is called malicious if the classifier agrees, otherwise
/// the pipeline abstains.
Prediction predict_label(int f_label, double psi, double tau);

enum class AbstainPolicy { exclude, count_as_malicious };

struct MetricsReport {
  double fnr = 0.0, fpr = 0.0, acc = 0.0, bacc = 0.0, f1 = 0.0;  // percent
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::size_t abstained = 0;
  bool degenerate = false;  // a rate had a zero denominator and was set to 0
};

MetricsReport compute_metrics(const std::vector<Prediction>& predictions,
                              const std::vector<int>& labels,
                              AbstainPolicy policy);

/// Clean-data metrics of the classifier alone (no abstention).
MetricsReport evaluate_classifier(const MlpParams& mlp, const Dataset& data);

/// Clean-data metrics of the joint rule at the given threshold.
MetricsReport evaluate_joint(const MlpParams& mlp, const IcnnParams& icnn,
                             double tau, const Dataset& data, AbstainPolicy policy);

/// Convex-score threshold calibrated on a validation set.
Threshold calibrate_on_dataset(const IcnnParams& icnn, const Dataset& validation,
                               double k_percent);

/// Attacks every malware row and reports the percentage still caught,
/// either by the classifier or (when present) by the adversary detector
/// flagging the perturbed input. Per-example seeds derive from cfg.seed,
/// so the result is independent of the thread count.
double robust_accuracy(const DetectorPair& det, const AttackConfig& cfg,
                       const std::vector<FeatureVector>& malware,
                       const ManipulationSpace& space,
                       const std::vector<FeatureVector>* benign_pool = nullptr,
                       int threads = 1);

struct AttackOutcome {
  std::size_t index = 0;
  AttackResult result;
  bool detected = false;
};

/// Per-example attack outcomes in input order (robust_accuracy is the
/// derived summary).
std::vector<AttackOutcome> attack_sweep(
    const DetectorPair& det, const AttackConfig& cfg,
    const std::vector<FeatureVector>& malware, const ManipulationSpace& space,
    const std::vector<FeatureVector>* benign_pool = nullptr, int threads = 1);

std::vector<FeatureVector> dense_rows(const Dataset& data, int label);

}  // namespace padforge
