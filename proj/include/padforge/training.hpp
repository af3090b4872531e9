#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "padforge/attacks.hpp"
#include "padforge/data.hpp"
#include "padforge/models.hpp"

namespace padforge {

/// Thrown when a loss or parameter turns non-finite during optimization.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class DefenseKind { dnn, at_rfgsm, at_maxma, pad_sma };
enum class OptimizerKind { sgd, adam };

const char* defense_kind_name(DefenseKind kind);
bool parse_defense_kind(const std::string& name, DefenseKind& out);

struct TrainConfig {
  DefenseKind defense = DefenseKind::pad_sma;
  int epochs = 50;
  int batch = 128;
  double learning_rate = 0.001;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.1;  // weight of the adversarial classification term
  double beta2 = 1.0;  // weight of the adversarial score term
  double lambda = 1.0;
  int inner_steps = 50;
  double alpha_1 = 1.0;
  double alpha_2 = 0.5;
  double alpha_inf = 0.02;
  std::size_t mlp_hidden = 200;
  std::vector<std::size_t> icnn_hidden = {200, 200};
  bool rfgsm_random_round = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochLoss {
  double f_clean = 0.0;
  double g_clean = 0.0;  // pristine pert=0 term plus noised pert=1 term
  double f_adv = 0.0;    // averaged over the malware rows that were attacked
  double g_adv = 0.0;
  double total = 0.0;    // the optimized objective, averaged per example
};

struct AdamState {
  Vector m, v;
  std::int64_t t = 0;
};

struct TrainState {
  MlpParams mlp;
  IcnnParams icnn;
  AdamState mlp_moments;
  AdamState icnn_moments;
  int epoch = 0;
  std::vector<EpochLoss> history;
  int skipped_batches = 0;  // degenerate single-class batches
};

/// Sets a uniformly chosen subset of exactly ceil(d/2) coordinates to 1.
FeatureVector salt_pepper(const FeatureVector& x, Rng& rng);

/// Bias-corrected Adam update; params and grad must have equal size.
/// The moment buffers are grown on first use.
void adam_step(Vector& params, AdamState& state, const Vector& grad, double lr,
               double beta_m = 0.9, double beta_v = 0.999, double eps = 1e-8);
void sgd_step(Vector& params, const Vector& grad, double lr);

using EpochCallback = std::function<void(const TrainState&)>;

/// Full training entry point; dispatches on cfg.defense. on_epoch, when
/// set, fires after every optimizer epoch (used by the diagnostics).
TrainState train(const Dataset& data, const TrainConfig& cfg,
                 const ManipulationSpace& space,
                 const EpochCallback& on_epoch = {});

TrainState pad_sma_train(const Dataset& data, const TrainConfig& cfg,
                         const ManipulationSpace& space,
                         const EpochCallback& on_epoch = {});
TrainState baseline_train(DefenseKind kind, const Dataset& data,
                          const TrainConfig& cfg, const ManipulationSpace& space,
                          const EpochCallback& on_epoch = {});

/// Full-dataset gradient of the defense objective with respect to the
/// classifier parameters, adversarial examples regenerated at the current
/// parameters. Used by the convergence diagnostics.
double objective_grad_norm(const TrainState& state, const Dataset& data,
                           const TrainConfig& cfg, const ManipulationSpace& space);

}  // namespace padforge
