#include "padforge/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace padforge {

namespace {

Vector to_real(const FeatureVector& bits) {
  Vector x(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) x[i] = static_cast<double>(bits[i]);
  return x;
}

/// Index-sharded parallel loop with deterministic output slots.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
  const int workers = std::max(1, threads);
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        body(i);
      }
    });
  }
  for (std::thread& t : pool) t.join();
}

}  // namespace

Threshold calibrate_tau(Vector scores, double k_percent) {
  if (scores.empty()) {
    throw std::invalid_argument("calibrate_tau: empty score set");
  }
  if (k_percent < 0.0 || k_percent >= 100.0) {
    throw std::invalid_argument("calibrate_tau: k must lie in [0, 100)");
  }
  std::sort(scores.begin(), scores.end());
  const std::size_t n = scores.size();
  const std::size_t allowed =
      static_cast<std::size_t>(std::floor(static_cast<double>(n) * k_percent / 100.0));
  // The (n-1-allowed)-th order statistic: at most `allowed` scores exceed it,
  // and any smaller score value is exceeded by more than `allowed`.
  Threshold th;
  th.tau = scores[n - 1 - allowed];
  th.k_percent = k_percent;
  return th;
}

Prediction predict_label(int f_label, double psi, double tau) {
  if (psi <= tau) {
    return f_label == 1 ? Prediction::malicious : Prediction::benign;
  }
  return f_label == 1 ? Prediction::malicious : Prediction::not_sure;
}

MetricsReport compute_metrics(const std::vector<Prediction>& predictions,
                              const std::vector<int>& labels,
                              AbstainPolicy policy) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("compute_metrics: length mismatch");
  }
  MetricsReport r;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    Prediction p = predictions[i];
    if (p == Prediction::not_sure) {
      ++r.abstained;
      if (policy == AbstainPolicy::exclude) continue;
      p = Prediction::malicious;
    }
    const bool said_malicious = p == Prediction::malicious;
    if (labels[i] == 1) {
      said_malicious ? ++r.tp : ++r.fn;
    } else {
      said_malicious ? ++r.fp : ++r.tn;
    }
  }

  auto rate = [&r](std::size_t num, std::size_t den) {
    if (den == 0) {
      r.degenerate = true;
      return 0.0;
    }
    return 100.0 * static_cast<double>(num) / static_cast<double>(den);
  };

  r.fnr = rate(r.fn, r.tp + r.fn);
  r.fpr = rate(r.fp, r.fp + r.tn);
  r.acc = rate(r.tp + r.tn, r.tp + r.tn + r.fp + r.fn);
  const double tpr = rate(r.tp, r.tp + r.fn);
  const double tnr = rate(r.tn, r.tn + r.fp);
  r.bacc = 0.5 * (tpr + tnr);
  const double precision = rate(r.tp, r.tp + r.fp);
  const double recall = tpr;
  r.f1 = (precision + recall) > 0.0
             ? 2.0 * precision * recall / (precision + recall)
             : (r.degenerate = true, 0.0);
  return r;
}

MetricsReport evaluate_classifier(const MlpParams& mlp, const Dataset& data) {
  std::vector<Prediction> preds;
  std::vector<int> labels;
  preds.reserve(data.examples.size());
  labels.reserve(data.examples.size());
  for (std::size_t i = 0; i < data.examples.size(); ++i) {
    const int f = mlp_predict(mlp, to_real(data.dense(i)));
    preds.push_back(f == 1 ? Prediction::malicious : Prediction::benign);
    labels.push_back(data.examples[i].label);
  }
  return compute_metrics(preds, labels, AbstainPolicy::exclude);
}

MetricsReport evaluate_joint(const MlpParams& mlp, const IcnnParams& icnn,
                             double tau, const Dataset& data, AbstainPolicy policy) {
  std::vector<Prediction> preds;
  std::vector<int> labels;
  preds.reserve(data.examples.size());
  labels.reserve(data.examples.size());
  for (std::size_t i = 0; i < data.examples.size(); ++i) {
    const Vector x = to_real(data.dense(i));
    const int f = mlp_predict(mlp, x);
    const double psi = icnn_score(icnn, x);
    preds.push_back(predict_label(f, psi, tau));
    labels.push_back(data.examples[i].label);
  }
  return compute_metrics(preds, labels, policy);
}

Threshold calibrate_on_dataset(const IcnnParams& icnn, const Dataset& validation,
                               double k_percent) {
  Vector scores;
  scores.reserve(validation.examples.size());
  for (std::size_t i = 0; i < validation.examples.size(); ++i) {
    scores.push_back(icnn_score(icnn, to_real(validation.dense(i))));
  }
  return calibrate_tau(std::move(scores), k_percent);
}

std::vector<AttackOutcome> attack_sweep(
    const DetectorPair& det, const AttackConfig& cfg,
    const std::vector<FeatureVector>& malware, const ManipulationSpace& space,
    const std::vector<FeatureVector>* benign_pool, int threads) {
  std::vector<AttackOutcome> outcomes(malware.size());
  const Rng seed_base(cfg.seed);
  parallel_for(malware.size(), threads, [&](std::size_t i) {
    AttackConfig per_example = cfg;
    per_example.seed = seed_base.split(i).seed();
    AttackOutcome& out = outcomes[i];
    out.index = i;
    out.result = run_attack(det, malware[i], space, per_example, benign_pool);
    const Vector adv = to_real(out.result.x_adv);
    bool detected = mlp_predict(*det.mlp, adv) == 1;
    if (!detected && det.has_g()) {
      detected = icnn_score(*det.icnn, adv) > det.tau;
    }
    out.detected = detected;
  });
  return outcomes;
}

double robust_accuracy(const DetectorPair& det, const AttackConfig& cfg,
                       const std::vector<FeatureVector>& malware,
                       const ManipulationSpace& space,
                       const std::vector<FeatureVector>* benign_pool,
                       int threads) {
  if (malware.empty()) {
    throw std::invalid_argument("robust_accuracy: empty malware set");
  }
  const std::vector<AttackOutcome> outcomes =
      attack_sweep(det, cfg, malware, space, benign_pool, threads);
  std::size_t detected = 0;
  for (const AttackOutcome& out : outcomes) {
    if (out.detected) ++detected;
  }
  return 100.0 * static_cast<double>(detected) / static_cast<double>(malware.size());
}

std::vector<FeatureVector> dense_rows(const Dataset& data, int label) {
  std::vector<FeatureVector> rows;
  for (std::size_t i = 0; i < data.examples.size(); ++i) {
    if (data.examples[i].label == label) {
      rows.push_back(data.dense(i));
    }
  }
  return rows;
}

}  // namespace padforge
