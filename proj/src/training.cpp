#include "padforge/training.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace padforge {

namespace {

// Fixed stream ids so every defense draws identical shuffles and noise
// for the same seed; trajectories then differ only through the loss terms.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleBase = 1000;
constexpr std::uint64_t kNoiseBase = 2000000;
constexpr std::uint64_t kAttackBase = 3000000;

Vector to_real(const FeatureVector& bits) {
  Vector x(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) x[i] = static_cast<double>(bits[i]);
  return x;
}

void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(what);
}

struct NumericsGuard {
  static void check(double v, const char* what) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite loss encountered in ") + what);
    }
  }
};

AttackConfig inner_attack_config(const TrainConfig& cfg, std::uint64_t seed) {
  AttackConfig attack;
  attack.steps = cfg.inner_steps;
  attack.alpha_1 = cfg.alpha_1;
  attack.alpha_2 = cfg.alpha_2;
  attack.alpha_inf = cfg.alpha_inf;
  attack.mode = AttackMode::oblivious;
  attack.random_round = cfg.rfgsm_random_round;
  attack.seed = seed;
  return attack;
}

// Adversarial input for one malware row at the current parameters.
// pad_sma keeps the continuous mixture iterate; the baselines use the
// discretized output of their respective attacks.
Vector adversarial_point(DefenseKind defense, const MlpParams& mlp,
                         const IcnnParams& icnn, const TrainConfig& cfg,
                         const FeatureVector& bits, const ManipulationSpace& space,
                         std::uint64_t attack_seed) {
  switch (defense) {
    case DefenseKind::pad_sma: {
      const Criterion j = make_criterion(mlp, &icnn, cfg.lambda);
      const Box box = box_bounds(bits, space, false);
      const Vector x = to_real(bits);
      return sma_perturb(j, x, box, cfg.alpha_1, cfg.alpha_2, cfg.alpha_inf,
                         cfg.inner_steps, nullptr, nullptr);
    }
    case DefenseKind::at_rfgsm: {
      DetectorPair det{&mlp, nullptr, 0.0};
      AttackConfig attack = inner_attack_config(cfg, attack_seed);
      attack.family = AttackFamily::rfgsm;
      const AttackResult res = rfgsm_attack(det, bits, space, attack);
      return to_real(res.x_adv);
    }
    case DefenseKind::at_maxma: {
      DetectorPair det{&mlp, nullptr, 0.0};
      AttackConfig attack = inner_attack_config(cfg, attack_seed);
      attack.family = AttackFamily::maxma;
      const AttackResult res = max_ma(det, bits, space, attack);
      return to_real(res.x_adv);
    }
    case DefenseKind::dnn:
      break;
  }
  throw std::logic_error("adversarial_point: no inner attack for this defense");
}

TrainState run_training(DefenseKind defense, const Dataset& data,
                        const TrainConfig& cfg, const ManipulationSpace& space,
                        const EpochCallback& on_epoch) {
  cfg.validate();
  require(data.dim > 0 && !data.examples.empty(), "train: empty dataset");
  require(space.dim() == data.dim, "train: manipulation space dimension mismatch");
  require(data.count_label(0) > 0 && data.count_label(1) > 0,
          "train: dataset must contain both classes");

  const Rng master(cfg.seed);
  Rng init_rng = master.split(kInitStream);

  TrainState state;
  MlpConfig mlp_cfg{data.dim, cfg.mlp_hidden, 1.0};
  IcnnConfig icnn_cfg{data.dim, cfg.icnn_hidden, 1.0};
  state.mlp = init_mlp(mlp_cfg, init_rng);
  state.icnn = init_icnn(icnn_cfg, init_rng);

  const std::size_t n = data.examples.size();
  const bool adversarial = defense != DefenseKind::dnn;
  const bool pad = defense == DefenseKind::pad_sma;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng perm_rng = master.split(kShuffleBase + static_cast<std::uint64_t>(epoch));
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, perm_rng);

    const Rng noise_base = master.split(kNoiseBase + static_cast<std::uint64_t>(epoch));
    const Rng attack_base = master.split(kAttackBase + static_cast<std::uint64_t>(epoch));

    double sum_f_clean = 0.0, sum_g_clean = 0.0;
    double sum_f_adv = 0.0, sum_g_adv = 0.0;
    std::size_t seen = 0, attacked = 0;

    for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t end = std::min(n, begin + static_cast<std::size_t>(cfg.batch));
      const double b = static_cast<double>(end - begin);

      bool has_benign = false, has_malware = false;
      for (std::size_t k = begin; k < end; ++k) {
        (data.examples[order[k]].label == 1 ? has_malware : has_benign) = true;
      }
      if (!has_benign || !has_malware) {
        ++state.skipped_batches;
        continue;
      }

      MlpParams mlp_grad = zero_like(state.mlp);
      IcnnParams icnn_grad = zero_like(state.icnn);

      for (std::size_t k = begin; k < end; ++k) {
        const Example& ex = data.examples[order[k]];
        const FeatureVector bits = data.dense(order[k]);
        const Vector x = to_real(bits);

        const MlpBackprop f_clean = mlp_loss_and_grads(state.mlp, x, ex.label);
        NumericsGuard::check(f_clean.loss, "classification loss");
        add_scaled(mlp_grad, f_clean.grads, 1.0 / b);
        sum_f_clean += f_clean.loss;

        Rng noise_rng = noise_base.split(static_cast<std::uint64_t>(k));
        const FeatureVector noised = salt_pepper(bits, noise_rng);
        const IcnnBackprop g_clean0 = icnn_loss_and_grads(state.icnn, x, 0);
        const IcnnBackprop g_clean1 =
            icnn_loss_and_grads(state.icnn, to_real(noised), 1);
        NumericsGuard::check(g_clean0.loss + g_clean1.loss, "score loss");
        add_scaled(icnn_grad, g_clean0.grads, 1.0 / b);
        add_scaled(icnn_grad, g_clean1.grads, 1.0 / b);
        sum_g_clean += g_clean0.loss + g_clean1.loss;

        if (adversarial && ex.label == 1) {
          const std::uint64_t attack_seed =
              attack_base.split(static_cast<std::uint64_t>(k)).seed();
          const Vector x_adv = adversarial_point(defense, state.mlp, state.icnn,
                                                 cfg, bits, space, attack_seed);
          const MlpBackprop f_adv = mlp_loss_and_grads(state.mlp, x_adv, 1);
          NumericsGuard::check(f_adv.loss, "adversarial classification loss");
          add_scaled(mlp_grad, f_adv.grads, cfg.beta1 / b);
          sum_f_adv += f_adv.loss;
          if (pad) {
            const IcnnBackprop g_adv = icnn_loss_and_grads(state.icnn, x_adv, 1);
            NumericsGuard::check(g_adv.loss, "adversarial score loss");
            add_scaled(icnn_grad, g_adv.grads, cfg.beta2 / b);
            sum_g_adv += g_adv.loss;
          }
          ++attacked;
        }
        ++seen;
      }

      Vector mlp_flat = pack(state.mlp);
      Vector icnn_flat = pack(state.icnn);
      const Vector mlp_gflat = pack(mlp_grad);
      const Vector icnn_gflat = pack(icnn_grad);
      if (cfg.optimizer == OptimizerKind::adam) {
        adam_step(mlp_flat, state.mlp_moments, mlp_gflat, cfg.learning_rate);
        adam_step(icnn_flat, state.icnn_moments, icnn_gflat, cfg.learning_rate);
      } else {
        sgd_step(mlp_flat, mlp_gflat, cfg.learning_rate);
        sgd_step(icnn_flat, icnn_gflat, cfg.learning_rate);
      }
      unpack(mlp_flat, state.mlp);
      unpack(icnn_flat, state.icnn);
      project_nonneg(state.icnn);
    }

    EpochLoss loss;
    const double denom = seen > 0 ? static_cast<double>(seen) : 1.0;
    loss.f_clean = sum_f_clean / denom;
    loss.g_clean = sum_g_clean / denom;
    loss.f_adv = attacked > 0 ? sum_f_adv / static_cast<double>(attacked) : 0.0;
    loss.g_adv = attacked > 0 ? sum_g_adv / static_cast<double>(attacked) : 0.0;
    loss.total = loss.f_clean + loss.g_clean +
                 cfg.beta1 * sum_f_adv / denom + cfg.beta2 * sum_g_adv / denom;
    NumericsGuard::check(loss.total, "epoch loss");
    state.history.push_back(loss);
    state.epoch = epoch + 1;
    if (on_epoch) on_epoch(state);
  }
  return state;
}

}  // namespace

const char* defense_kind_name(DefenseKind kind) {
  switch (kind) {
    case DefenseKind::dnn: return "dnn";
    case DefenseKind::at_rfgsm: return "at_rfgsm";
    case DefenseKind::at_maxma: return "at_maxma";
    case DefenseKind::pad_sma: return "pad_sma";
  }
  return "unknown";
}

bool parse_defense_kind(const std::string& name, DefenseKind& out) {
  // Accept both underscore and dash spellings.
  if (name == "dnn") out = DefenseKind::dnn;
  else if (name == "at_rfgsm" || name == "at-rfgsm") out = DefenseKind::at_rfgsm;
  else if (name == "at_maxma" || name == "at-maxma") out = DefenseKind::at_maxma;
  else if (name == "pad_sma" || name == "pad-sma") out = DefenseKind::pad_sma;
  else return false;
  return true;
}

void TrainConfig::validate() const {
  require(epochs >= 0, "train config: epochs must be >= 0");
  require(batch >= 1, "train config: batch must be >= 1");
  require(learning_rate > 0.0, "train config: learning rate must be positive");
  require(beta1 >= 0.0 && beta2 >= 0.0, "train config: betas must be >= 0");
  require(lambda >= 0.0, "train config: lambda must be >= 0");
  require(inner_steps >= 0, "train config: inner steps must be >= 0");
  require(alpha_1 > 0.0 && alpha_2 > 0.0 && alpha_inf > 0.0,
          "train config: step sizes must be positive");
  require(mlp_hidden >= 1, "train config: hidden width must be >= 1");
  require(!icnn_hidden.empty(), "train config: convex net needs hidden layers");
}

FeatureVector salt_pepper(const FeatureVector& x, Rng& rng) {
  const std::size_t d = x.size();
  const std::size_t flip = (d + 1) / 2;
  std::vector<std::size_t> idx(d);
  std::iota(idx.begin(), idx.end(), 0);
  // partial Fisher-Yates: the first `flip` positions form the chosen subset
  for (std::size_t i = 0; i < flip; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(d - i));
    std::swap(idx[i], idx[j]);
  }
  FeatureVector out = x;
  for (std::size_t i = 0; i < flip; ++i) {
    out[idx[i]] = 1;
  }
  return out;
}

void adam_step(Vector& params, AdamState& state, const Vector& grad, double lr,
               double beta_m, double beta_v, double eps) {
  require(params.size() == grad.size(), "adam_step: size mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  require(state.m.size() == params.size(), "adam_step: moment size mismatch");
  ++state.t;
  const double bias_m = 1.0 - std::pow(beta_m, static_cast<double>(state.t));
  const double bias_v = 1.0 - std::pow(beta_v, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = beta_m * state.m[i] + (1.0 - beta_m) * grad[i];
    state.v[i] = beta_v * state.v[i] + (1.0 - beta_v) * grad[i] * grad[i];
    const double m_hat = state.m[i] / bias_m;
    const double v_hat = state.v[i] / bias_v;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

void sgd_step(Vector& params, const Vector& grad, double lr) {
  require(params.size() == grad.size(), "sgd_step: size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i] -= lr * grad[i];
  }
}

TrainState train(const Dataset& data, const TrainConfig& cfg,
                 const ManipulationSpace& space, const EpochCallback& on_epoch) {
  return run_training(cfg.defense, data, cfg, space, on_epoch);
}

TrainState pad_sma_train(const Dataset& data, const TrainConfig& cfg,
                         const ManipulationSpace& space,
                         const EpochCallback& on_epoch) {
  return run_training(DefenseKind::pad_sma, data, cfg, space, on_epoch);
}

TrainState baseline_train(DefenseKind kind, const Dataset& data,
                          const TrainConfig& cfg, const ManipulationSpace& space,
                          const EpochCallback& on_epoch) {
  require(kind != DefenseKind::pad_sma, "baseline_train: use pad_sma_train");
  return run_training(kind, data, cfg, space, on_epoch);
}

double objective_grad_norm(const TrainState& state, const Dataset& data,
                           const TrainConfig& cfg, const ManipulationSpace& space) {
  const std::size_t n = data.examples.size();
  require(n > 0, "objective_grad_norm: empty dataset");
  MlpParams grad = zero_like(state.mlp);
  const bool adversarial = cfg.defense != DefenseKind::dnn;
  const Rng attack_base =
      Rng(cfg.seed).split(kAttackBase + 777 + static_cast<std::uint64_t>(state.epoch));

  for (std::size_t i = 0; i < n; ++i) {
    const Example& ex = data.examples[i];
    const FeatureVector bits = data.dense(i);
    const Vector x = to_real(bits);
    const MlpBackprop clean = mlp_loss_and_grads(state.mlp, x, ex.label);
    add_scaled(grad, clean.grads, 1.0 / static_cast<double>(n));
    if (adversarial && ex.label == 1) {
      const std::uint64_t attack_seed = attack_base.split(i).seed();
      const Vector x_adv = adversarial_point(cfg.defense, state.mlp, state.icnn,
                                             cfg, bits, space, attack_seed);
      const MlpBackprop adv = mlp_loss_and_grads(state.mlp, x_adv, 1);
      add_scaled(grad, adv.grads, cfg.beta1 / static_cast<double>(n));
    }
  }
  return norm2(pack(grad));
}

}  // namespace padforge
