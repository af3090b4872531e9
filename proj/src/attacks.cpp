#include "padforge/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace padforge {

namespace {

Vector to_real(const FeatureVector& bits) {
  Vector x(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) x[i] = static_cast<double>(bits[i]);
  return x;
}

double effective_lambda(const AttackConfig& cfg) {
  return cfg.mode == AttackMode::oblivious ? 0.0 : cfg.lambda;
}

double alpha_for(const AttackConfig& cfg, NormP p) {
  switch (p) {
    case NormP::l1: return cfg.alpha_1;
    case NormP::l2: return cfg.alpha_2;
    case NormP::linf: return cfg.alpha_inf;
  }
  return cfg.alpha_2;
}

FeatureVector round_clip(const Vector& v, const Box& box) {
  FeatureVector bits = round_discretize(v, 0.5);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const std::uint8_t lo = box.lo[i] >= 0.5 ? 1 : 0;
    const std::uint8_t hi = box.hi[i] >= 0.5 ? 1 : 0;
    bits[i] = std::min(std::max(bits[i], lo), hi);
  }
  return bits;
}

bool evades_f(const DetectorPair& det, const Vector& x_real) {
  return mlp_predict(*det.mlp, x_real) == 0;
}

bool evades_g(const DetectorPair& det, const Vector& x_real) {
  if (!det.has_g()) return true;
  return icnn_score(*det.icnn, x_real) <= det.tau;
}

bool evades_all(const DetectorPair& det, const Vector& x_real, AttackMode mode) {
  if (!evades_f(det, x_real)) return false;
  if (mode == AttackMode::adaptive) return evades_g(det, x_real);
  return true;
}

AttackResult finalize(const DetectorPair& det, const FeatureVector& x,
                      const FeatureVector& adv, double lambda, Vector trace) {
  AttackResult res;
  res.x_adv = adv;
  res.criterion_trace = std::move(trace);
  const Vector adv_real = to_real(adv);
  res.evaded_f = evades_f(det, adv_real);
  res.evaded_g = evades_g(det, adv_real);
  res.chosen_lambda = lambda;
  const Criterion j = make_criterion(*det.mlp, det.icnn, lambda);
  res.j_final = j.value(adv_real);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (adv[i] && !x[i]) ++res.flips_added;
    if (!adv[i] && x[i]) ++res.flips_removed;
  }
  return res;
}

void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(what);
}

}  // namespace

const char* attack_family_name(AttackFamily family) {
  switch (family) {
    case AttackFamily::grosse: return "grosse";
    case AttackFamily::bca: return "bca";
    case AttackFamily::bga: return "bga";
    case AttackFamily::rfgsm: return "rfgsm";
    case AttackFamily::pgd: return "pgd";
    case AttackFamily::mimicry: return "mimicry";
    case AttackFamily::maxma: return "maxma";
    case AttackFamily::imaxma: return "imaxma";
    case AttackFamily::sma: return "sma";
    case AttackFamily::orth_pgd: return "orth_pgd";
    case AttackFamily::orth_maxma: return "orth_maxma";
    case AttackFamily::orth_imaxma: return "orth_imaxma";
  }
  return "unknown";
}

bool parse_attack_family(const std::string& name, AttackFamily& out) {
  static const std::pair<const char*, AttackFamily> table[] = {
      {"grosse", AttackFamily::grosse},   {"bca", AttackFamily::bca},
      {"bga", AttackFamily::bga},         {"rfgsm", AttackFamily::rfgsm},
      {"pgd", AttackFamily::pgd},         {"mimicry", AttackFamily::mimicry},
      {"maxma", AttackFamily::maxma},     {"imaxma", AttackFamily::imaxma},
      {"sma", AttackFamily::sma},         {"orth_pgd", AttackFamily::orth_pgd},
      {"orth_maxma", AttackFamily::orth_maxma},
      {"orth_imaxma", AttackFamily::orth_imaxma},
  };
  for (const auto& [key, value] : table) {
    if (name == key) {
      out = value;
      return true;
    }
  }
  return false;
}

void AttackConfig::validate() const {
  require(steps >= 0, "attack config: steps must be >= 0");
  require(alpha_1 > 0.0 && alpha_2 > 0.0 && alpha_inf > 0.0,
          "attack config: step sizes must be positive");
  require(lambda >= 0.0, "attack config: lambda must be >= 0");
  require(repeats >= 1, "attack config: repeats must be >= 1");
  require(n_ben >= 1, "attack config: n_ben must be >= 1");
  for (std::size_t i = 1; i < lambda_grid.size(); ++i) {
    require(lambda_grid[i] > lambda_grid[i - 1],
            "attack config: lambda grid must be ascending");
  }
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int e = -5; e <= 5; ++e) {
    grid.push_back(std::pow(10.0, e));
  }
  return grid;
}

Box box_bounds(const FeatureVector& x, const ManipulationSpace& space,
               bool addition_only) {
  require(space.dim() == x.size() && space.removable.size() == x.size(),
          "box_bounds: dimension mismatch");
  Box box;
  box.lo.resize(x.size());
  box.hi.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = static_cast<double>(x[i]);
    box.hi[i] = (x[i] == 0 && space.addable[i]) ? 1.0 : xi;
    box.lo[i] = (x[i] == 1 && space.removable[i] && !addition_only) ? 0.0 : xi;
  }
  return box;
}

double criterion_j(const MlpParams& mlp, const IcnnParams& icnn,
                   const Vector& x_prime, double lambda) {
  require(lambda >= 0.0, "criterion_j: lambda must be >= 0");
  double j = mlp_loss(mlp, x_prime, 1);
  if (lambda != 0.0) {
    j -= lambda * icnn_score(icnn, x_prime);
  }
  return j;
}

Criterion make_criterion(const MlpParams& mlp, const IcnnParams* icnn,
                         double lambda) {
  Criterion j;
  if (icnn == nullptr || lambda == 0.0) {
    j.value = [&mlp](const Vector& x) { return mlp_loss(mlp, x, 1); };
    j.grad = [&mlp](const Vector& x) { return mlp_input_grad(mlp, x, 1); };
  } else {
    j.value = [&mlp, icnn, lambda](const Vector& x) {
      return mlp_loss(mlp, x, 1) - lambda * icnn_score(*icnn, x);
    };
    j.grad = [&mlp, icnn, lambda](const Vector& x) {
      Vector g = mlp_input_grad(mlp, x, 1);
      const Vector gp = icnn_score_input_grad(*icnn, x);
      axpy(-lambda, gp, g);
      return g;
    };
  }
  return j;
}

Vector normalized_direction(const Vector& grad, NormP p) {
  Vector e(grad.size(), 0.0);
  switch (p) {
    case NormP::linf: {
      for (std::size_t i = 0; i < grad.size(); ++i) {
        e[i] = grad[i] > 0.0 ? 1.0 : (grad[i] < 0.0 ? -1.0 : 0.0);
      }
      break;
    }
    case NormP::l2: {
      const double n = norm2(grad);
      if (n >= 1e-12) {
        for (std::size_t i = 0; i < grad.size(); ++i) e[i] = grad[i] / n;
      }
      break;
    }
    case NormP::l1: {
      std::size_t best = 0;
      double best_abs = -1.0;
      for (std::size_t i = 0; i < grad.size(); ++i) {
        const double a = std::fabs(grad[i]);
        if (a > best_abs) {
          best_abs = a;
          best = i;
        }
      }
      if (best_abs > 0.0) {
        e[best] = grad[best] > 0.0 ? 1.0 : -1.0;
      }
      break;
    }
  }
  return e;
}

Vector feasible_direction(const Vector& grad, NormP p, const Vector& delta,
                          const Vector& delta_lo, const Vector& delta_hi) {
  if (p != NormP::l1) {
    return normalized_direction(grad, p);
  }
  constexpr double kEdge = 1e-12;
  std::size_t best = 0;
  double best_abs = 0.0;
  bool found = false;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const bool movable = (grad[i] > 0.0 && delta[i] < delta_hi[i] - kEdge) ||
                         (grad[i] < 0.0 && delta[i] > delta_lo[i] + kEdge);
    if (!movable) continue;
    const double a = std::fabs(grad[i]);
    if (a > best_abs) {
      best_abs = a;
      best = i;
      found = true;
    }
  }
  Vector e(grad.size(), 0.0);
  if (found) {
    e[best] = grad[best] > 0.0 ? 1.0 : -1.0;
  }
  return e;
}

FeatureVector round_discretize(const Vector& x_real, const Vector& thresholds) {
  require(x_real.size() == thresholds.size(), "round_discretize: dimension mismatch");
  FeatureVector bits(x_real.size());
  for (std::size_t i = 0; i < x_real.size(); ++i) {
    bits[i] = x_real[i] >= thresholds[i] ? 1 : 0;
  }
  return bits;
}

FeatureVector round_discretize(const Vector& x_real, double threshold) {
  FeatureVector bits(x_real.size());
  for (std::size_t i = 0; i < x_real.size(); ++i) {
    bits[i] = x_real[i] >= threshold ? 1 : 0;
  }
  return bits;
}

Vector clip_to_box(const Vector& v, const Box& box) {
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::min(std::max(v[i], box.lo[i]), box.hi[i]);
  }
  return out;
}

Vector orthogonal_component(const Vector& a, const Vector& b) {
  const double nb = dot(b, b);
  if (nb < 1e-24) return a;
  Vector out = a;
  axpy(-dot(a, b) / nb, b, out);
  return out;
}

namespace {

// Shared iteration state for the projected continuous searches.
struct DeltaBounds {
  Vector lo, hi;  // bounds on delta = x' - x
};

DeltaBounds delta_bounds(const Vector& x, const Box& box) {
  DeltaBounds db;
  db.lo.resize(x.size());
  db.hi.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    db.lo[i] = box.lo[i] - x[i];
    db.hi[i] = box.hi[i] - x[i];
  }
  return db;
}

Vector initial_delta(const Vector& x, const DeltaBounds& db, const Vector* start) {
  Vector delta(x.size(), 0.0);
  if (start != nullptr) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      delta[i] = std::min(std::max((*start)[i] - x[i], db.lo[i]), db.hi[i]);
    }
  }
  return delta;
}

Vector step_direction(const Vector& grad, NormP p, const Vector& delta,
                      const DeltaBounds& db) {
  return feasible_direction(grad, p, delta, db.lo, db.hi);
}

double rounded_value(const Criterion& j, const Vector& x, const Vector& delta,
                     const Box& box) {
  Vector point(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) point[i] = x[i] + delta[i];
  return j.value(to_real(round_clip(point, box)));
}

}  // namespace

Vector pgd_perturb(const Criterion& j, const Vector& x, const Box& box,
                   NormP p, double alpha, int steps, Vector* trace,
                   const Vector* start) {
  const DeltaBounds db = delta_bounds(x, box);
  Vector delta = initial_delta(x, db, start);
  if (trace != nullptr) {
    trace->clear();
    trace->push_back(rounded_value(j, x, delta, box));
  }
  Vector point(x.size());
  for (int t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < x.size(); ++i) point[i] = x[i] + delta[i];
    const Vector g = j.grad(point);
    const Vector e = step_direction(g, p, delta, db);
    for (std::size_t i = 0; i < x.size(); ++i) {
      delta[i] = std::min(std::max(delta[i] + alpha * e[i], db.lo[i]), db.hi[i]);
    }
    if (trace != nullptr) {
      trace->push_back(rounded_value(j, x, delta, box));
    }
  }
  for (std::size_t i = 0; i < x.size(); ++i) point[i] = x[i] + delta[i];
  return point;
}

Vector sma_perturb(const Criterion& j, const Vector& x, const Box& box,
                   double alpha_1, double alpha_2, double alpha_inf, int steps,
                   Vector* trace, const Vector* start) {
  const DeltaBounds db = delta_bounds(x, box);
  Vector delta = initial_delta(x, db, start);
  if (trace != nullptr) {
    trace->clear();
    trace->push_back(rounded_value(j, x, delta, box));
  }
  const NormP norms[3] = {NormP::l1, NormP::l2, NormP::linf};
  const double alphas[3] = {alpha_1, alpha_2, alpha_inf};

  Vector point(x.size());
  Vector candidate(x.size());
  for (int t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < x.size(); ++i) point[i] = x[i] + delta[i];
    const Vector g = j.grad(point);

    Vector best_delta;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k) {
      const Vector e = step_direction(g, norms[k], delta, db);
      for (std::size_t i = 0; i < x.size(); ++i) {
        candidate[i] =
            std::min(std::max(delta[i] + alphas[k] * e[i], db.lo[i]), db.hi[i]);
      }
      const double score = rounded_value(j, x, candidate, box);
      if (score > best_score) {  // strict: ties stay with the earlier norm
        best_score = score;
        best_delta = candidate;
      }
    }
    delta = std::move(best_delta);
    if (trace != nullptr) trace->push_back(best_score);
  }
  for (std::size_t i = 0; i < x.size(); ++i) point[i] = x[i] + delta[i];
  return point;
}

namespace {

AttackResult pgd_attack_impl(const DetectorPair& det, const FeatureVector& x,
                             const ManipulationSpace& space,
                             const AttackConfig& cfg, const Vector* start) {
  const double lambda = effective_lambda(cfg);
  const Criterion j = make_criterion(*det.mlp, det.icnn, lambda);
  const Box box = box_bounds(x, space, cfg.addition_only);
  const Vector x_real = to_real(x);
  Vector trace;
  const Vector final_point =
      pgd_perturb(j, x_real, box, cfg.norm, alpha_for(cfg, cfg.norm), cfg.steps,
                  &trace, start);
  return finalize(det, x, round_clip(final_point, box), lambda, std::move(trace));
}

AttackResult orth_pgd_impl(const DetectorPair& det, const FeatureVector& x,
                           const ManipulationSpace& space,
                           const AttackConfig& cfg, const Vector* start) {
  require(det.has_g(), "orthogonal attack requires an adversary detector");
  require(cfg.mode == AttackMode::adaptive, "orthogonal attack is adaptive-only");
  const double lambda = cfg.lambda;
  const Criterion j = make_criterion(*det.mlp, det.icnn, lambda);
  const Box box = box_bounds(x, space, cfg.addition_only);
  const Vector x_real = to_real(x);
  const DeltaBounds db = delta_bounds(x_real, box);
  Vector delta = initial_delta(x_real, db, start);
  const double alpha = alpha_for(cfg, cfg.norm);

  FeatureVector best_bits = round_clip(x_real, box);
  if (start != nullptr) {
    Vector p0(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) p0[i] = x_real[i] + delta[i];
    best_bits = round_clip(p0, box);
  }
  double best_score = j.value(to_real(best_bits));
  Vector trace = {best_score};

  Vector point(x.size());
  for (int t = 1; t <= cfg.steps; ++t) {
    for (std::size_t i = 0; i < x.size(); ++i) point[i] = x_real[i] + delta[i];
    const Vector grad_f = mlp_input_grad(*det.mlp, point, 1);
    const Vector grad_psi = icnn_score_input_grad(*det.icnn, point);
    Vector dir;
    if (t % 2 == 1) {
      // ascend the classifier loss without reacting to the convex score
      dir = orthogonal_component(grad_f, grad_psi);
    } else {
      // descend the convex score without reacting to the classifier
      dir = orthogonal_component(grad_psi, grad_f);
      for (double& v : dir) v = -v;
    }
    const Vector e = feasible_direction(dir, cfg.norm, delta, db.lo, db.hi);
    for (std::size_t i = 0; i < x.size(); ++i) {
      delta[i] = std::min(std::max(delta[i] + alpha * e[i], db.lo[i]), db.hi[i]);
    }
    for (std::size_t i = 0; i < x.size(); ++i) point[i] = x_real[i] + delta[i];
    const FeatureVector bits = round_clip(point, box);
    const double score = j.value(to_real(bits));
    trace.push_back(score);
    if (score > best_score) {  // scoring rule keeps the best rounded step
      best_score = score;
      best_bits = bits;
    }
  }
  return finalize(det, x, best_bits, lambda, std::move(trace));
}

using MemberFn = AttackResult (*)(const DetectorPair&, const FeatureVector&,
                                  const ManipulationSpace&, const AttackConfig&,
                                  const Vector*);

AttackResult run_members(const DetectorPair& det, const FeatureVector& x,
                         const ManipulationSpace& space, const AttackConfig& cfg,
                         MemberFn member, const Vector* start) {
  AttackResult best;
  bool first = true;
  for (NormP p : {NormP::l1, NormP::l2, NormP::linf}) {
    AttackConfig member_cfg = cfg;
    member_cfg.norm = p;
    AttackResult res = member(det, x, space, member_cfg, start);
    if (first || res.j_final > best.j_final) {  // ties keep the l1 member
      best = std::move(res);
      first = false;
    }
  }
  return best;
}

AttackResult iterated_max(const DetectorPair& det, const FeatureVector& x,
                          const ManipulationSpace& space, const AttackConfig& cfg,
                          MemberFn member, int rounds) {
  const double lambda = effective_lambda(cfg);
  const Criterion j = make_criterion(*det.mlp, det.icnn, lambda);
  Vector round_trace = {j.value(to_real(x))};

  AttackResult best;
  bool have_best = false;
  for (int r = 0; r < rounds; ++r) {
    const Vector start = have_best ? to_real(best.x_adv) : to_real(x);
    AttackResult candidate =
        run_members(det, x, space, cfg, member, have_best ? &start : nullptr);
    if (!have_best || candidate.j_final > best.j_final) {
      best = std::move(candidate);
      have_best = true;
    }
    round_trace.push_back(best.j_final);
  }
  best.criterion_trace = std::move(round_trace);
  return best;
}

}  // namespace

AttackResult pgd_attack(const DetectorPair& det, const FeatureVector& x,
                        const ManipulationSpace& space, const AttackConfig& cfg) {
  cfg.validate();
  return pgd_attack_impl(det, x, space, cfg, nullptr);
}

AttackResult sma_attack(const DetectorPair& det, const FeatureVector& x,
                        const ManipulationSpace& space, const AttackConfig& cfg) {
  cfg.validate();
  const double lambda = effective_lambda(cfg);
  const Criterion j = make_criterion(*det.mlp, det.icnn, lambda);
  const Box box = box_bounds(x, space, cfg.addition_only);
  const Vector x_real = to_real(x);
  Vector trace;
  const Vector final_point =
      sma_perturb(j, x_real, box, cfg.alpha_1, cfg.alpha_2, cfg.alpha_inf,
                  cfg.steps, &trace, nullptr);
  return finalize(det, x, round_clip(final_point, box), lambda, std::move(trace));
}

AttackResult greedy_flip_attack(const DetectorPair& det, const FeatureVector& x,
                                const ManipulationSpace& space,
                                const AttackConfig& cfg) {
  cfg.validate();
  require(cfg.family == AttackFamily::grosse || cfg.family == AttackFamily::bca ||
              cfg.family == AttackFamily::bga,
          "greedy_flip_attack: family must be grosse, bca, or bga");
  require(space.dim() == x.size(), "greedy_flip_attack: dimension mismatch");

  const double lambda = effective_lambda(cfg);
  const Criterion j = make_criterion(*det.mlp, det.icnn, lambda);
  const double sqrt_d = std::sqrt(static_cast<double>(x.size()));

  FeatureVector bits = x;  // addition-only, so the box never binds
  Vector cur = to_real(bits);
  Vector trace = {j.value(cur)};

  for (int t = 0; t < cfg.steps; ++t) {
    if (evades_all(det, cur, cfg.mode)) break;
    const Vector g = j.grad(cur);
    bool changed = false;
    if (cfg.family == AttackFamily::bga) {
      const double threshold = norm2(g) / sqrt_d;
      for (std::size_t i = 0; i < bits.size(); ++i) {
        if (space.addable[i] && bits[i] == 0 && g[i] >= threshold) {
          bits[i] = 1;
          cur[i] = 1.0;
          changed = true;
        }
      }
    } else {
      std::size_t best = 0;
      double best_grad = 0.0;  // only strictly positive gradients qualify
      for (std::size_t i = 0; i < bits.size(); ++i) {
        if (space.addable[i] && bits[i] == 0 && g[i] > best_grad) {
          best_grad = g[i];
          best = i;
        }
      }
      if (best_grad > 0.0) {
        bits[best] = 1;
        cur[best] = 1.0;
        changed = true;
      }
    }
    if (!changed) break;
    trace.push_back(j.value(cur));
  }
  return finalize(det, x, bits, lambda, std::move(trace));
}

AttackResult rfgsm_attack(const DetectorPair& det, const FeatureVector& x,
                          const ManipulationSpace& space, const AttackConfig& cfg) {
  cfg.validate();
  const double lambda = effective_lambda(cfg);
  const Criterion j = make_criterion(*det.mlp, det.icnn, lambda);
  const Box box = box_bounds(x, space, cfg.addition_only);
  const Vector x_real = to_real(x);
  Vector trace;
  const Vector final_point = pgd_perturb(j, x_real, box, NormP::linf,
                                         cfg.alpha_inf, cfg.steps, &trace, nullptr);

  Vector thresholds(x.size(), 0.5);
  if (cfg.random_round) {
    Rng rng(cfg.seed);
    // thresholds in (0,1] so an untouched coordinate never flips by rounding
    for (double& th : thresholds) th = 1.0 - rng.next_unit();
  }
  FeatureVector bits = round_discretize(final_point, thresholds);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const std::uint8_t lo = box.lo[i] >= 0.5 ? 1 : 0;
    const std::uint8_t hi = box.hi[i] >= 0.5 ? 1 : 0;
    bits[i] = std::min(std::max(bits[i], lo), hi);
  }
  return finalize(det, x, bits, lambda, std::move(trace));
}

AttackResult mimicry_attack(const DetectorPair& det, const FeatureVector& x,
                            const ManipulationSpace& space,
                            const AttackConfig& cfg,
                            const std::vector<FeatureVector>& benign_pool) {
  cfg.validate();
  require(!benign_pool.empty(), "mimicry_attack: benign pool is empty");
  require(space.dim() == x.size(), "mimicry_attack: dimension mismatch");

  const double lambda = effective_lambda(cfg);

  // Seeded guide selection, without replacement while the pool allows.
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(benign_pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle(order, rng);
  std::vector<std::size_t> guides;
  const std::size_t want = static_cast<std::size_t>(cfg.n_ben);
  for (std::size_t i = 0; i < want && i < order.size(); ++i) {
    guides.push_back(order[i]);
  }
  while (guides.size() < want) {
    guides.push_back(static_cast<std::size_t>(rng.below(benign_pool.size())));
  }

  FeatureVector fallback;
  double fallback_conf = std::numeric_limits<double>::infinity();
  double fallback_psi = std::numeric_limits<double>::infinity();
  FeatureVector chosen;
  bool found = false;

  for (std::size_t gi : guides) {
    const FeatureVector& guide = benign_pool[gi];
    require(guide.size() == x.size(), "mimicry_attack: guide dimension mismatch");
    FeatureVector cand = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (guide[i] == 1 && x[i] == 0 && space.addable[i]) {
        cand[i] = 1;
      } else if (guide[i] == 0 && x[i] == 1 && space.removable[i] &&
                 !cfg.addition_only) {
        cand[i] = 0;
      }
    }
    const Vector cand_real = to_real(cand);
    if (evades_all(det, cand_real, cfg.mode)) {
      chosen = cand;
      found = true;
      break;
    }
    const double conf = mlp_malware_confidence(*det.mlp, cand_real);
    const double psi = det.has_g() ? icnn_score(*det.icnn, cand_real) : 0.0;
    if (conf < fallback_conf ||
        (conf == fallback_conf && psi < fallback_psi)) {
      fallback_conf = conf;
      fallback_psi = psi;
      fallback = cand;
    }
  }
  if (!found) chosen = fallback;

  const Criterion j = make_criterion(*det.mlp, det.icnn, lambda);
  Vector trace = {j.value(to_real(chosen))};
  return finalize(det, x, chosen, lambda, std::move(trace));
}

AttackResult max_ma(const DetectorPair& det, const FeatureVector& x,
                    const ManipulationSpace& space, const AttackConfig& cfg) {
  cfg.validate();
  return iterated_max(det, x, space, cfg, &pgd_attack_impl, 1);
}

AttackResult i_max_ma(const DetectorPair& det, const FeatureVector& x,
                      const ManipulationSpace& space, const AttackConfig& cfg) {
  cfg.validate();
  return iterated_max(det, x, space, cfg, &pgd_attack_impl, cfg.repeats);
}

AttackResult orthogonal_pgd(const DetectorPair& det, const FeatureVector& x,
                            const ManipulationSpace& space,
                            const AttackConfig& cfg) {
  cfg.validate();
  return orth_pgd_impl(det, x, space, cfg, nullptr);
}

AttackResult lambda_search(
    const DetectorPair& det,
    const std::function<AttackResult(double lambda)>& run_one,
    const std::vector<double>& grid) {
  require(!grid.empty(), "lambda_search: grid is empty");

  std::vector<AttackResult> results;
  results.reserve(grid.size());
  for (double lambda : grid) {
    AttackResult res = run_one(lambda);
    res.chosen_lambda = lambda;
    if (res.evaded_f && res.evaded_g) {
      return res;
    }
    results.push_back(std::move(res));
  }

  // No candidate evades both: prefer the least conspicuous f-evader,
  // otherwise the best criterion value overall.
  const AttackResult* pick = nullptr;
  double best_psi = std::numeric_limits<double>::infinity();
  for (const AttackResult& res : results) {
    if (!res.evaded_f) continue;
    const double psi =
        det.has_g() ? icnn_score(*det.icnn, to_real(res.x_adv)) : 0.0;
    if (pick == nullptr || psi < best_psi) {
      pick = &res;
      best_psi = psi;
    }
  }
  if (pick == nullptr) {
    for (const AttackResult& res : results) {
      if (pick == nullptr || res.j_final > pick->j_final) {
        pick = &res;
      }
    }
  }
  return *pick;
}

AttackResult run_attack(const DetectorPair& det, const FeatureVector& x,
                        const ManipulationSpace& space, const AttackConfig& cfg,
                        const std::vector<FeatureVector>* benign_pool) {
  cfg.validate();
  require(det.mlp != nullptr, "run_attack: missing malware detector");

  AttackConfig eff = cfg;
  // Addition-only attack families.
  if (cfg.family == AttackFamily::grosse || cfg.family == AttackFamily::bca ||
      cfg.family == AttackFamily::bga) {
    eff.addition_only = true;
  }

  auto dispatch = [&](const AttackConfig& c) -> AttackResult {
    switch (c.family) {
      case AttackFamily::grosse:
      case AttackFamily::bca:
      case AttackFamily::bga:
        return greedy_flip_attack(det, x, space, c);
      case AttackFamily::rfgsm:
        return rfgsm_attack(det, x, space, c);
      case AttackFamily::pgd:
        return pgd_attack(det, x, space, c);
      case AttackFamily::mimicry:
        require(benign_pool != nullptr, "run_attack: mimicry needs a benign pool");
        return mimicry_attack(det, x, space, c, *benign_pool);
      case AttackFamily::maxma:
        return max_ma(det, x, space, c);
      case AttackFamily::imaxma:
        return i_max_ma(det, x, space, c);
      case AttackFamily::sma:
        return sma_attack(det, x, space, c);
      case AttackFamily::orth_pgd:
        return orthogonal_pgd(det, x, space, c);
      case AttackFamily::orth_maxma:
        return iterated_max(det, x, space, c, &orth_pgd_impl, 1);
      case AttackFamily::orth_imaxma:
        return iterated_max(det, x, space, c, &orth_pgd_impl, c.repeats);
    }
    throw std::invalid_argument("run_attack: unknown family");
  };

  const bool orth_family = cfg.family == AttackFamily::orth_pgd ||
                           cfg.family == AttackFamily::orth_maxma ||
                           cfg.family == AttackFamily::orth_imaxma;
  if (orth_family) {
    require(cfg.mode == AttackMode::adaptive, "orthogonal attacks are adaptive-only");
    require(det.has_g(), "orthogonal attacks require an adversary detector");
  }

  if (eff.mode == AttackMode::oblivious) {
    eff.lambda = 0.0;
    return dispatch(eff);
  }

  // Adaptive mode. Without an adversary detector the oblivious criterion
  // already is the adaptive one.
  if (!det.has_g()) {
    eff.lambda = 0.0;
    return dispatch(eff);
  }
  if (eff.family == AttackFamily::mimicry) {
    return dispatch(eff);  // query-based; no penalty factor involved
  }
  const std::vector<double> grid =
      eff.lambda_grid.empty() ? default_lambda_grid() : eff.lambda_grid;
  return lambda_search(
      det,
      [&](double lambda) {
        AttackConfig c = eff;
        c.lambda = lambda;
        return dispatch(c);
      },
      grid);
}

}  // namespace padforge
