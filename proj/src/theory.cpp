#include "padforge/theory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace padforge {

namespace {

Vector to_real(const FeatureVector& bits) {
  Vector x(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) x[i] = static_cast<double>(bits[i]);
  return x;
}

Vector diff(const Vector& a, const Vector& b) {
  Vector d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

double dual_norm_of(const Vector& g, NormP p) {
  switch (p) {
    case NormP::l1: return norm_inf(g);
    case NormP::l2: return norm2(g);
    case NormP::linf: return norm1(g);
  }
  return norm2(g);
}

}  // namespace

RatioExtrema gradient_ratio_extrema(const std::function<Vector(const Vector&)>& grad,
                                    std::size_t dim, std::size_t pairs, Rng& rng) {
  RatioExtrema out;
  out.min_ratio = std::numeric_limits<double>::infinity();
  Vector a(dim), b(dim);
  for (std::size_t s = 0; s < pairs; ++s) {
    for (std::size_t i = 0; i < dim; ++i) {
      a[i] = rng.next_unit();
      b[i] = rng.next_unit();
    }
    const Vector delta = diff(a, b);
    const double dist = norm2(delta);
    if (dist < 1e-12) continue;
    const double ratio = norm2(diff(grad(a), grad(b))) / dist;
    out.max_ratio = std::max(out.max_ratio, ratio);
    out.min_ratio = std::min(out.min_ratio, ratio);
  }
  if (!std::isfinite(out.min_ratio)) out.min_ratio = 0.0;
  return out;
}

SmoothnessEstimate estimate_constants(const MlpParams& mlp, const IcnnParams& icnn,
                                      std::size_t pairs, Rng& rng) {
  if (pairs < 2) {
    throw std::invalid_argument("estimate_constants: need at least 2 pairs");
  }
  const std::size_t d = mlp.input_dim();
  // The two fields see the same pair stream.
  Rng f_rng = rng.split(101);
  Rng g_rng = rng.split(101);
  const RatioExtrema f_ratios = gradient_ratio_extrema(
      [&mlp](const Vector& x) { return mlp_input_grad(mlp, x, 1); }, d, pairs, f_rng);
  const RatioExtrema g_ratios = gradient_ratio_extrema(
      [&icnn](const Vector& x) { return icnn_score_input_grad(icnn, x); }, d, pairs,
      g_rng);
  SmoothnessEstimate est;
  est.samples = pairs;
  est.l_xx_f = f_ratios.max_ratio;
  est.l_xx_g = g_ratios.max_ratio;
  est.m_xx_g = g_ratios.min_ratio;
  return est;
}

ConcavityReport hessian_spectrum_of(const std::function<double(const Vector&)>& fn,
                                    const Vector& x, double step,
                                    std::size_t eigen_cap) {
  if (x.size() > eigen_cap) {
    throw std::invalid_argument("hessian_spectrum: dimension exceeds eigen cap");
  }
  const Matrix h = fd_hessian(fn, x, step);
  ConcavityReport report;
  report.eigenvalues = sym_eigenvalues(h, eigen_cap);
  report.min_eigenvalue = report.eigenvalues.front();
  report.max_eigenvalue = report.eigenvalues.back();
  report.concave = report.max_eigenvalue <= 1e-6;
  return report;
}

ConcavityReport hessian_spectrum(const MlpParams& mlp, const IcnnParams& icnn,
                                 const Vector& x, double lambda, double step,
                                 std::size_t eigen_cap) {
  const Criterion j = make_criterion(mlp, &icnn, lambda);
  ConcavityReport report = hessian_spectrum_of(j.value, x, step, eigen_cap);
  report.lambda = lambda;
  return report;
}

double enumerate_box_optimum(const std::function<double(const Vector&)>& fn,
                             const FeatureVector& x, const ManipulationSpace& space,
                             bool addition_only, std::size_t max_bits,
                             FeatureVector* argmax) {
  const Box box = box_bounds(x, space, addition_only);
  std::vector<std::size_t> modifiable;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (box.lo[i] != box.hi[i]) modifiable.push_back(i);
  }
  if (modifiable.size() > max_bits) {
    throw std::invalid_argument("enumerate_box_optimum: too many modifiable bits (" +
                                std::to_string(modifiable.size()) + " > " +
                                std::to_string(max_bits) + ")");
  }
  double best = -std::numeric_limits<double>::infinity();
  FeatureVector best_bits = x;
  FeatureVector vertex = x;
  const std::size_t combos = std::size_t{1} << modifiable.size();
  for (std::size_t mask = 0; mask < combos; ++mask) {
    for (std::size_t k = 0; k < modifiable.size(); ++k) {
      vertex[modifiable[k]] = (mask >> k) & 1 ? 1 : 0;
    }
    const double value = fn(to_real(vertex));
    if (value > best) {
      best = value;
      best_bits = vertex;
    }
  }
  if (argmax != nullptr) *argmax = best_bits;
  return best;
}

Theorem1Report theorem1_check(const Criterion& j, const FeatureVector& x,
                              const ManipulationSpace& space, double lambda,
                              const std::vector<int>& t_list,
                              const SmoothnessEstimate& constants) {
  Theorem1Report report;
  report.lambda = lambda;
  report.constants = constants;
  report.applicable = lambda * constants.m_xx_g > constants.l_xx_f;

  report.j_opt = enumerate_box_optimum(j.value, x, space, false, 12, nullptr);
  const Vector x_real = to_real(x);
  report.j_start = j.value(x_real);

  if (!report.applicable || t_list.empty()) {
    return report;
  }

  const double d = static_cast<double>(x.size());
  const double smoothness = lambda * constants.l_xx_g + constants.l_xx_f;
  const double concavity = lambda * constants.m_xx_g - constants.l_xx_f;
  const int t_max = *std::max_element(t_list.begin(), t_list.end());

  // Stepwise mixture replay with the step sizes from the convergence
  // analysis: alpha_p = |grad|_q / (lambda L_g + L_f), q dual to p.
  const Box box = box_bounds(x, space, false);
  Vector lo(x.size()), hi(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    lo[i] = box.lo[i] - x_real[i];
    hi[i] = box.hi[i] - x_real[i];
  }
  Vector delta(x.size(), 0.0);
  Vector best_rounded = {report.j_start};  // prefix-best of rounded values
  double best_so_far = report.j_start;

  Vector point(x.size()), candidate(x.size());
  const NormP norms[3] = {NormP::l1, NormP::l2, NormP::linf};
  for (int t = 0; t < t_max; ++t) {
    for (std::size_t i = 0; i < x.size(); ++i) point[i] = x_real[i] + delta[i];
    const Vector g = j.grad(point);
    Vector step_best;
    double step_best_score = -std::numeric_limits<double>::infinity();
    for (NormP p : norms) {
      const double alpha = dual_norm_of(g, p) / smoothness;
      const Vector e = feasible_direction(g, p, delta, lo, hi);
      for (std::size_t i = 0; i < x.size(); ++i) {
        candidate[i] = std::min(std::max(delta[i] + alpha * e[i], lo[i]), hi[i]);
      }
      Vector rounded_point(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        rounded_point[i] = x_real[i] + candidate[i];
      }
      const FeatureVector bits = round_discretize(rounded_point, 0.5);
      Vector rounded_real = to_real(bits);
      for (std::size_t i = 0; i < x.size(); ++i) {
        rounded_real[i] = std::min(std::max(rounded_real[i], box.lo[i]), box.hi[i]);
      }
      const double score = j.value(rounded_real);
      if (score > step_best_score) {
        step_best_score = score;
        step_best = candidate;
      }
    }
    delta = std::move(step_best);
    best_so_far = std::max(best_so_far, step_best_score);
    best_rounded.push_back(best_so_far);
  }

  const double gap_start = report.j_opt - report.j_start;
  for (int t : t_list) {
    Theorem1Entry entry;
    entry.steps = t;
    const std::size_t at = std::min<std::size_t>(static_cast<std::size_t>(t),
                                                 best_rounded.size() - 1);
    entry.j_reached = best_rounded[at];
    entry.ratio = gap_start > 1e-15
                      ? (report.j_opt - entry.j_reached) / gap_start
                      : 0.0;
    entry.bound = std::exp(-(static_cast<double>(t) / d) * concavity / smoothness);
    entry.within_bound = entry.ratio <= entry.bound + 1e-9;
    report.entries.push_back(entry);
  }
  return report;
}

Theorem1Report theorem1_check(const MlpParams& mlp, const IcnnParams& icnn,
                              const FeatureVector& x, const ManipulationSpace& space,
                              double lambda, const std::vector<int>& t_list,
                              const SmoothnessEstimate& constants) {
  const Criterion j = make_criterion(mlp, &icnn, lambda);
  return theorem1_check(j, x, space, lambda, t_list, constants);
}

QuadBoundReport quadratic_bound_check(const FieldPair& fields, std::size_t d,
                                      std::size_t pairs, double lambda, Rng& rng,
                                      double slack) {
  QuadBoundReport report;
  report.lambda = lambda;
  report.pairs = pairs;
  report.m_g = std::numeric_limits<double>::infinity();
  report.worst_margin = std::numeric_limits<double>::infinity();

  std::vector<Vector> xs(pairs, Vector(d)), ys(pairs, Vector(d));
  for (std::size_t s = 0; s < pairs; ++s) {
    for (std::size_t i = 0; i < d; ++i) {
      xs[s][i] = rng.next_unit();
      ys[s][i] = rng.next_unit();
    }
  }

  // Constants measured on the very segments being checked: gradients on a
  // 17-point grid per segment, norm ratios for the smoothness factors and
  // directional ratios for the convexity floor.
  constexpr int kGrid = 17;
  for (std::size_t s = 0; s < pairs; ++s) {
    const Vector delta = diff(ys[s], xs[s]);
    const double dist = norm2(delta);
    if (dist < 1e-12) continue;
    std::vector<Vector> gf(kGrid), gp(kGrid);
    std::vector<Vector> points(kGrid, Vector(d));
    for (int k = 0; k < kGrid; ++k) {
      const double t = static_cast<double>(k) / (kGrid - 1);
      for (std::size_t i = 0; i < d; ++i) points[k][i] = xs[s][i] + t * delta[i];
      gf[k] = fields.grad_f(points[k]);
      gp[k] = fields.grad_psi(points[k]);
    }
    for (int a = 0; a < kGrid; ++a) {
      for (int b = a + 1; b < kGrid; ++b) {
        const Vector seg = diff(points[b], points[a]);
        const double seg_dist = norm2(seg);
        if (seg_dist < 1e-12) continue;
        report.l_f = std::max(report.l_f, norm2(diff(gf[b], gf[a])) / seg_dist);
        const Vector dpsi = diff(gp[b], gp[a]);
        report.l_g = std::max(report.l_g, norm2(dpsi) / seg_dist);
        report.m_g = std::min(report.m_g, dot(dpsi, seg) / (seg_dist * seg_dist));
      }
    }
  }
  if (!std::isfinite(report.m_g)) report.m_g = 0.0;
  report.applicable = lambda * report.m_g > report.l_f;
  if (!report.applicable) {
    report.worst_margin = 0.0;
    return report;
  }

  auto j_value = [&](const Vector& x) {
    return fields.value_f(x) - lambda * fields.value_psi(x);
  };
  auto j_grad = [&](const Vector& x) {
    Vector g = fields.grad_f(x);
    axpy(-lambda, fields.grad_psi(x), g);
    return g;
  };
  const double upper_coeff = -(lambda * report.m_g - report.l_f) / 2.0;
  const double lower_coeff = -(lambda * report.l_g + report.l_f) / 2.0;

  for (std::size_t s = 0; s < pairs; ++s) {
    const Vector delta = diff(ys[s], xs[s]);
    const double dist2 = dot(delta, delta);
    const double remainder =
        j_value(ys[s]) - j_value(xs[s]) - dot(j_grad(xs[s]), delta);
    const double lower = lower_coeff * dist2;
    const double upper = upper_coeff * dist2;
    const double margin = std::min(remainder - lower, upper - remainder);
    report.worst_margin = std::min(report.worst_margin, margin);
    if (margin < -slack) {
      ++report.violations;
    }
  }
  return report;
}

QuadBoundReport quadratic_bound_check(const MlpParams& mlp, const IcnnParams& icnn,
                                      std::size_t pairs, double lambda, Rng& rng,
                                      double slack) {
  FieldPair fields;
  fields.value_f = [&mlp](const Vector& x) { return mlp_loss(mlp, x, 1); };
  fields.grad_f = [&mlp](const Vector& x) { return mlp_input_grad(mlp, x, 1); };
  fields.value_psi = [&icnn](const Vector& x) { return icnn_score(icnn, x); };
  fields.grad_psi = [&icnn](const Vector& x) { return icnn_score_input_grad(icnn, x); };
  return quadratic_bound_check(fields, mlp.input_dim(), pairs, lambda, rng, slack);
}

void fit_inverse_sqrt(const Vector& y, double& c1, double& c2) {
  // least squares for y_i ~ c1 / sqrt(i) + c2, i = 1..n
  double s_aa = 0.0, s_a = 0.0, s_ay = 0.0, s_y = 0.0;
  const double n = static_cast<double>(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double a = 1.0 / std::sqrt(static_cast<double>(i + 1));
    s_aa += a * a;
    s_a += a;
    s_ay += a * y[i];
    s_y += y[i];
  }
  const double det = s_aa * n - s_a * s_a;
  if (std::fabs(det) < 1e-12) {
    c1 = 0.0;
    c2 = y.empty() ? 0.0 : s_y / n;
    return;
  }
  c1 = (s_ay * n - s_a * s_y) / det;
  c2 = (s_aa * s_y - s_a * s_ay) / det;
}

ConvergenceReport convergence_trace(const Dataset& data, const TrainConfig& cfg,
                                    const ManipulationSpace& space) {
  ConvergenceReport report;
  train(data, cfg, space, [&](const TrainState& state) {
    report.grad_norms.push_back(objective_grad_norm(state, data, cfg, space));
  });

  report.running_mean.resize(report.grad_norms.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < report.grad_norms.size(); ++i) {
    acc += report.grad_norms[i];
    report.running_mean[i] = acc / static_cast<double>(i + 1);
  }
  fit_inverse_sqrt(report.running_mean, report.c1, report.c2);

  const std::size_t n = report.running_mean.size();
  const std::size_t window = n >= 20 ? 10 : std::max<std::size_t>(1, n / 4);
  std::vector<double> window_means;
  for (std::size_t begin = 0; begin + window <= n; begin += window) {
    double sum = 0.0;
    for (std::size_t i = begin; i < begin + window; ++i) sum += report.running_mean[i];
    window_means.push_back(sum / static_cast<double>(window));
  }
  report.window_monotone = window_means.size() >= 2;
  // the first window is warmup; decay must hold from the second on
  for (std::size_t i = 2; i < window_means.size(); ++i) {
    if (window_means[i] > window_means[i - 1] + 1e-12) {
      report.window_monotone = false;
      break;
    }
  }
  return report;
}

}  // namespace padforge
