#pragma once

#include <functional>
#include <vector>

#include "padforge/attacks.hpp"
#include "padforge/data.hpp"
#include "padforge/models.hpp"
#include "padforge/training.hpp"

namespace padforge {

struct SmoothnessEstimate {
  double l_xx_f = 0.0;  // max gradient-difference ratio of the classifier loss
  double l_xx_g = 0.0;  // max gradient-difference ratio of the convex score
  double m_xx_g = 0.0;  // min gradient-difference ratio of the convex score
  std::size_t samples = 0;
  double box_lo = 0.0, box_hi = 1.0;
};

/// Extremal gradient-difference ratios over sampled pairs in [0,1]^d.
/// The classifier loss is evaluated at the malicious label.
SmoothnessEstimate estimate_constants(const MlpParams& mlp, const IcnnParams& icnn,
                                      std::size_t pairs, Rng& rng);

struct RatioExtrema {
  double max_ratio = 0.0;
  double min_ratio = 0.0;
};

/// max/min of |grad(a)-grad(b)| / |a-b| over sampled pairs in [0,1]^d.
RatioExtrema gradient_ratio_extrema(const std::function<Vector(const Vector&)>& grad,
                                    std::size_t dim, std::size_t pairs, Rng& rng);

struct ConcavityReport {
  double lambda = 0.0;
  Vector eigenvalues;  // ascending
  double max_eigenvalue = 0.0;
  double min_eigenvalue = 0.0;
  bool concave = false;  // max eigenvalue <= +1e-6
};

/// Spectrum of the finite-difference Hessian of the attack criterion at x.
ConcavityReport hessian_spectrum(const MlpParams& mlp, const IcnnParams& icnn,
                                 const Vector& x, double lambda, double step,
                                 std::size_t eigen_cap = 512);
/// Same check for an arbitrary scalar field.
ConcavityReport hessian_spectrum_of(const std::function<double(const Vector&)>& fn,
                                    const Vector& x, double step,
                                    std::size_t eigen_cap = 512);

struct Theorem1Entry {
  int steps = 0;
  double j_reached = 0.0;
  double ratio = 0.0;  // (J* - J(x')) / (J* - J(x))
  double bound = 0.0;  // exp(-(T/d) (lambda M - L_f) / (lambda L_g + L_f))
  bool within_bound = false;
};

struct Theorem1Report {
  bool applicable = false;  // premise lambda * M > L_f
  double lambda = 0.0;
  SmoothnessEstimate constants;
  double j_start = 0.0;
  double j_opt = 0.0;  // exhaustive maximum over box vertices
  std::vector<Theorem1Entry> entries;
};

/// Exhaustively enumerates the box vertices (at most 2^12) for the optimal
/// criterion value, then replays the stepwise mixture search with the
/// theory-prescribed step sizes and reports the gap ratio per step budget.
Theorem1Report theorem1_check(const Criterion& j, const FeatureVector& x,
                              const ManipulationSpace& space, double lambda,
                              const std::vector<int>& t_list,
                              const SmoothnessEstimate& constants);
Theorem1Report theorem1_check(const MlpParams& mlp, const IcnnParams& icnn,
                              const FeatureVector& x, const ManipulationSpace& space,
                              double lambda, const std::vector<int>& t_list,
                              const SmoothnessEstimate& constants);

/// Exhaustive maximum of fn over the box vertices reachable from x.
/// Throws when more than max_bits coordinates are modifiable.
double enumerate_box_optimum(const std::function<double(const Vector&)>& fn,
                             const FeatureVector& x, const ManipulationSpace& space,
                             bool addition_only = false, std::size_t max_bits = 12,
                             FeatureVector* argmax = nullptr);

struct QuadBoundReport {
  bool applicable = false;  // lambda * M > L_f on the measured region
  double lambda = 0.0;
  double l_f = 0.0, l_g = 0.0, m_g = 0.0;  // measured on the checked segments
  std::size_t pairs = 0;
  std::size_t violations = 0;
  double worst_margin = 0.0;  // most negative slack across both bounds
};

/// The two scalar fields of the attack criterion, as callbacks so the
/// check can also run against synthetic functions with known constants.
struct FieldPair {
  std::function<double(const Vector&)> value_f;
  std::function<Vector(const Vector&)> grad_f;
  std::function<double(const Vector&)> value_psi;
  std::function<Vector(const Vector&)> grad_psi;
};

/// Curvature sandwich on random pairs: for each pair the remainder
/// J(x') - J(x) - <grad J(x), x'-x> must lie between the two quadratic
/// bounds built from constants measured on the same segments. The strong
/// convexity factor is the minimum directional ratio; the smoothness
/// factors are maximum norm ratios. Sub-segment probes guard against
/// curvature concentrating between the endpoints.
QuadBoundReport quadratic_bound_check(const FieldPair& fields, std::size_t dim,
                                      std::size_t pairs, double lambda, Rng& rng,
                                      double slack = 1e-6);
QuadBoundReport quadratic_bound_check(const MlpParams& mlp, const IcnnParams& icnn,
                                      std::size_t pairs, double lambda, Rng& rng,
                                      double slack = 1e-6);

struct ConvergenceReport {
  Vector grad_norms;      // per-epoch full-batch gradient norm
  Vector running_mean;
  double c1 = 0.0;        // fitted running_mean ~ c1 / sqrt(N) + c2
  double c2 = 0.0;        // fitted floor
  bool window_monotone = false;  // running mean non-increasing across windows of 10
};

/// Trains with the given config (plain SGD expected) and records the
/// full-batch gradient norm of the defense objective after every epoch.
ConvergenceReport convergence_trace(const Dataset& data, const TrainConfig& cfg,
                                    const ManipulationSpace& space);

/// Least-squares fit of y ~ c1 / sqrt(i) + c2 (i = 1-based index).
void fit_inverse_sqrt(const Vector& y, double& c1, double& c2);

}  // namespace padforge
