#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "padforge/data.hpp"
#include "padforge/models.hpp"
#include "padforge/numerics.hpp"

namespace padforge {

enum class NormP { l1, l2, linf };

enum class AttackFamily {
  grosse,
  bca,
  bga,
  rfgsm,
  pgd,
  mimicry,
  maxma,
  imaxma,
  sma,
  orth_pgd,
  orth_maxma,
  orth_imaxma,
};

enum class AttackMode { oblivious, adaptive };

const char* attack_family_name(AttackFamily family);
bool parse_attack_family(const std::string& name, AttackFamily& out);

struct AttackConfig {
  AttackFamily family = AttackFamily::pgd;
  NormP norm = NormP::l2;
  int steps = 100;
  double alpha_1 = 1.0;
  double alpha_2 = 0.5;
  double alpha_inf = 0.02;
  double lambda = 1.0;
  std::vector<double> lambda_grid;  // adaptive search grid; default decades 1e-5..1e5
  AttackMode mode = AttackMode::oblivious;
  bool addition_only = false;
  int repeats = 5;   // chained rounds for the iterated max strategy
  int n_ben = 10;    // guides for mimicry
  bool random_round = true;  // rfgsm final discretization
  std::uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument on bad fields
};

std::vector<double> default_lambda_grid();  // 1e-5, 1e-4, ..., 1e5

struct AttackResult {
  FeatureVector x_adv;
  Vector criterion_trace;
  bool evaded_f = false;
  bool evaded_g = false;
  double chosen_lambda = 0.0;
  double j_final = 0.0;
  int flips_added = 0;
  int flips_removed = 0;
};

/// The victims an attack optimizes against. icnn may be null (no
/// adversary detector); tau is the score threshold used for evasion
/// checks in adaptive mode.
struct DetectorPair {
  const MlpParams* mlp = nullptr;
  const IcnnParams* icnn = nullptr;
  double tau = std::numeric_limits<double>::infinity();

  bool has_g() const { return icnn != nullptr; }
};

struct Box {
  Vector lo, hi;
};

/// Per-coordinate bounds induced by which features may be added/removed.
Box box_bounds(const FeatureVector& x, const ManipulationSpace& space,
               bool addition_only);

/// Attack criterion: classification loss toward the malicious label minus
/// lambda times the raw convex score. lambda = 0 recovers the criterion
/// that ignores the adversary detector entirely.
double criterion_j(const MlpParams& mlp, const IcnnParams& icnn,
                   const Vector& x_prime, double lambda);

/// Criterion as value/gradient callbacks, so search code and the theory
/// checks can run against synthetic objectives as well as model pairs.
struct Criterion {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> grad;
};

Criterion make_criterion(const MlpParams& mlp, const IcnnParams* icnn,
                         double lambda);

/// Steepest-ascent unit direction under the chosen norm: sign for l-inf,
/// normalized gradient for l2 (zero vector below 1e-12), signed one-hot at
/// the largest |component| for l1 (ties to the lowest index).
Vector normalized_direction(const Vector& grad, NormP p);

/// Box-aware variant used inside the projected searches: the l1 one-hot
/// skips coordinates already clamped at the face the gradient points to,
/// otherwise the plain rule would re-select a saturated coordinate forever.
/// l2 and l-inf coincide with normalized_direction.
Vector feasible_direction(const Vector& grad, NormP p, const Vector& delta,
                          const Vector& delta_lo, const Vector& delta_hi);

/// Bit i is 1 iff x_real[i] >= threshold[i]; ties round up. Idempotent on
/// binary input.
FeatureVector round_discretize(const Vector& x_real, const Vector& thresholds);
FeatureVector round_discretize(const Vector& x_real, double threshold = 0.5);

/// Elementwise clamp of v into [box.lo, box.hi].
Vector clip_to_box(const Vector& v, const Box& box);

// --- continuous search cores (shared by attacks and training) ---

/// T projected steps along the normalized criterion gradient, fixed norm.
/// Returns the final continuous point in the box. If trace is non-null it
/// receives T+1 entries of J at the rounded-and-clipped iterates. start
/// (absolute, in box) overrides the default start at x.
Vector pgd_perturb(const Criterion& j, const Vector& x, const Box& box,
                   NormP p, double alpha, int steps, Vector* trace = nullptr,
                   const Vector* start = nullptr);

/// Stepwise mixture: at each step the l1/l2/linf candidate steps are formed
/// from the shared iterate and the one with the best rounded criterion is
/// kept (ties in order l1, l2, linf).
Vector sma_perturb(const Criterion& j, const Vector& x, const Box& box,
                   double alpha_1, double alpha_2, double alpha_inf, int steps,
                   Vector* trace = nullptr, const Vector* start = nullptr);

/// Component of a orthogonal to b (returns a when b is numerically zero).
Vector orthogonal_component(const Vector& a, const Vector& b);

// --- attack entry points ---

AttackResult pgd_attack(const DetectorPair& det, const FeatureVector& x,
                        const ManipulationSpace& space, const AttackConfig& cfg);
AttackResult sma_attack(const DetectorPair& det, const FeatureVector& x,
                        const ManipulationSpace& space, const AttackConfig& cfg);
AttackResult greedy_flip_attack(const DetectorPair& det, const FeatureVector& x,
                                const ManipulationSpace& space,
                                const AttackConfig& cfg);
AttackResult rfgsm_attack(const DetectorPair& det, const FeatureVector& x,
                          const ManipulationSpace& space, const AttackConfig& cfg);
AttackResult mimicry_attack(const DetectorPair& det, const FeatureVector& x,
                            const ManipulationSpace& space,
                            const AttackConfig& cfg,
                            const std::vector<FeatureVector>& benign_pool);
AttackResult max_ma(const DetectorPair& det, const FeatureVector& x,
                    const ManipulationSpace& space, const AttackConfig& cfg);
AttackResult i_max_ma(const DetectorPair& det, const FeatureVector& x,
                      const ManipulationSpace& space, const AttackConfig& cfg);
AttackResult orthogonal_pgd(const DetectorPair& det, const FeatureVector& x,
                            const ManipulationSpace& space,
                            const AttackConfig& cfg);

/// Ascending-lambda linear search. Returns the first candidate evading both
/// detectors; otherwise the minimum-score candidate among those evading the
/// classifier; otherwise the candidate with the highest recorded criterion.
AttackResult lambda_search(
    const DetectorPair& det,
    const std::function<AttackResult(double lambda)>& run_one,
    const std::vector<double>& grid);

/// Dispatch by family and mode. Oblivious mode forces lambda = 0; adaptive
/// mode routes lambda-dependent families through lambda_search when an
/// adversary detector is present. benign_pool is required for mimicry.
AttackResult run_attack(const DetectorPair& det, const FeatureVector& x,
                        const ManipulationSpace& space, const AttackConfig& cfg,
                        const std::vector<FeatureVector>* benign_pool = nullptr);

}  // namespace padforge
