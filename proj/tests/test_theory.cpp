#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "padforge/theory.hpp"
#include "test_helpers.hpp"

using namespace padforge;
using namespace padforge::testing;

namespace {

ManipulationSpace full_space(std::size_t d) {
  ManipulationSpace s;
  s.addable.assign(d, 1);
  s.removable.assign(d, 1);
  return s;
}

Criterion quadratic_criterion(const Vector& center, double curvature) {
  Criterion j;
  j.value = [center, curvature](const Vector& v) {
    double acc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      acc -= 0.5 * curvature * (v[i] - center[i]) * (v[i] - center[i]);
    }
    return acc;
  };
  j.grad = [center, curvature](const Vector& v) {
    Vector g(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      g[i] = -curvature * (v[i] - center[i]);
    }
    return g;
  };
  return j;
}

}  // namespace

TEST_CASE("gradient ratio extrema on affine and quadratic fields") {
  Rng rng(1);
  // affine: constant gradient, every ratio is zero
  const RatioExtrema affine = gradient_ratio_extrema(
      [](const Vector& v) { return Vector(v.size(), 2.0); }, 6, 200, rng);
  CHECK(affine.max_ratio < 1e-9);
  CHECK(affine.min_ratio < 1e-9);

  // quadratic (a/2)|x|^2: every ratio equals a exactly
  const double a = 1.75;
  Rng rng2(2);
  const RatioExtrema quad = gradient_ratio_extrema(
      [a](const Vector& v) {
        Vector g(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) g[i] = a * v[i];
        return g;
      },
      6, 200, rng2);
  CHECK(quad.max_ratio == doctest::Approx(a).epsilon(1e-6));
  CHECK(quad.min_ratio == doctest::Approx(a).epsilon(1e-6));
}

TEST_CASE("estimate_constants grows with the sample count") {
  const MlpParams mlp = random_mlp(8, 6, 11);
  const IcnnParams icnn = random_icnn(8, {5}, 12);
  Rng r1(3), r2(3);
  const SmoothnessEstimate small = estimate_constants(mlp, icnn, 50, r1);
  const SmoothnessEstimate large = estimate_constants(mlp, icnn, 500, r2);
  CHECK(large.l_xx_f >= small.l_xx_f - 1e-12);
  CHECK(large.l_xx_g >= small.l_xx_g - 1e-12);
  CHECK(large.m_xx_g <= small.m_xx_g + 1e-12);
  CHECK(small.m_xx_g <= small.l_xx_g + 1e-12);
}

TEST_CASE("hessian spectrum of synthetic fields") {
  const Vector x = {0.4, 0.6, 0.5};
  const ConcavityReport quad = hessian_spectrum_of(
      [](const Vector& v) {
        double acc = 0.0;
        for (double vi : v) acc -= vi * vi;
        return acc;
      },
      x, 1e-3);
  for (double e : quad.eigenvalues) {
    CHECK(e == doctest::Approx(-2.0).epsilon(1e-4));
  }
  CHECK(quad.concave);

  const ConcavityReport affine = hessian_spectrum_of(
      [](const Vector& v) { return 3.0 * v[0] - v[1]; }, x, 1e-3);
  for (double e : affine.eigenvalues) {
    CHECK(std::fabs(e) < 1e-6);
  }
}

TEST_CASE("convex-score hessian is positive semidefinite at interior points") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const IcnnParams icnn = random_icnn(6, {5, 4}, 600 + trial);
    Vector x(6);
    for (double& v : x) v = 0.2 + 0.6 * rng.next_unit();
    const ConcavityReport rep = hessian_spectrum_of(
        [&](const Vector& p) { return icnn_score(icnn, p); }, x, 1e-3);
    CHECK(rep.min_eigenvalue >= -1e-5);
  }
}

TEST_CASE("vertex enumeration finds the exact box optimum") {
  // increasing linear objective: the all-ones vertex wins
  auto linear = [](const Vector& v) {
    double acc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      acc += (1.0 + static_cast<double>(i)) * v[i];
    }
    return acc;
  };
  FeatureVector argmax;
  const double best = enumerate_box_optimum(linear, FeatureVector(5, 0),
                                            full_space(5), false, 12, &argmax);
  CHECK(best == doctest::Approx(1 + 2 + 3 + 4 + 5));
  CHECK(argmax == FeatureVector(5, 1));

  // frozen coordinates stay put
  ManipulationSpace space = full_space(5);
  space.addable[0] = 0;
  const double partial = enumerate_box_optimum(linear, FeatureVector(5, 0), space,
                                               false, 12, &argmax);
  CHECK(partial == doctest::Approx(2 + 3 + 4 + 5));
  CHECK(argmax[0] == 0);

  CHECK_THROWS_AS(enumerate_box_optimum(linear, FeatureVector(20, 0),
                                        full_space(20), false, 12, nullptr),
                  std::invalid_argument);
}

TEST_CASE("attack-gap bound holds on concave quadratics with exact constants") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t d = 6;
    Vector center(d);
    for (double& c : center) c = rng.next_unit();
    const double curvature = 0.5 + 2.0 * rng.next_unit();
    const double lambda = 1.0;

    // J = F - lambda psi with F = 0 and psi = (curvature/2)|x-c|^2,
    // so L_f = 0 and L_g = M_g = curvature exactly.
    const Criterion j = quadratic_criterion(center, lambda * curvature);
    SmoothnessEstimate exact;
    exact.l_xx_f = 0.0;
    exact.l_xx_g = curvature;
    exact.m_xx_g = curvature;
    exact.samples = 0;

    const FeatureVector x(d, 0);
    const Theorem1Report rep =
        theorem1_check(j, x, full_space(d), lambda, {1, 5, 10, 25}, exact);
    REQUIRE(rep.applicable);
    REQUIRE(rep.entries.size() == 4);
    double prev_ratio = std::numeric_limits<double>::infinity();
    for (const Theorem1Entry& e : rep.entries) {
      CHECK(e.within_bound);
      CHECK(e.ratio <= e.bound + 1e-9);
      CHECK(e.ratio <= prev_ratio + 1e-12);
      prev_ratio = e.ratio;
    }
  }
}

TEST_CASE("attack-gap check flags a failing premise instead of asserting") {
  const Criterion j = quadratic_criterion(Vector(4, 0.5), 1.0);
  SmoothnessEstimate constants;
  constants.l_xx_f = 2.0;  // premise lambda*M > L_f fails
  constants.l_xx_g = 1.0;
  constants.m_xx_g = 1.0;
  const Theorem1Report rep =
      theorem1_check(j, FeatureVector(4, 0), full_space(4), 1.0, {1, 5}, constants);
  CHECK(!rep.applicable);
  CHECK(rep.entries.empty());
}

TEST_CASE("quadratic sandwich is tight for an exact quadratic pair") {
  const double a = 1.3;
  FieldPair fields;
  fields.value_f = [](const Vector&) { return 0.0; };
  fields.grad_f = [](const Vector& v) { return Vector(v.size(), 0.0); };
  fields.value_psi = [a](const Vector& v) {
    double acc = 0.0;
    for (double vi : v) acc += 0.5 * a * vi * vi;
    return acc;
  };
  fields.grad_psi = [a](const Vector& v) {
    Vector g(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) g[i] = a * v[i];
    return g;
  };
  Rng rng(41);
  const QuadBoundReport rep = quadratic_bound_check(fields, 5, 200, 2.0, rng);
  REQUIRE(rep.applicable);
  CHECK(rep.l_g == doctest::Approx(a).epsilon(1e-9));
  CHECK(rep.m_g == doctest::Approx(a).epsilon(1e-9));
  CHECK(rep.violations == 0);
  CHECK(std::fabs(rep.worst_margin) < 1e-6);  // both bounds are equalities
}

TEST_CASE("quadratic sandwich on a model pair with a premise-satisfying lambda") {
  const MlpParams mlp = random_mlp(8, 6, 51);
  const IcnnParams icnn = random_icnn(8, {5}, 52);
  Rng probe(6);
  const SmoothnessEstimate est = estimate_constants(mlp, icnn, 200, probe);
  if (est.m_xx_g > 1e-9) {
    const double lambda = 2.0 * est.l_xx_f / est.m_xx_g + 1.0;
    Rng rng(7);
    const QuadBoundReport rep = quadratic_bound_check(mlp, icnn, 300, lambda, rng);
    if (rep.applicable) {
      CHECK(rep.violations == 0);
    }
  }
}

TEST_CASE("inverse-sqrt fit recovers planted coefficients") {
  Vector y;
  for (int i = 1; i <= 100; ++i) {
    y.push_back(3.0 / std::sqrt(static_cast<double>(i)) + 0.5);
  }
  double c1 = 0.0, c2 = 0.0;
  fit_inverse_sqrt(y, c1, c2);
  CHECK(c1 == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(c2 == doctest::Approx(0.5).epsilon(1e-9));
  // functional form: the fitted decay term at 4N is half the term at N
  const double term_n = c1 / std::sqrt(25.0);
  const double term_4n = c1 / std::sqrt(100.0);
  CHECK(term_4n == doctest::Approx(0.5 * term_n).epsilon(1e-12));
}

TEST_CASE("convergence trace: vanishing learning rate freezes the norms") {
  SyntheticSpec spec;
  spec.dim = 8;
  spec.n_benign = 60;
  spec.n_malware = 60;
  spec.seed = 61;
  spec.p_benign.assign(8, 0.2);
  spec.p_malware.assign(8, 0.6);
  const Dataset data = generate_synthetic(spec);
  ManipulationSpace space;
  space.addable.assign(8, 1);
  space.removable.assign(8, 0);

  TrainConfig cfg;
  cfg.defense = DefenseKind::dnn;
  cfg.optimizer = OptimizerKind::sgd;
  cfg.learning_rate = 1e-30;
  cfg.epochs = 6;
  cfg.batch = 30;
  cfg.mlp_hidden = 6;
  cfg.icnn_hidden = {4};
  cfg.seed = 62;
  const ConvergenceReport rep = convergence_trace(data, cfg, space);
  REQUIRE(rep.grad_norms.size() == 6);
  for (double g : rep.grad_norms) {
    CHECK(g == doctest::Approx(rep.grad_norms[0]).epsilon(1e-9));
  }
}

TEST_CASE("convergence trace decays on separable data") {
  SyntheticSpec spec;
  spec.dim = 10;
  spec.n_benign = 150;
  spec.n_malware = 150;
  spec.seed = 71;
  spec.p_benign.assign(10, 0.0);
  spec.p_malware.assign(10, 0.0);
  spec.p_malware[0] = 1.0;
  spec.p_benign[1] = 1.0;
  const Dataset data = generate_synthetic(spec);
  ManipulationSpace space;
  space.addable.assign(10, 1);
  space.removable.assign(10, 0);

  TrainConfig cfg;
  cfg.defense = DefenseKind::dnn;
  cfg.optimizer = OptimizerKind::sgd;
  cfg.learning_rate = 0.05;
  cfg.epochs = 40;
  cfg.batch = 30;
  cfg.mlp_hidden = 8;
  cfg.icnn_hidden = {4};
  cfg.seed = 72;
  const ConvergenceReport rep = convergence_trace(data, cfg, space);
  REQUIRE(rep.grad_norms.size() == 40);
  CHECK(rep.window_monotone);
  CHECK(rep.running_mean.back() < rep.running_mean[4]);
}
