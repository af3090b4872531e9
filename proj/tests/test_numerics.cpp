#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "padforge/numerics.hpp"
#include "padforge/rng.hpp"

using namespace padforge;

TEST_CASE("elu closed-form values") {
  CHECK(elu(0.0) == 0.0);
  CHECK(elu(1.5) == 1.5);
  CHECK(elu(-1.0, 1.0) == doctest::Approx(std::exp(-1.0) - 1.0).epsilon(1e-9));
  CHECK(elu(-1.0, 1.0) == doctest::Approx(-0.632121).epsilon(1e-5));
}

TEST_CASE("elu derivative matches central differences") {
  Rng rng(11);
  for (double alpha : {1.0, 1.7}) {
    for (int i = 0; i < 100; ++i) {
      double x = rng.uniform(-3.0, 3.0);
      if (std::fabs(x) < 1e-3) x += 0.5;  // keep probes off the joint
      const double h = 1e-6;
      const double numeric = (elu(x + h, alpha) - elu(x - h, alpha)) / (2.0 * h);
      const double analytic = elu_derivative(x, alpha);
      CHECK(std::fabs(analytic - numeric) / std::max(1.0, std::fabs(analytic)) < 1e-6);
    }
  }
}

TEST_CASE("softmax cross-entropy closed forms") {
  const CrossEntropy symmetric = softmax_cross_entropy({0.0, 0.0}, 1);
  CHECK(symmetric.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(symmetric.grad_logits[0] == doctest::Approx(0.5));
  CHECK(symmetric.grad_logits[1] == doctest::Approx(-0.5));

  const CrossEntropy confident = softmax_cross_entropy({10.0, -10.0}, 0);
  CHECK(confident.loss == doctest::Approx(std::log1p(std::exp(-20.0))).epsilon(1e-9));
  CHECK(confident.loss < 3e-9);

  for (double a : {-5.0, 0.0, 3.25}) {
    CHECK(softmax_cross_entropy({a, a}, 0).loss ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
}

TEST_CASE("softmax cross-entropy is shift invariant") {
  Rng rng(12);
  for (int i = 0; i < 50; ++i) {
    const double l0 = rng.uniform(-4, 4), l1 = rng.uniform(-4, 4);
    const double c = rng.uniform(-10, 10);
    const double base = softmax_cross_entropy({l0, l1}, 1).loss;
    const double shifted = softmax_cross_entropy({l0 + c, l1 + c}, 1).loss;
    CHECK(std::fabs(base - shifted) < 1e-12);
  }
}

TEST_CASE("central difference gradient on simple fields") {
  auto square = [](const Vector& v) { return v[0] * v[0]; };
  const Vector g = central_diff_grad(square, {1.0}, 1e-3);
  CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-6));

  auto constant = [](const Vector&) { return 3.5; };
  for (double gi : central_diff_grad(constant, {0.2, -0.4, 1.0}, 1e-4)) {
    CHECK(gi == doctest::Approx(0.0));
  }

  auto blows_up = [](const Vector& v) { return std::log(v[0]); };
  CHECK_THROWS_AS(central_diff_grad(blows_up, {0.5}, 1.0), std::runtime_error);
}

TEST_CASE("fd hessian of a quadratic recovers the matrix") {
  // f(x) = x0^2 + 3 x0 x1 - 2 x1^2
  auto f = [](const Vector& v) {
    return v[0] * v[0] + 3.0 * v[0] * v[1] - 2.0 * v[1] * v[1];
  };
  const Matrix h = fd_hessian(f, {0.3, -0.7}, 1e-4);
  CHECK(h(0, 0) == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(h(0, 1) == doctest::Approx(3.0).epsilon(1e-4));
  CHECK(h(1, 0) == doctest::Approx(3.0).epsilon(1e-4));
  CHECK(h(1, 1) == doctest::Approx(-4.0).epsilon(1e-4));
}

TEST_CASE("symmetric eigenvalues: small closed forms") {
  CHECK(sym_eigenvalues(Matrix::identity(2)) == Vector{1.0, 1.0});

  Matrix offdiag(2, 2, 0.0);
  offdiag(0, 1) = 1.0;
  offdiag(1, 0) = 1.0;
  const Vector eig = sym_eigenvalues(offdiag);
  CHECK(eig[0] == doctest::Approx(-1.0).epsilon(1e-10));
  CHECK(eig[1] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("symmetric eigenvalues: trace identity and permutation invariance") {
  Rng rng(21);
  Matrix h(5, 5);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = i; j < 5; ++j) {
      const double v = rng.uniform(-2, 2);
      h(i, j) = v;
      h(j, i) = v;
    }
  }
  const Vector eig = sym_eigenvalues(h);
  double trace = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < 5; ++i) trace += h(i, i);
  for (double e : eig) sum += e;
  CHECK(std::fabs(sum - trace) < 1e-6);

  // permute rows/cols with the cycle (0 1 2 3 4)
  Matrix p(5, 5);
  std::vector<std::size_t> perm{1, 2, 3, 4, 0};
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      p(i, j) = h(perm[i], perm[j]);
    }
  }
  const Vector eig_p = sym_eigenvalues(p);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(std::fabs(eig[i] - eig_p[i]) < 1e-9);
  }
}

TEST_CASE("symmetric eigenvalues reject bad input") {
  Matrix asym(2, 2, 0.0);
  asym(0, 1) = 1.0;
  asym(1, 0) = 0.5;
  CHECK_THROWS_AS(sym_eigenvalues(asym), std::invalid_argument);

  Matrix rect(2, 3, 0.0);
  CHECK_THROWS_AS(sym_eigenvalues(rect), std::invalid_argument);

  Matrix big(4, 4, 0.0);
  CHECK_THROWS_AS(sym_eigenvalues(big, 3), std::invalid_argument);
}

TEST_CASE("matvec and transposed matvec") {
  Matrix m(2, 3);
  m(0, 0) = 1; m(0, 1) = 2; m(0, 2) = 3;
  m(1, 0) = 4; m(1, 1) = 5; m(1, 2) = 6;
  CHECK(matvec(m, {1, 1, 1}) == Vector{6, 15});
  CHECK(matvec_transposed(m, {1, 1}) == Vector{5, 7, 9});
  CHECK_THROWS_AS(matvec(m, {1, 1}), std::invalid_argument);
}
