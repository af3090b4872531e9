#include "padforge/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace padforge {

Matrix::Matrix(std::size_t rows, std::size_t cols, double value)
    : rows_(rows), cols_(cols), data_(rows * cols, value) {}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = 1.0;
  }
  return m;
}

Vector matvec(const Matrix& m, const Vector& x) {
  if (m.cols() != x.size()) {
    throw std::invalid_argument("matvec: shape mismatch");
  }
  Vector y(m.rows(), 0.0);
  const double* row = m.data().data();
  for (std::size_t r = 0; r < m.rows(); ++r, row += m.cols()) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) {
      acc += row[c] * x[c];
    }
    y[r] = acc;
  }
  return y;
}

Vector matvec_transposed(const Matrix& m, const Vector& x) {
  if (m.rows() != x.size()) {
    throw std::invalid_argument("matvec_transposed: shape mismatch");
  }
  Vector y(m.cols(), 0.0);
  const double* row = m.data().data();
  for (std::size_t r = 0; r < m.rows(); ++r, row += m.cols()) {
    const double xr = x[r];
    for (std::size_t c = 0; c < m.cols(); ++c) {
      y[c] += row[c] * xr;
    }
  }
  return y;
}

void add_outer(Matrix& m, const Vector& a, const Vector& b, double scale) {
  if (m.rows() != a.size() || m.cols() != b.size()) {
    throw std::invalid_argument("add_outer: shape mismatch");
  }
  double* row = m.data().data();
  for (std::size_t r = 0; r < m.rows(); ++r, row += m.cols()) {
    const double ar = scale * a[r];
    for (std::size_t c = 0; c < m.cols(); ++c) {
      row[c] += ar * b[c];
    }
  }
}

void axpy(double a, const Vector& x, Vector& y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("axpy: shape mismatch");
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] += a * x[i];
  }
}

double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("dot: shape mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += a[i] * b[i];
  }
  return acc;
}

double norm2(const Vector& v) {
  return std::sqrt(dot(v, v));
}

double norm1(const Vector& v) {
  double acc = 0.0;
  for (double x : v) acc += std::fabs(x);
  return acc;
}

double norm_inf(const Vector& v) {
  double acc = 0.0;
  for (double x : v) acc = std::max(acc, std::fabs(x));
  return acc;
}

bool all_finite(const Vector& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

bool all_finite(const Matrix& m) {
  return all_finite(m.data());
}

double elu(double x, double alpha) {
  return x > 0.0 ? x : alpha * std::expm1(x);
}

double elu_derivative(double x, double alpha) {
  return x > 0.0 ? 1.0 : alpha * std::exp(x);
}

Vector elu(const Vector& v, double alpha) {
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = elu(v[i], alpha);
  return out;
}

Vector elu_derivative(const Vector& v, double alpha) {
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = elu_derivative(v[i], alpha);
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

CrossEntropy softmax_cross_entropy(const Vector& logits, int label) {
  if (logits.size() != 2) {
    throw std::invalid_argument("softmax_cross_entropy: expected 2 logits");
  }
  if (label != 0 && label != 1) {
    throw std::invalid_argument("softmax_cross_entropy: label must be 0 or 1");
  }
  const double m = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - m);
  const double e1 = std::exp(logits[1] - m);
  const double z = e0 + e1;
  CrossEntropy out;
  out.loss = -(logits[static_cast<std::size_t>(label)] - m - std::log(z));
  out.grad_logits = {e0 / z, e1 / z};
  out.grad_logits[static_cast<std::size_t>(label)] -= 1.0;
  return out;
}

namespace {

double probe(const std::function<double(const Vector&)>& fn, const Vector& x) {
  const double v = fn(x);
  if (!std::isfinite(v)) {
    throw std::runtime_error("finite-difference probe returned non-finite value");
  }
  return v;
}

}  // namespace

Vector central_diff_grad(const std::function<double(const Vector&)>& fn,
                         const Vector& x, double step) {
  if (step <= 0.0) {
    throw std::invalid_argument("central_diff_grad: step must be positive");
  }
  Vector grad(x.size(), 0.0);
  Vector probe_point = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe_point[i] = x[i] + step;
    const double plus = probe(fn, probe_point);
    probe_point[i] = x[i] - step;
    const double minus = probe(fn, probe_point);
    probe_point[i] = x[i];
    grad[i] = (plus - minus) / (2.0 * step);
  }
  return grad;
}

Matrix fd_hessian(const std::function<double(const Vector&)>& fn,
                  const Vector& x, double step) {
  if (step <= 0.0) {
    throw std::invalid_argument("fd_hessian: step must be positive");
  }
  const std::size_t d = x.size();
  Matrix h(d, d, 0.0);
  const double center = probe(fn, x);
  Vector p = x;

  for (std::size_t i = 0; i < d; ++i) {
    p[i] = x[i] + step;
    const double plus = probe(fn, p);
    p[i] = x[i] - step;
    const double minus = probe(fn, p);
    p[i] = x[i];
    h(i, i) = (plus - 2.0 * center + minus) / (step * step);
  }

  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      p[i] = x[i] + step;
      p[j] = x[j] + step;
      const double pp = probe(fn, p);
      p[j] = x[j] - step;
      const double pm = probe(fn, p);
      p[i] = x[i] - step;
      const double mm = probe(fn, p);
      p[j] = x[j] + step;
      const double mp = probe(fn, p);
      p[i] = x[i];
      p[j] = x[j];
      const double value = (pp - pm - mp + mm) / (4.0 * step * step);
      h(i, j) = value;
      h(j, i) = value;
    }
  }

  // Explicit symmetrization; the mixed stencil above is already symmetric,
  // this keeps the guarantee independent of the stencil.
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      const double s = 0.5 * (h(i, j) + h(j, i));
      h(i, j) = s;
      h(j, i) = s;
    }
  }
  return h;
}

namespace {

double off_diagonal_norm(const Matrix& a) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if (i != j) acc += a(i, j) * a(i, j);
    }
  }
  return std::sqrt(acc);
}

}  // namespace

Vector sym_eigenvalues(const Matrix& h, std::size_t max_dim) {
  if (h.rows() != h.cols()) {
    throw std::invalid_argument("sym_eigenvalues: matrix must be square");
  }
  const std::size_t n = h.rows();
  if (n == 0) {
    throw std::invalid_argument("sym_eigenvalues: empty matrix");
  }
  if (n > max_dim) {
    throw std::invalid_argument("sym_eigenvalues: dimension " + std::to_string(n) +
                                " exceeds cap " + std::to_string(max_dim));
  }
  if (!all_finite(h)) {
    throw std::invalid_argument("sym_eigenvalues: non-finite entries");
  }

  double max_abs = 0.0;
  for (double v : h.data()) max_abs = std::max(max_abs, std::fabs(v));
  const double sym_tol = 1e-8 * std::max(1.0, max_abs);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::fabs(h(i, j) - h(j, i)) > sym_tol) {
        throw std::invalid_argument("sym_eigenvalues: matrix is not symmetric");
      }
    }
  }

  Matrix a = h;
  double frob = 0.0;
  for (double v : a.data()) frob += v * v;
  const double tol = 1e-10 * std::max(1.0, std::sqrt(frob));

  const int max_sweeps = 100;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    if (off_diagonal_norm(a) <= tol) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::fabs(apq) <= tol / static_cast<double>(n)) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }

  Vector eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

}  // namespace padforge
