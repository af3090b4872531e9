#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace padforge {

using Vector = std::vector<double>;

/// Dense row-major matrix of 64-bit floats.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double value = 0.0);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  Vector& data() { return data_; }
  const Vector& data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector data_;
};

// Basic dense kernels. Shapes are checked and mismatches throw.
Vector matvec(const Matrix& m, const Vector& x);             // m * x
Vector matvec_transposed(const Matrix& m, const Vector& x);  // m^T * x
void add_outer(Matrix& m, const Vector& a, const Vector& b, double scale = 1.0);
void axpy(double a, const Vector& x, Vector& y);  // y += a * x
double dot(const Vector& a, const Vector& b);
double norm2(const Vector& v);
double norm1(const Vector& v);
double norm_inf(const Vector& v);
bool all_finite(const Vector& v);
bool all_finite(const Matrix& m);

// Exponential linear unit and its derivative. The derivative is 1 for
// x > 0 and alpha * exp(x) otherwise.
double elu(double x, double alpha = 1.0);
double elu_derivative(double x, double alpha = 1.0);
Vector elu(const Vector& v, double alpha = 1.0);
Vector elu_derivative(const Vector& v, double alpha = 1.0);

double sigmoid(double x);
/// log(1 + exp(x)) computed without overflow.
double softplus(double x);

struct CrossEntropy {
  double loss = 0.0;
  Vector grad_logits;  // softmax(logits) - onehot(label)
};

/// Two-class softmax cross-entropy with log-sum-exp stabilization.
CrossEntropy softmax_cross_entropy(const Vector& logits, int label);

/// Central finite-difference gradient, component i is
/// (fn(x + h e_i) - fn(x - h e_i)) / (2 h). Throws if fn returns a
/// non-finite value at any probe point.
Vector central_diff_grad(const std::function<double(const Vector&)>& fn,
                         const Vector& x, double step);

/// Dense Hessian from central second differences, explicitly symmetrized.
Matrix fd_hessian(const std::function<double(const Vector&)>& fn,
                  const Vector& x, double step);

/// Eigenvalues of a symmetric matrix, ascending, via cyclic Jacobi
/// rotations (off-diagonal norm tolerance 1e-10, relative). Rejects
/// asymmetric input (tolerance 1e-8, relative) and dimensions above
/// max_dim.
Vector sym_eigenvalues(const Matrix& h, std::size_t max_dim = 512);

}  // namespace padforge
