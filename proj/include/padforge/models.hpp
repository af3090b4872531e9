#pragma once

#include <cstddef>
#include <vector>

#include "padforge/numerics.hpp"
#include "padforge/rng.hpp"

namespace padforge {

/// Two-hidden-layer ELU classifier over d binary features, two logits out.
/// Weight matrices are stored (out x in); the same struct doubles as the
/// gradient container since shapes match one-to-one.
struct MlpParams {
  Matrix w1, w2, w3;
  Vector b1, b2, b3;
  double elu_alpha = 1.0;

  std::size_t input_dim() const { return w1.cols(); }
  std::size_t hidden_dim() const { return w1.rows(); }
};

struct MlpConfig {
  std::size_t input_dim = 0;
  std::size_t hidden = 200;
  double elu_alpha = 1.0;
};

/// Convex scorer: hidden layers chain through non-negative weights wz while
/// every layer also sees the raw input through an unconstrained skip wx.
/// Layer 0 has no wz (it is the skip path alone), so convexity needs no
/// constraint on it. Output is w_out . z_last + w_x . x + b_out with
/// w_out >= 0.
struct IcnnLayer {
  Matrix wz;  // empty for layer 0; entries must stay >= 0 elsewhere
  Matrix wx;
  Vector bias;
};

struct IcnnParams {
  std::vector<IcnnLayer> layers;
  Vector w_out;  // entries must stay >= 0
  Vector w_x;
  double b_out = 0.0;
  double elu_alpha = 1.0;

  std::size_t input_dim() const;
};

struct IcnnConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden = {200, 200};
  double elu_alpha = 1.0;
};

/// Glorot-uniform initialization; constrained blocks take the absolute
/// value of the draw, biases start at zero. Deterministic under the seed.
MlpParams init_mlp(const MlpConfig& cfg, Rng& rng);
IcnnParams init_icnn(const IcnnConfig& cfg, Rng& rng);

Vector mlp_forward(const MlpParams& p, const Vector& x);
int mlp_predict(const MlpParams& p, const Vector& x);
/// Softmax probability of the malicious class.
double mlp_malware_confidence(const MlpParams& p, const Vector& x);
double mlp_loss(const MlpParams& p, const Vector& x, int label);

struct MlpBackprop {
  double loss = 0.0;
  MlpParams grads;
  Vector grad_x;
};
MlpBackprop mlp_loss_and_grads(const MlpParams& p, const Vector& x, int label);
/// Gradient of the classification loss with respect to the input only.
Vector mlp_input_grad(const MlpParams& p, const Vector& x, int label,
                      double* loss_out = nullptr);

double icnn_score(const IcnnParams& p, const Vector& x);
/// Gradient of the raw convex score with respect to the input.
Vector icnn_score_input_grad(const IcnnParams& p, const Vector& x,
                             double* score_out = nullptr);
/// Binary cross-entropy of sigmoid(score) against the pert flag.
double icnn_loss(const IcnnParams& p, const Vector& x, int pert);

struct IcnnBackprop {
  double loss = 0.0;
  IcnnParams grads;
  Vector grad_x;
};
IcnnBackprop icnn_loss_and_grads(const IcnnParams& p, const Vector& x, int pert);

/// Clamp every constrained entry at zero; skip weights and biases are
/// untouched. Idempotent.
void project_nonneg(IcnnParams& p);

/// Contract check: throws if a constrained entry is negative.
void check_nonneg(const IcnnParams& p);

// Flat views, used by the optimizers and finite-difference checks.
// pack/unpack round-trip in a fixed order (w1,b1,w2,b2,w3,b3 for the MLP;
// per-layer wz,wx,bias then w_out,w_x,b_out for the convex net).
Vector pack(const MlpParams& p);
void unpack(const Vector& flat, MlpParams& p);
Vector pack(const IcnnParams& p);
void unpack(const Vector& flat, IcnnParams& p);

MlpParams zero_like(const MlpParams& p);
IcnnParams zero_like(const IcnnParams& p);
void add_scaled(MlpParams& acc, const MlpParams& g, double scale);
void add_scaled(IcnnParams& acc, const IcnnParams& g, double scale);

}  // namespace padforge
