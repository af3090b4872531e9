#include "padforge/models.hpp"

#include <cmath>
#include <stdexcept>

namespace padforge {

namespace {

void fill_glorot(Matrix& m, Rng& rng, bool nonneg) {
  const double bound =
      std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (double& v : m.data()) {
    const double draw = rng.uniform(-bound, bound);
    v = nonneg ? std::fabs(draw) : draw;
  }
}

void fill_glorot(Vector& v, std::size_t fan_in, Rng& rng, bool nonneg) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + 1));
  for (double& x : v) {
    const double draw = rng.uniform(-bound, bound);
    x = nonneg ? std::fabs(draw) : draw;
  }
}

void check_input(std::size_t expected, const Vector& x, const char* what) {
  if (x.size() != expected) {
    throw std::invalid_argument(std::string(what) + ": input dimension mismatch");
  }
}

}  // namespace

std::size_t IcnnParams::input_dim() const {
  return w_x.size();
}

MlpParams init_mlp(const MlpConfig& cfg, Rng& rng) {
  if (cfg.input_dim == 0 || cfg.hidden == 0) {
    throw std::invalid_argument("init_mlp: dimensions must be positive");
  }
  MlpParams p;
  p.elu_alpha = cfg.elu_alpha;
  p.w1 = Matrix(cfg.hidden, cfg.input_dim);
  p.w2 = Matrix(cfg.hidden, cfg.hidden);
  p.w3 = Matrix(2, cfg.hidden);
  fill_glorot(p.w1, rng, false);
  fill_glorot(p.w2, rng, false);
  fill_glorot(p.w3, rng, false);
  p.b1.assign(cfg.hidden, 0.0);
  p.b2.assign(cfg.hidden, 0.0);
  p.b3.assign(2, 0.0);
  return p;
}

IcnnParams init_icnn(const IcnnConfig& cfg, Rng& rng) {
  if (cfg.input_dim == 0 || cfg.hidden.empty()) {
    throw std::invalid_argument("init_icnn: dimensions must be positive");
  }
  IcnnParams p;
  p.elu_alpha = cfg.elu_alpha;
  p.layers.resize(cfg.hidden.size());
  for (std::size_t i = 0; i < cfg.hidden.size(); ++i) {
    IcnnLayer& layer = p.layers[i];
    if (cfg.hidden[i] == 0) {
      throw std::invalid_argument("init_icnn: hidden width must be positive");
    }
    if (i > 0) {
      layer.wz = Matrix(cfg.hidden[i], cfg.hidden[i - 1]);
      fill_glorot(layer.wz, rng, true);
    }
    layer.wx = Matrix(cfg.hidden[i], cfg.input_dim);
    fill_glorot(layer.wx, rng, false);
    layer.bias.assign(cfg.hidden[i], 0.0);
  }
  p.w_out.assign(cfg.hidden.back(), 0.0);
  fill_glorot(p.w_out, cfg.hidden.back(), rng, true);
  p.w_x.assign(cfg.input_dim, 0.0);
  fill_glorot(p.w_x, cfg.input_dim, rng, false);
  p.b_out = 0.0;
  return p;
}

Vector mlp_forward(const MlpParams& p, const Vector& x) {
  check_input(p.input_dim(), x, "mlp_forward");
  Vector z1 = matvec(p.w1, x);
  axpy(1.0, p.b1, z1);
  const Vector h1 = elu(z1, p.elu_alpha);
  Vector z2 = matvec(p.w2, h1);
  axpy(1.0, p.b2, z2);
  const Vector h2 = elu(z2, p.elu_alpha);
  Vector logits = matvec(p.w3, h2);
  axpy(1.0, p.b3, logits);
  return logits;
}

int mlp_predict(const MlpParams& p, const Vector& x) {
  const Vector logits = mlp_forward(p, x);
  return logits[1] > logits[0] ? 1 : 0;
}

double mlp_malware_confidence(const MlpParams& p, const Vector& x) {
  const Vector logits = mlp_forward(p, x);
  return sigmoid(logits[1] - logits[0]);
}

double mlp_loss(const MlpParams& p, const Vector& x, int label) {
  return softmax_cross_entropy(mlp_forward(p, x), label).loss;
}

MlpBackprop mlp_loss_and_grads(const MlpParams& p, const Vector& x, int label) {
  check_input(p.input_dim(), x, "mlp_loss_and_grads");

  Vector z1 = matvec(p.w1, x);
  axpy(1.0, p.b1, z1);
  const Vector h1 = elu(z1, p.elu_alpha);
  Vector z2 = matvec(p.w2, h1);
  axpy(1.0, p.b2, z2);
  const Vector h2 = elu(z2, p.elu_alpha);
  Vector logits = matvec(p.w3, h2);
  axpy(1.0, p.b3, logits);

  const CrossEntropy ce = softmax_cross_entropy(logits, label);

  MlpBackprop out;
  out.loss = ce.loss;
  out.grads = zero_like(p);

  const Vector& dlogits = ce.grad_logits;
  out.grads.b3 = dlogits;
  add_outer(out.grads.w3, dlogits, h2);

  Vector dh2 = matvec_transposed(p.w3, dlogits);
  Vector dz2(dh2.size());
  for (std::size_t i = 0; i < dz2.size(); ++i) {
    dz2[i] = dh2[i] * elu_derivative(z2[i], p.elu_alpha);
  }
  out.grads.b2 = dz2;
  add_outer(out.grads.w2, dz2, h1);

  Vector dh1 = matvec_transposed(p.w2, dz2);
  Vector dz1(dh1.size());
  for (std::size_t i = 0; i < dz1.size(); ++i) {
    dz1[i] = dh1[i] * elu_derivative(z1[i], p.elu_alpha);
  }
  out.grads.b1 = dz1;
  add_outer(out.grads.w1, dz1, x);

  out.grad_x = matvec_transposed(p.w1, dz1);
  return out;
}

Vector mlp_input_grad(const MlpParams& p, const Vector& x, int label,
                      double* loss_out) {
  check_input(p.input_dim(), x, "mlp_input_grad");

  Vector z1 = matvec(p.w1, x);
  axpy(1.0, p.b1, z1);
  const Vector h1 = elu(z1, p.elu_alpha);
  Vector z2 = matvec(p.w2, h1);
  axpy(1.0, p.b2, z2);
  const Vector h2 = elu(z2, p.elu_alpha);
  Vector logits = matvec(p.w3, h2);
  axpy(1.0, p.b3, logits);

  const CrossEntropy ce = softmax_cross_entropy(logits, label);
  if (loss_out != nullptr) *loss_out = ce.loss;

  Vector dh2 = matvec_transposed(p.w3, ce.grad_logits);
  for (std::size_t i = 0; i < dh2.size(); ++i) {
    dh2[i] *= elu_derivative(z2[i], p.elu_alpha);
  }
  Vector dh1 = matvec_transposed(p.w2, dh2);
  for (std::size_t i = 0; i < dh1.size(); ++i) {
    dh1[i] *= elu_derivative(z1[i], p.elu_alpha);
  }
  return matvec_transposed(p.w1, dh1);
}

namespace {

struct IcnnActivations {
  std::vector<Vector> pre;   // pre-activations per layer
  std::vector<Vector> post;  // elu outputs per layer
  double score = 0.0;
};

IcnnActivations icnn_run(const IcnnParams& p, const Vector& x) {
  IcnnActivations act;
  const std::size_t n_layers = p.layers.size();
  act.pre.resize(n_layers);
  act.post.resize(n_layers);
  for (std::size_t i = 0; i < n_layers; ++i) {
    const IcnnLayer& layer = p.layers[i];
    Vector z = matvec(layer.wx, x);
    axpy(1.0, layer.bias, z);
    if (i > 0) {
      const Vector chain = matvec(layer.wz, act.post[i - 1]);
      axpy(1.0, chain, z);
    }
    act.pre[i] = std::move(z);
    act.post[i] = elu(act.pre[i], p.elu_alpha);
  }
  act.score = dot(p.w_out, act.post.back()) + dot(p.w_x, x) + p.b_out;
  return act;
}

}  // namespace

double icnn_score(const IcnnParams& p, const Vector& x) {
  check_input(p.input_dim(), x, "icnn_score");
  return icnn_run(p, x).score;
}

Vector icnn_score_input_grad(const IcnnParams& p, const Vector& x,
                             double* score_out) {
  check_input(p.input_dim(), x, "icnn_score_input_grad");
  const IcnnActivations act = icnn_run(p, x);
  if (score_out != nullptr) *score_out = act.score;

  const std::size_t n_layers = p.layers.size();
  Vector grad_x = p.w_x;
  Vector upstream = p.w_out;  // d(score)/d(post[i]) running backwards
  for (std::size_t ri = n_layers; ri-- > 0;) {
    Vector s(upstream.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
      s[k] = upstream[k] * elu_derivative(act.pre[ri][k], p.elu_alpha);
    }
    const Vector via_skip = matvec_transposed(p.layers[ri].wx, s);
    axpy(1.0, via_skip, grad_x);
    if (ri > 0) {
      upstream = matvec_transposed(p.layers[ri].wz, s);
    }
  }
  return grad_x;
}

double icnn_loss(const IcnnParams& p, const Vector& x, int pert) {
  const double score = icnn_score(p, x);
  // pert=1: -log sigmoid(score); pert=0: -log(1 - sigmoid(score)).
  return pert == 1 ? softplus(-score) : softplus(score);
}

IcnnBackprop icnn_loss_and_grads(const IcnnParams& p, const Vector& x, int pert) {
  check_input(p.input_dim(), x, "icnn_loss_and_grads");
  if (pert != 0 && pert != 1) {
    throw std::invalid_argument("icnn_loss_and_grads: pert must be 0 or 1");
  }
  const IcnnActivations act = icnn_run(p, x);

  IcnnBackprop out;
  out.loss = pert == 1 ? softplus(-act.score) : softplus(act.score);
  out.grads = zero_like(p);

  const double dscore = sigmoid(act.score) - static_cast<double>(pert);

  const std::size_t n_layers = p.layers.size();
  out.grads.w_out = act.post.back();
  for (double& v : out.grads.w_out) v *= dscore;
  out.grads.w_x = x;
  for (double& v : out.grads.w_x) v *= dscore;
  out.grads.b_out = dscore;

  out.grad_x = p.w_x;
  for (double& v : out.grad_x) v *= dscore;

  Vector upstream = p.w_out;
  for (double& v : upstream) v *= dscore;

  for (std::size_t ri = n_layers; ri-- > 0;) {
    Vector s(upstream.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
      s[k] = upstream[k] * elu_derivative(act.pre[ri][k], p.elu_alpha);
    }
    out.grads.layers[ri].bias = s;
    add_outer(out.grads.layers[ri].wx, s, x);
    const Vector via_skip = matvec_transposed(p.layers[ri].wx, s);
    axpy(1.0, via_skip, out.grad_x);
    if (ri > 0) {
      add_outer(out.grads.layers[ri].wz, s, act.post[ri - 1]);
      upstream = matvec_transposed(p.layers[ri].wz, s);
    }
  }
  return out;
}

void project_nonneg(IcnnParams& p) {
  for (std::size_t i = 1; i < p.layers.size(); ++i) {
    for (double& v : p.layers[i].wz.data()) {
      if (v < 0.0) v = 0.0;
    }
  }
  for (double& v : p.w_out) {
    if (v < 0.0) v = 0.0;
  }
}

void check_nonneg(const IcnnParams& p) {
  for (std::size_t i = 1; i < p.layers.size(); ++i) {
    for (double v : p.layers[i].wz.data()) {
      if (v < 0.0) {
        throw std::logic_error("icnn constraint violated: negative chain weight");
      }
    }
  }
  for (double v : p.w_out) {
    if (v < 0.0) {
      throw std::logic_error("icnn constraint violated: negative output weight");
    }
  }
}

namespace {

void append(Vector& flat, const Vector& v) {
  flat.insert(flat.end(), v.begin(), v.end());
}

void append(Vector& flat, const Matrix& m) {
  append(flat, m.data());
}

std::size_t take(const Vector& flat, std::size_t at, Vector& v) {
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = flat[at + i];
  return at + v.size();
}

std::size_t take(const Vector& flat, std::size_t at, Matrix& m) {
  return take(flat, at, m.data());
}

}  // namespace

Vector pack(const MlpParams& p) {
  Vector flat;
  flat.reserve(p.w1.size() + p.b1.size() + p.w2.size() + p.b2.size() +
               p.w3.size() + p.b3.size());
  append(flat, p.w1);
  append(flat, p.b1);
  append(flat, p.w2);
  append(flat, p.b2);
  append(flat, p.w3);
  append(flat, p.b3);
  return flat;
}

void unpack(const Vector& flat, MlpParams& p) {
  std::size_t at = 0;
  at = take(flat, at, p.w1);
  at = take(flat, at, p.b1);
  at = take(flat, at, p.w2);
  at = take(flat, at, p.b2);
  at = take(flat, at, p.w3);
  at = take(flat, at, p.b3);
  if (at != flat.size()) {
    throw std::invalid_argument("unpack(mlp): size mismatch");
  }
}

Vector pack(const IcnnParams& p) {
  Vector flat;
  for (const IcnnLayer& layer : p.layers) {
    append(flat, layer.wz);
    append(flat, layer.wx);
    append(flat, layer.bias);
  }
  append(flat, p.w_out);
  append(flat, p.w_x);
  flat.push_back(p.b_out);
  return flat;
}

void unpack(const Vector& flat, IcnnParams& p) {
  std::size_t at = 0;
  for (IcnnLayer& layer : p.layers) {
    at = take(flat, at, layer.wz);
    at = take(flat, at, layer.wx);
    at = take(flat, at, layer.bias);
  }
  at = take(flat, at, p.w_out);
  at = take(flat, at, p.w_x);
  p.b_out = flat[at++];
  if (at != flat.size()) {
    throw std::invalid_argument("unpack(icnn): size mismatch");
  }
}

MlpParams zero_like(const MlpParams& p) {
  MlpParams z;
  z.elu_alpha = p.elu_alpha;
  z.w1 = Matrix(p.w1.rows(), p.w1.cols());
  z.w2 = Matrix(p.w2.rows(), p.w2.cols());
  z.w3 = Matrix(p.w3.rows(), p.w3.cols());
  z.b1.assign(p.b1.size(), 0.0);
  z.b2.assign(p.b2.size(), 0.0);
  z.b3.assign(p.b3.size(), 0.0);
  return z;
}

IcnnParams zero_like(const IcnnParams& p) {
  IcnnParams z;
  z.elu_alpha = p.elu_alpha;
  z.layers.resize(p.layers.size());
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const IcnnLayer& src = p.layers[i];
    z.layers[i].wz = Matrix(src.wz.rows(), src.wz.cols());
    z.layers[i].wx = Matrix(src.wx.rows(), src.wx.cols());
    z.layers[i].bias.assign(src.bias.size(), 0.0);
  }
  z.w_out.assign(p.w_out.size(), 0.0);
  z.w_x.assign(p.w_x.size(), 0.0);
  z.b_out = 0.0;
  return z;
}

void add_scaled(MlpParams& acc, const MlpParams& g, double scale) {
  axpy(scale, g.w1.data(), acc.w1.data());
  axpy(scale, g.b1, acc.b1);
  axpy(scale, g.w2.data(), acc.w2.data());
  axpy(scale, g.b2, acc.b2);
  axpy(scale, g.w3.data(), acc.w3.data());
  axpy(scale, g.b3, acc.b3);
}

void add_scaled(IcnnParams& acc, const IcnnParams& g, double scale) {
  for (std::size_t i = 0; i < acc.layers.size(); ++i) {
    if (!acc.layers[i].wz.empty()) {
      axpy(scale, g.layers[i].wz.data(), acc.layers[i].wz.data());
    }
    axpy(scale, g.layers[i].wx.data(), acc.layers[i].wx.data());
    axpy(scale, g.layers[i].bias, acc.layers[i].bias);
  }
  axpy(scale, g.w_out, acc.w_out);
  axpy(scale, g.w_x, acc.w_x);
  acc.b_out += scale * g.b_out;
}

}  // namespace padforge
