#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <numeric>

#include "padforge/evaluation.hpp"
#include "padforge/training.hpp"
#include "test_helpers.hpp"

using namespace padforge;
using namespace padforge::testing;

namespace {

Dataset separable_dataset(std::size_t n_per_class, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.dim = 12;
  spec.seed = seed;
  spec.n_benign = n_per_class;
  spec.n_malware = n_per_class;
  spec.p_benign.assign(12, 0.0);
  spec.p_malware.assign(12, 0.0);
  spec.p_malware[0] = 1.0;
  spec.p_malware[1] = 0.7;
  spec.p_benign[4] = 1.0;
  spec.p_benign[5] = 0.7;
  for (int i = 8; i < 12; ++i) {
    spec.p_benign[i] = 0.1;
    spec.p_malware[i] = 0.1;
  }
  return generate_synthetic(spec);
}

ManipulationSpace space_for(std::size_t d) {
  ManipulationSpace s;
  s.addable.assign(d, 1);
  s.removable.assign(d, 0);
  return s;
}

TrainConfig small_config(DefenseKind defense) {
  TrainConfig cfg;
  cfg.defense = defense;
  cfg.epochs = 4;
  cfg.batch = 32;
  cfg.mlp_hidden = 8;
  cfg.icnn_hidden = {6};
  cfg.inner_steps = 5;
  cfg.seed = 11;
  return cfg;
}

}  // namespace

TEST_CASE("salt and pepper sets at least half of the coordinates to one") {
  Rng rng(1);
  const FeatureVector x(11, 0);
  const FeatureVector noised = salt_pepper(x, rng);
  int ones = 0;
  for (auto b : noised) ones += b;
  CHECK(ones == 6);  // ceil(11 / 2)

  const FeatureVector all_ones(8, 1);
  Rng rng2(2);
  CHECK(salt_pepper(all_ones, rng2) == all_ones);

  Rng a(3), b(3);
  CHECK(salt_pepper(x, a) == salt_pepper(x, b));
}

TEST_CASE("adam: zero gradient leaves parameters untouched") {
  Vector params = {1.0, -2.0, 3.0};
  AdamState st;
  const Vector zero(3, 0.0);
  for (int i = 0; i < 5; ++i) adam_step(params, st, zero, 0.1);
  CHECK(params == Vector{1.0, -2.0, 3.0});
  CHECK(st.t == 5);
}

TEST_CASE("adam: first step and constant-gradient recurrence") {
  // bias correction makes the first update -lr * g / (|g| + eps)
  Vector params = {0.0};
  AdamState st;
  adam_step(params, st, {1.0}, 0.1);
  CHECK(params[0] == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-15));

  // independent replay of the textbook recurrence for three steps
  double m = 0.0, v = 0.0, x = 0.0;
  for (int t = 1; t <= 3; ++t) {
    m = 0.9 * m + 0.1 * 1.0;
    v = 0.999 * v + 0.001 * 1.0;
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    x -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
  }
  Vector p2 = {0.0};
  AdamState st2;
  for (int t = 0; t < 3; ++t) adam_step(p2, st2, {1.0}, 0.1);
  CHECK(p2[0] == doctest::Approx(x).epsilon(1e-15));
  // frozen value of the closed form -0.1 * k / (1 + 1e-8) at k = 3
  CHECK(p2[0] == doctest::Approx(-0.29999999700000003).epsilon(1e-12));
}

TEST_CASE("sgd step") {
  Vector params = {1.0, 2.0};
  sgd_step(params, {0.5, -1.0}, 0.1);
  CHECK(params[0] == doctest::Approx(0.95));
  CHECK(params[1] == doctest::Approx(2.1));
  CHECK_THROWS_AS(sgd_step(params, {1.0}, 0.1), std::invalid_argument);
}

TEST_CASE("plain training reaches full accuracy on separable data") {
  const Dataset data = separable_dataset(300, 21);
  TrainConfig cfg = small_config(DefenseKind::dnn);
  cfg.epochs = 10;
  const TrainState state = train(data, cfg, space_for(12));
  CHECK(evaluate_classifier(state.mlp, data).acc == 100.0);
}

TEST_CASE("hardened training with zero weights walks the plain trajectory") {
  const Dataset data = separable_dataset(120, 22);
  const ManipulationSpace space = space_for(12);

  TrainConfig plain = small_config(DefenseKind::dnn);
  TrainConfig pad = small_config(DefenseKind::pad_sma);
  pad.beta1 = 0.0;
  pad.beta2 = 0.0;
  TrainConfig at = small_config(DefenseKind::at_maxma);
  at.beta1 = 0.0;

  const TrainState a = train(data, plain, space);
  const TrainState b = train(data, pad, space);
  const TrainState c = train(data, at, space);
  CHECK(pack(a.mlp) == pack(b.mlp));
  CHECK(pack(a.icnn) == pack(b.icnn));
  CHECK(pack(a.mlp) == pack(c.mlp));
  CHECK(pack(a.icnn) == pack(c.icnn));
}

TEST_CASE("training is reproducible under the seed") {
  const Dataset data = separable_dataset(100, 23);
  const TrainConfig cfg = small_config(DefenseKind::pad_sma);
  const TrainState a = train(data, cfg, space_for(12));
  const TrainState b = train(data, cfg, space_for(12));
  CHECK(pack(a.mlp) == pack(b.mlp));
  CHECK(pack(a.icnn) == pack(b.icnn));
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].total == b.history[i].total);
  }
}

TEST_CASE("hardened training keeps the convex-net constraints and finite losses") {
  const Dataset data = separable_dataset(150, 24);
  TrainConfig cfg = small_config(DefenseKind::pad_sma);
  cfg.epochs = 10;
  const TrainState state = train(data, cfg, space_for(12));
  CHECK_NOTHROW(check_nonneg(state.icnn));
  for (const EpochLoss& l : state.history) {
    CHECK(std::isfinite(l.total));
  }
  // five-epoch moving average of the total loss decreases
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 5; ++i) head += state.history[i].total;
  for (int i = 5; i < 10; ++i) tail += state.history[i].total;
  CHECK(tail < head);
}

TEST_CASE("adversarial term dominates the clean term under the inner attack") {
  const Dataset data = separable_dataset(150, 25);
  TrainConfig warm = small_config(DefenseKind::dnn);
  warm.epochs = 3;
  const TrainState state = train(data, warm, space_for(12));

  DetectorPair det{&state.mlp, nullptr, 0.0};
  AttackConfig attack;
  attack.family = AttackFamily::rfgsm;
  attack.steps = 20;
  attack.alpha_inf = 0.05;
  attack.random_round = false;
  attack.mode = AttackMode::oblivious;

  const ManipulationSpace space = space_for(12);
  double clean_sum = 0.0, adv_sum = 0.0;
  int used = 0;
  for (std::size_t i = 0; i < data.examples.size() && used < 20; ++i) {
    if (data.examples[i].label != 1) continue;
    const FeatureVector x = data.dense(i);
    const AttackResult res = rfgsm_attack(det, x, space, attack);
    clean_sum += mlp_loss(state.mlp, to_real(x), 1);
    adv_sum += mlp_loss(state.mlp, to_real(res.x_adv), 1);
    ++used;
  }
  CHECK(adv_sum >= clean_sum - 1e-9);
}

TEST_CASE("degenerate single-class batches are skipped and counted") {
  Dataset data;
  data.dim = 6;
  for (int i = 0; i < 63; ++i) data.examples.push_back({{0, 1}, 1});
  data.examples.push_back({{4}, 0});  // a single benign row
  TrainConfig cfg = small_config(DefenseKind::dnn);
  cfg.batch = 8;
  cfg.epochs = 2;
  const TrainState state = train(data, cfg, space_for(6));
  CHECK(state.skipped_batches > 0);
  CHECK(state.epoch == 2);
}

TEST_CASE("four-term batch gradient matches a directional finite difference") {
  const Dataset data = separable_dataset(40, 26);
  const ManipulationSpace space = space_for(12);
  Rng rng(5);
  MlpParams mlp = random_mlp(12, 8, 61);
  IcnnParams icnn = random_icnn(12, {6}, 62);

  // freeze a batch with fixed noised and adversarial companions
  struct Row {
    FeatureVector x, noised;
    Vector adv;
    int label;
  };
  std::vector<Row> batch;
  const Criterion j = make_criterion(mlp, &icnn, 1.0);
  for (std::size_t i = 0; i < 24; ++i) {
    Row row;
    row.x = data.dense(i);
    row.label = data.examples[i].label;
    Rng noise = rng.split(i);
    row.noised = salt_pepper(row.x, noise);
    if (row.label == 1) {
      const Box box = box_bounds(row.x, space, false);
      row.adv = sma_perturb(j, to_real(row.x), box, 1.0, 0.5, 0.02, 5, nullptr, nullptr);
    }
    batch.push_back(std::move(row));
  }

  const double beta1 = 0.1, beta2 = 1.0;
  auto batch_loss = [&](const MlpParams& m, const IcnnParams& g) {
    double acc = 0.0;
    for (const Row& row : batch) {
      acc += mlp_loss(m, to_real(row.x), row.label);
      acc += icnn_loss(g, to_real(row.x), 0);
      acc += icnn_loss(g, to_real(row.noised), 1);
      if (row.label == 1) {
        acc += beta1 * mlp_loss(m, row.adv, 1);
        acc += beta2 * icnn_loss(g, row.adv, 1);
      }
    }
    return acc / static_cast<double>(batch.size());
  };

  MlpParams mlp_grad = zero_like(mlp);
  IcnnParams icnn_grad = zero_like(icnn);
  const double b = static_cast<double>(batch.size());
  for (const Row& row : batch) {
    add_scaled(mlp_grad, mlp_loss_and_grads(mlp, to_real(row.x), row.label).grads, 1.0 / b);
    add_scaled(icnn_grad, icnn_loss_and_grads(icnn, to_real(row.x), 0).grads, 1.0 / b);
    add_scaled(icnn_grad, icnn_loss_and_grads(icnn, to_real(row.noised), 1).grads, 1.0 / b);
    if (row.label == 1) {
      add_scaled(mlp_grad, mlp_loss_and_grads(mlp, row.adv, 1).grads, beta1 / b);
      add_scaled(icnn_grad, icnn_loss_and_grads(icnn, row.adv, 1).grads, beta2 / b);
    }
  }

  // directional probe along the analytic gradient of both parameter blocks
  const Vector dm = pack(mlp_grad);
  const Vector dg = pack(icnn_grad);
  const double h = 1e-6;
  MlpParams mp = mlp, mm = mlp;
  IcnnParams gp = icnn, gm = icnn;
  Vector mflat = pack(mlp), gflat = pack(icnn);
  Vector mplus = mflat, mminus = mflat, gplus = gflat, gminus = gflat;
  axpy(h, dm, mplus);
  axpy(-h, dm, mminus);
  axpy(h, dg, gplus);
  axpy(-h, dg, gminus);
  unpack(mplus, mp);
  unpack(mminus, mm);
  unpack(gplus, gp);
  unpack(gminus, gm);

  const double fd = (batch_loss(mp, gp) - batch_loss(mm, gm)) / (2.0 * h);
  const double analytic = dot(dm, dm) + dot(dg, dg);
  CHECK(std::fabs(fd - analytic) / std::max(1.0, std::fabs(analytic)) < 1e-3);
}

TEST_CASE("epoch-zero training returns the initialized parameters") {
  const Dataset data = separable_dataset(50, 27);
  TrainConfig cfg = small_config(DefenseKind::pad_sma);
  cfg.epochs = 0;
  const TrainState state = train(data, cfg, space_for(12));
  CHECK(state.epoch == 0);
  CHECK(state.history.empty());
  CHECK_NOTHROW(check_nonneg(state.icnn));
}

TEST_CASE("training config validation") {
  TrainConfig cfg;
  cfg.batch = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.beta1 = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  DefenseKind kind;
  CHECK(parse_defense_kind("pad-sma", kind));
  CHECK(kind == DefenseKind::pad_sma);
  CHECK(parse_defense_kind("at_rfgsm", kind));
  CHECK(!parse_defense_kind("unknown", kind));
}
