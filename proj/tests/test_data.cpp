#include <doctest.h>

#include <stdexcept>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "padforge/data.hpp"
#include "padforge/evaluation.hpp"
#include "padforge/training.hpp"

using namespace padforge;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("padforge_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

Dataset tiny_dataset() {
  Dataset ds;
  ds.dim = 6;
  ds.name = "tiny";
  ds.examples.push_back({{0, 2, 5}, 1});
  ds.examples.push_back({{}, 0});  // empty example: all-zero vector
  ds.examples.push_back({{1, 3}, 0});
  return ds;
}

}  // namespace

TEST_CASE("dataset save/load round trip") {
  TempDir tmp;
  const Dataset ds = tiny_dataset();
  const fs::path file = tmp.path / "tiny.txt";
  save_dataset(ds, file);
  const Dataset back = load_dataset(file);
  REQUIRE(back.dim == ds.dim);
  REQUIRE(back.examples.size() == ds.examples.size());
  for (std::size_t i = 0; i < ds.examples.size(); ++i) {
    CHECK(back.examples[i].label == ds.examples[i].label);
    CHECK(back.examples[i].indices == ds.examples[i].indices);
  }
  CHECK(back.dense(1) == FeatureVector(6, 0));
}

TEST_CASE("dataset loader reports malformed lines with their position") {
  TempDir tmp;
  const fs::path file = tmp.path / "bad.txt";

  {
    std::ofstream out(file);
    out << "d=4\n1 0 4\n";  // index 4 out of range for d=4
  }
  try {
    load_dataset(file);
    FAIL("expected rejection of an out-of-range index");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find(":2:") != std::string::npos);
    CHECK(msg.find("out of range") != std::string::npos);
  }

  {
    std::ofstream out(file);
    out << "d=4\n0 1 1\n";  // duplicate index
  }
  CHECK_THROWS_AS(load_dataset(file), std::runtime_error);

  {
    std::ofstream out(file);
    out << "d=4\n2 0\n";  // bad label
  }
  CHECK_THROWS_AS(load_dataset(file), std::runtime_error);

  {
    std::ofstream out(file);
    out << "dim=4\n";  // bad header
  }
  CHECK_THROWS_AS(load_dataset(file), std::runtime_error);
}

TEST_CASE("split produces the requested sizes, disjoint and exhaustive") {
  Dataset ds;
  ds.dim = 3;
  for (int i = 0; i < 100; ++i) {
    Example ex;
    ex.label = i % 2;
    if (i % 3 == 0) ex.indices.push_back(static_cast<std::uint32_t>(i % 3));
    ds.examples.push_back(ex);
  }
  const Split parts = split_dataset(ds, SplitSpec{0.6, 0.2, 0.2, 7});
  CHECK(parts.train.examples.size() == 60);
  CHECK(parts.validation.examples.size() == 20);
  CHECK(parts.test.examples.size() == 20);

  // union is the original multiset: compare sorted (label, indices) tuples
  auto key = [](const Example& e) {
    std::string k = std::to_string(e.label);
    for (auto i : e.indices) k += "," + std::to_string(i);
    return k;
  };
  std::vector<std::string> all, split_all;
  for (const auto& e : ds.examples) all.push_back(key(e));
  for (const Dataset* part : {&parts.train, &parts.validation, &parts.test}) {
    for (const auto& e : part->examples) split_all.push_back(key(e));
  }
  std::sort(all.begin(), all.end());
  std::sort(split_all.begin(), split_all.end());
  CHECK(all == split_all);

  const Split again = split_dataset(ds, SplitSpec{0.6, 0.2, 0.2, 7});
  CHECK(again.train.examples.size() == parts.train.examples.size());
  for (std::size_t i = 0; i < parts.train.examples.size(); ++i) {
    CHECK(key(again.train.examples[i]) == key(parts.train.examples[i]));
  }

  CHECK_THROWS_AS(split_dataset(ds, SplitSpec{0.5, 0.2, 0.2, 7}), std::invalid_argument);
}

TEST_CASE("synthetic generation: counts, determinism, frequencies") {
  SyntheticSpec spec;
  spec.dim = 16;
  spec.n_benign = 10000;
  spec.n_malware = 10000;
  spec.seed = 13;
  spec.p_benign.assign(16, 0.3);
  spec.p_malware.assign(16, 0.7);

  const Dataset ds = generate_synthetic(spec);
  CHECK(ds.examples.size() == 20000);
  CHECK(ds.count_label(0) == 10000);
  CHECK(ds.count_label(1) == 10000);

  const Dataset again = generate_synthetic(spec);
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK(again.examples[i].indices == ds.examples[i].indices);
  }

  // class-conditional empirical frequencies within 3 sigma
  for (int label : {0, 1}) {
    const double p = label == 0 ? 0.3 : 0.7;
    std::vector<std::size_t> counts(16, 0);
    std::size_t n = 0;
    for (std::size_t i = 0; i < ds.examples.size(); ++i) {
      if (ds.examples[i].label != label) continue;
      ++n;
      for (auto idx : ds.examples[i].indices) ++counts[idx];
    }
    const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(n));
    for (std::size_t f = 0; f < 16; ++f) {
      const double freq = static_cast<double>(counts[f]) / static_cast<double>(n);
      CHECK(std::fabs(freq - p) < 3.5 * sigma);
    }
  }

  spec.p_malware[0] = 1.5;
  CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
}

TEST_CASE("indistinguishable classes cap balanced accuracy near chance") {
  SyntheticSpec spec;
  spec.dim = 16;
  spec.n_benign = 2000;
  spec.n_malware = 2000;
  spec.seed = 97;
  spec.p_benign.assign(16, 0.25);
  spec.p_malware = spec.p_benign;  // identical distributions

  const Dataset ds = generate_synthetic(spec);
  const Split parts = split_dataset(ds, SplitSpec{0.6, 0.2, 0.2, 1});
  TrainConfig cfg;
  cfg.defense = DefenseKind::dnn;
  cfg.epochs = 3;
  cfg.batch = 64;
  cfg.mlp_hidden = 16;
  cfg.icnn_hidden = {8};
  cfg.seed = 5;
  ManipulationSpace space;
  space.addable.assign(16, 1);
  space.removable.assign(16, 0);
  const TrainState state = train(parts.train, cfg, space);
  const MetricsReport m = evaluate_classifier(state.mlp, parts.test);
  CHECK(m.bacc <= 55.0);
}

TEST_CASE("disjoint-support classes are learned perfectly") {
  SyntheticSpec spec;
  spec.dim = 16;
  spec.n_benign = 600;
  spec.n_malware = 600;
  spec.seed = 4;
  spec.p_benign.assign(16, 0.0);
  spec.p_malware.assign(16, 0.0);
  for (int i = 0; i < 4; ++i) spec.p_malware[i] = 0.9;
  spec.p_malware[0] = 1.0;  // guaranteed malware marker
  for (int i = 4; i < 8; ++i) spec.p_benign[i] = 0.9;
  spec.p_benign[4] = 1.0;  // guaranteed benign marker

  const Dataset ds = generate_synthetic(spec);
  const Split parts = split_dataset(ds, SplitSpec{0.6, 0.2, 0.2, 1});
  TrainConfig cfg;
  cfg.defense = DefenseKind::dnn;
  cfg.epochs = 10;
  cfg.batch = 32;
  cfg.mlp_hidden = 16;
  cfg.icnn_hidden = {8};
  cfg.seed = 6;
  ManipulationSpace space;
  space.addable.assign(16, 1);
  space.removable.assign(16, 0);
  const TrainState state = train(parts.train, cfg, space);
  CHECK(evaluate_classifier(state.mlp, parts.train).acc == 100.0);
  CHECK(evaluate_classifier(state.mlp, parts.test).acc == 100.0);
}

TEST_CASE("manipulation space file round trip and validation") {
  TempDir tmp;
  const fs::path file = tmp.path / "space.txt";

  {
    std::ofstream out(file);
    out << "addable: 0 1 2\nremovable:\n";
  }
  const ManipulationSpace add_only = load_manipulation_space(file, 4);
  CHECK(add_only.addable == std::vector<std::uint8_t>{1, 1, 1, 0});
  CHECK(add_only.removable == std::vector<std::uint8_t>{0, 0, 0, 0});

  {
    std::ofstream out(file);
    out << "addable:\nremovable:\n";
  }
  const ManipulationSpace frozen = load_manipulation_space(file, 3);
  CHECK(frozen.addable == std::vector<std::uint8_t>{0, 0, 0});
  CHECK(frozen.removable == std::vector<std::uint8_t>{0, 0, 0});

  {
    std::ofstream out(file);
    out << "addable: 1 2\nremovable: 2\n";  // overlap is fine
  }
  const ManipulationSpace overlap = load_manipulation_space(file, 3);
  CHECK(overlap.addable[2] == 1);
  CHECK(overlap.removable[2] == 1);

  {
    std::ofstream out(file);
    out << "addable: 5\nremovable:\n";  // out of range for d=3
  }
  CHECK_THROWS_AS(load_manipulation_space(file, 3), std::runtime_error);

  const ManipulationSpace stock = drebin_mini_space();
  save_manipulation_space(stock, file);
  const ManipulationSpace back = load_manipulation_space(file, 64);
  CHECK(back.addable == stock.addable);
  CHECK(back.removable == stock.removable);
}

TEST_CASE("stock benchmark spec matches its documented shape") {
  const SyntheticSpec spec = drebin_mini_spec(3);
  CHECK(spec.dim == 64);
  CHECK(spec.n_benign == 2000);
  CHECK(spec.n_malware == 2000);
  CHECK(spec.p_malware[0] == 0.8);
  CHECK(spec.p_benign[0] == 0.05);
  CHECK(spec.p_malware[8] == 0.05);
  CHECK(spec.p_benign[8] == 0.8);
  CHECK(spec.p_malware[20] == 0.1);
  const ManipulationSpace space = drebin_mini_space();
  CHECK(space.addable[7] == 0);
  CHECK(space.addable[8] == 1);
  CHECK(space.removable[3] == 1);
  CHECK(space.removable[4] == 0);
}
