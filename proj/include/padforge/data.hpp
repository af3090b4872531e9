#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "padforge/numerics.hpp"
#include "padforge/rng.hpp"

namespace padforge {

using FeatureVector = std::vector<std::uint8_t>;

struct Example {
  std::vector<std::uint32_t> indices;  // ascending, unique, < dim
  int label = 0;                       // 0 benign, 1 malware
};

struct Dataset {
  std::size_t dim = 0;
  std::vector<Example> examples;
  std::string name;
  std::string provenance;

  FeatureVector dense(std::size_t i) const;
  std::size_t count_label(int label) const;
};

/// Text format: header "d=<int>", then one line per example,
/// "<label> idx idx ..." with ascending unique indices. Malformed input
/// throws with the offending line number.
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);

struct SplitSpec {
  double train = 0.6;
  double validation = 0.2;
  double test = 0.2;
  std::uint64_t seed = 0;
};

struct Split {
  Dataset train, validation, test;
};

/// Seeded permutation followed by contiguous cuts; disjoint and exhaustive.
Split split_dataset(const Dataset& ds, const SplitSpec& spec);

struct SyntheticSpec {
  std::size_t dim = 0;
  Vector p_benign;   // per-feature Bernoulli probability, class 0
  Vector p_malware;  // per-feature Bernoulli probability, class 1
  std::size_t n_benign = 0;
  std::size_t n_malware = 0;
  std::uint64_t seed = 0;
  std::string name = "synthetic";
};

Dataset generate_synthetic(const SyntheticSpec& spec);

struct ManipulationSpace {
  std::vector<std::uint8_t> addable;    // length d masks
  std::vector<std::uint8_t> removable;

  std::size_t dim() const { return addable.size(); }
};

/// File format: a line "addable: i j k ..." and a line "removable: ...".
/// Either list may be empty; indices must be < d.
ManipulationSpace load_manipulation_space(const std::filesystem::path& path,
                                          std::size_t dim);
void save_manipulation_space(const ManipulationSpace& space,
                             const std::filesystem::path& path);

/// Stock desk-scale benchmark: d=64, 2000 examples per class, features
/// 0-7 malware-indicative (0.8 vs 0.05), 8-15 benign-indicative
/// (0.05 vs 0.8), the rest noise at 0.1. Addable features are 8..63,
/// removable are 0..3.
SyntheticSpec drebin_mini_spec(std::uint64_t seed);
ManipulationSpace drebin_mini_space();

}  // namespace padforge
