#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "padforge/attacks.hpp"
#include "padforge/data.hpp"
#include "padforge/training.hpp"

namespace padforge {

/// Thrown when a checkpoint and a dataset disagree on the feature
/// dimension (exit code 4 in the command-line tool).
struct ArtifactMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One experiment: data source, split, training recipe, evaluation knobs.
/// Every field has a working default, so an empty config runs the stock
/// desk-scale benchmark end to end.
struct ExperimentConfig {
  SyntheticSpec synthetic = drebin_mini_spec(0);
  std::string dataset_path;  // empty: generate from `synthetic`
  std::string space_path;    // empty: stock manipulation space
  SplitSpec split;
  TrainConfig train;
  double eval_k = 5.0;       // validation percentage for the score threshold
  std::string output_dir = "out";
  int threads = 0;           // 0: all hardware threads
  std::uint64_t seed = 0;
};

ExperimentConfig default_experiment();

/// Parse a JSON config file. Unknown keys are rejected; invalid values
/// throw std::invalid_argument naming the offending field.
ExperimentConfig load_experiment_file(const std::filesystem::path& path);

/// Named attack grid mirroring the standard evaluation: the greedy
/// families, rfgsm, the three pgd norms, mimicry, the max strategies and
/// the stepwise mixture; adaptive mode adds the orthogonal variants.
std::vector<std::pair<std::string, AttackConfig>> default_attack_suite(
    AttackMode mode);

/// Effective worker count: the PAD_FORGE_THREADS environment variable
/// overrides the requested value; 0 falls back to hardware concurrency.
int resolve_threads(int requested);

/// Defense-specific default for the adversarial term weight.
double default_beta1(DefenseKind kind);

}  // namespace padforge
