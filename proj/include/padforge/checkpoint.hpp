#pragma once

#include <filesystem>
#include <string>

#include "padforge/models.hpp"

namespace padforge {

/// On-disk model container: versioned JSON holding named arrays with
/// shapes, the input dimension, the activation name, and the list of
/// constrained (non-negative) blocks of the convex net.
struct Checkpoint {
  MlpParams mlp;
  IcnnParams icnn;
  std::string defense = "dnn";  // which training recipe produced it
  double tau = 0.0;             // calibrated score threshold, if any
  bool tau_set = false;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace padforge
