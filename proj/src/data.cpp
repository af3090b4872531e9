#include "padforge/data.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace padforge {

namespace {

[[noreturn]] void fail_line(const std::filesystem::path& path, std::size_t line,
                            const std::string& what) {
  throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

FeatureVector Dataset::dense(std::size_t i) const {
  FeatureVector x(dim, 0);
  for (std::uint32_t idx : examples[i].indices) {
    x[idx] = 1;
  }
  return x;
}

std::size_t Dataset::count_label(int label) const {
  std::size_t n = 0;
  for (const Example& e : examples) {
    if (e.label == label) ++n;
  }
  return n;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open dataset file: " + path.string());
  }
  Dataset ds;
  ds.name = path.stem().string();
  ds.provenance = "loaded from " + path.string();

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) {
    fail_line(path, 1, "missing header line");
  }
  ++line_no;
  if (line.rfind("d=", 0) != 0) {
    fail_line(path, line_no, "header must be 'd=<int>'");
  }
  try {
    const long long d = std::stoll(line.substr(2));
    if (d <= 0) fail_line(path, line_no, "dimension must be positive");
    ds.dim = static_cast<std::size_t>(d);
  } catch (const std::invalid_argument&) {
    fail_line(path, line_no, "header must be 'd=<int>'");
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    Example ex;
    if (!(ss >> ex.label) || (ex.label != 0 && ex.label != 1)) {
      fail_line(path, line_no, "label must be 0 or 1");
    }
    long long idx = 0;
    long long prev = -1;
    while (ss >> idx) {
      if (idx < 0 || static_cast<std::size_t>(idx) >= ds.dim) {
        fail_line(path, line_no,
                  "feature index " + std::to_string(idx) + " out of range [0," +
                      std::to_string(ds.dim) + ")");
      }
      if (idx <= prev) {
        fail_line(path, line_no, "indices must be ascending and unique");
      }
      prev = idx;
      ex.indices.push_back(static_cast<std::uint32_t>(idx));
    }
    if (!ss.eof()) {
      fail_line(path, line_no, "malformed feature index");
    }
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write dataset file: " + path.string());
  }
  out << "d=" << ds.dim << "\n";
  for (const Example& ex : ds.examples) {
    out << ex.label;
    for (std::uint32_t idx : ex.indices) {
      out << ' ' << idx;
    }
    out << "\n";
  }
  if (!out) {
    throw std::runtime_error("write failed: " + path.string());
  }
}

Split split_dataset(const Dataset& ds, const SplitSpec& spec) {
  if (spec.train <= 0.0 || spec.validation <= 0.0 || spec.test <= 0.0) {
    throw std::invalid_argument("split: ratios must be positive");
  }
  const double total = spec.train + spec.validation + spec.test;
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("split: ratios must sum to 1");
  }

  std::vector<std::size_t> order(ds.examples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(spec.seed);
  shuffle(order, rng);

  const std::size_t n = order.size();
  const std::size_t n_train = static_cast<std::size_t>(spec.train * static_cast<double>(n) + 0.5);
  const std::size_t n_val = static_cast<std::size_t>(spec.validation * static_cast<double>(n) + 0.5);

  Split out;
  for (Dataset* part : {&out.train, &out.validation, &out.test}) {
    part->dim = ds.dim;
    part->provenance = ds.provenance;
  }
  out.train.name = ds.name + ".train";
  out.validation.name = ds.name + ".validation";
  out.test.name = ds.name + ".test";

  for (std::size_t i = 0; i < n; ++i) {
    const Example& ex = ds.examples[order[i]];
    if (i < n_train) {
      out.train.examples.push_back(ex);
    } else if (i < n_train + n_val) {
      out.validation.examples.push_back(ex);
    } else {
      out.test.examples.push_back(ex);
    }
  }
  return out;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.dim == 0) {
    throw std::invalid_argument("generate_synthetic: dim must be positive");
  }
  if (spec.p_benign.size() != spec.dim || spec.p_malware.size() != spec.dim) {
    throw std::invalid_argument("generate_synthetic: probability vectors must have length d");
  }
  for (const Vector* probs : {&spec.p_benign, &spec.p_malware}) {
    for (double p : *probs) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument("generate_synthetic: probabilities must lie in [0,1]");
      }
    }
  }

  Dataset ds;
  ds.dim = spec.dim;
  ds.name = spec.name;
  ds.provenance = "synthetic bernoulli, seed " + std::to_string(spec.seed);

  Rng rng(spec.seed);
  Rng benign_rng = rng.split(0);
  Rng malware_rng = rng.split(1);

  auto sample_class = [&](const Vector& probs, int label, std::size_t count, Rng& class_rng) {
    for (std::size_t i = 0; i < count; ++i) {
      Example ex;
      ex.label = label;
      for (std::size_t j = 0; j < spec.dim; ++j) {
        if (class_rng.bernoulli(probs[j])) {
          ex.indices.push_back(static_cast<std::uint32_t>(j));
        }
      }
      ds.examples.push_back(std::move(ex));
    }
  };
  sample_class(spec.p_benign, 0, spec.n_benign, benign_rng);
  sample_class(spec.p_malware, 1, spec.n_malware, malware_rng);
  return ds;
}

ManipulationSpace load_manipulation_space(const std::filesystem::path& path,
                                          std::size_t dim) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open manipulation-space file: " + path.string());
  }
  ManipulationSpace space;
  space.addable.assign(dim, 0);
  space.removable.assign(dim, 0);

  std::string line;
  std::size_t line_no = 0;
  bool saw_addable = false;
  bool saw_removable = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::uint8_t>* mask = nullptr;
    std::string rest;
    if (line.rfind("addable:", 0) == 0) {
      mask = &space.addable;
      rest = line.substr(8);
      saw_addable = true;
    } else if (line.rfind("removable:", 0) == 0) {
      mask = &space.removable;
      rest = line.substr(10);
      saw_removable = true;
    } else {
      fail_line(path, line_no, "expected 'addable:' or 'removable:' line");
    }
    std::istringstream ss(rest);
    long long idx = 0;
    while (ss >> idx) {
      if (idx < 0 || static_cast<std::size_t>(idx) >= dim) {
        fail_line(path, line_no,
                  "feature index " + std::to_string(idx) + " out of range [0," +
                      std::to_string(dim) + ")");
      }
      (*mask)[static_cast<std::size_t>(idx)] = 1;
    }
    if (!ss.eof()) {
      fail_line(path, line_no, "malformed feature index");
    }
  }
  if (!saw_addable || !saw_removable) {
    throw std::runtime_error(path.string() + ": file must contain both 'addable:' and 'removable:' lines");
  }
  return space;
}

void save_manipulation_space(const ManipulationSpace& space,
                             const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write manipulation-space file: " + path.string());
  }
  out << "addable:";
  for (std::size_t i = 0; i < space.addable.size(); ++i) {
    if (space.addable[i]) out << ' ' << i;
  }
  out << "\nremovable:";
  for (std::size_t i = 0; i < space.removable.size(); ++i) {
    if (space.removable[i]) out << ' ' << i;
  }
  out << "\n";
}

SyntheticSpec drebin_mini_spec(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.dim = 64;
  spec.name = "drebin-mini";
  spec.seed = seed;
  spec.n_benign = 2000;
  spec.n_malware = 2000;
  spec.p_benign.assign(spec.dim, 0.1);
  spec.p_malware.assign(spec.dim, 0.1);
  for (std::size_t i = 0; i < 8; ++i) {       // malware-indicative block
    spec.p_malware[i] = 0.8;
    spec.p_benign[i] = 0.05;
  }
  for (std::size_t i = 8; i < 16; ++i) {      // benign-indicative block
    spec.p_malware[i] = 0.05;
    spec.p_benign[i] = 0.8;
  }
  return spec;
}

ManipulationSpace drebin_mini_space() {
  ManipulationSpace space;
  space.addable.assign(64, 0);
  space.removable.assign(64, 0);
  for (std::size_t i = 8; i < 64; ++i) space.addable[i] = 1;
  for (std::size_t i = 0; i < 4; ++i) space.removable[i] = 1;
  return space;
}

}  // namespace padforge
