#include "padforge/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace padforge {

namespace {

using nlohmann::json;

json array_to_json(const Matrix& m) {
  return json{{"shape", {m.rows(), m.cols()}}, {"data", m.data()}};
}

json array_to_json(const Vector& v) {
  return json{{"shape", {v.size()}}, {"data", v}};
}

Matrix matrix_from_json(const json& j) {
  const auto shape = j.at("shape").get<std::vector<std::size_t>>();
  if (shape.size() != 2) {
    throw std::runtime_error("checkpoint: expected rank-2 array");
  }
  Matrix m(shape[0], shape[1]);
  const auto data = j.at("data").get<Vector>();
  if (data.size() != m.size()) {
    throw std::runtime_error("checkpoint: array payload does not match shape");
  }
  m.data() = data;
  return m;
}

Vector vector_from_json(const json& j) {
  const auto shape = j.at("shape").get<std::vector<std::size_t>>();
  if (shape.size() != 1) {
    throw std::runtime_error("checkpoint: expected rank-1 array");
  }
  auto data = j.at("data").get<Vector>();
  if (data.size() != shape[0]) {
    throw std::runtime_error("checkpoint: array payload does not match shape");
  }
  return data;
}

constexpr int kFormatVersion = 1;

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  json j;
  j["format_version"] = kFormatVersion;
  j["input_dim"] = ckpt.mlp.input_dim();
  j["activation"] = "elu";
  j["defense"] = ckpt.defense;
  if (ckpt.tau_set) {
    j["tau"] = ckpt.tau;
  }

  json mlp;
  mlp["elu_alpha"] = ckpt.mlp.elu_alpha;
  mlp["arrays"] = {
      {"w1", array_to_json(ckpt.mlp.w1)}, {"b1", array_to_json(ckpt.mlp.b1)},
      {"w2", array_to_json(ckpt.mlp.w2)}, {"b2", array_to_json(ckpt.mlp.b2)},
      {"w3", array_to_json(ckpt.mlp.w3)}, {"b3", array_to_json(ckpt.mlp.b3)},
  };
  j["malware_model"] = mlp;

  json icnn;
  icnn["elu_alpha"] = ckpt.icnn.elu_alpha;
  icnn["num_layers"] = ckpt.icnn.layers.size();
  json arrays;
  std::vector<std::string> constrained;
  for (std::size_t i = 0; i < ckpt.icnn.layers.size(); ++i) {
    const IcnnLayer& layer = ckpt.icnn.layers[i];
    const std::string tag = std::to_string(i);
    if (i > 0) {
      arrays["wz" + tag] = array_to_json(layer.wz);
      constrained.push_back("wz" + tag);
    }
    arrays["wx" + tag] = array_to_json(layer.wx);
    arrays["b" + tag] = array_to_json(layer.bias);
  }
  arrays["w_out"] = array_to_json(ckpt.icnn.w_out);
  constrained.push_back("w_out");
  arrays["w_x"] = array_to_json(ckpt.icnn.w_x);
  arrays["b_out"] = json{{"shape", {1}}, {"data", {ckpt.icnn.b_out}}};
  icnn["arrays"] = arrays;
  icnn["nonneg_arrays"] = constrained;
  j["adversary_model"] = icnn;

  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write checkpoint: " + path.string());
  }
  out << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open checkpoint: " + path.string());
  }
  json j;
  in >> j;

  if (j.at("format_version").get<int>() != kFormatVersion) {
    throw std::runtime_error("checkpoint: unsupported format version");
  }
  if (j.at("activation").get<std::string>() != "elu") {
    throw std::runtime_error("checkpoint: unsupported activation");
  }
  const std::size_t dim = j.at("input_dim").get<std::size_t>();

  Checkpoint ckpt;
  ckpt.defense = j.value("defense", std::string("dnn"));
  if (j.contains("tau")) {
    ckpt.tau = j.at("tau").get<double>();
    ckpt.tau_set = true;
  }

  const json& mlp = j.at("malware_model");
  ckpt.mlp.elu_alpha = mlp.at("elu_alpha").get<double>();
  const json& mlp_arrays = mlp.at("arrays");
  ckpt.mlp.w1 = matrix_from_json(mlp_arrays.at("w1"));
  ckpt.mlp.b1 = vector_from_json(mlp_arrays.at("b1"));
  ckpt.mlp.w2 = matrix_from_json(mlp_arrays.at("w2"));
  ckpt.mlp.b2 = vector_from_json(mlp_arrays.at("b2"));
  ckpt.mlp.w3 = matrix_from_json(mlp_arrays.at("w3"));
  ckpt.mlp.b3 = vector_from_json(mlp_arrays.at("b3"));
  if (ckpt.mlp.input_dim() != dim) {
    throw std::runtime_error("checkpoint: classifier shape does not match input_dim");
  }

  const json& icnn = j.at("adversary_model");
  ckpt.icnn.elu_alpha = icnn.at("elu_alpha").get<double>();
  const std::size_t n_layers = icnn.at("num_layers").get<std::size_t>();
  const json& arrays = icnn.at("arrays");
  ckpt.icnn.layers.resize(n_layers);
  for (std::size_t i = 0; i < n_layers; ++i) {
    const std::string tag = std::to_string(i);
    if (i > 0) {
      ckpt.icnn.layers[i].wz = matrix_from_json(arrays.at("wz" + tag));
    }
    ckpt.icnn.layers[i].wx = matrix_from_json(arrays.at("wx" + tag));
    ckpt.icnn.layers[i].bias = vector_from_json(arrays.at("b" + tag));
  }
  ckpt.icnn.w_out = vector_from_json(arrays.at("w_out"));
  ckpt.icnn.w_x = vector_from_json(arrays.at("w_x"));
  ckpt.icnn.b_out = vector_from_json(arrays.at("b_out")).at(0);
  if (ckpt.icnn.input_dim() != dim) {
    throw std::runtime_error("checkpoint: adversary model shape does not match input_dim");
  }
  check_nonneg(ckpt.icnn);
  return ckpt;
}

}  // namespace padforge
