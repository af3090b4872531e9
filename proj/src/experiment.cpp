#include "padforge/experiment.hpp"

#include <cstdlib>
#include <fstream>
#include <thread>

#include <json.hpp>

namespace padforge {

namespace {

using nlohmann::json;

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
  throw std::invalid_argument("config field '" + field + "': " + why);
}

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        ok = true;
        break;
      }
    }
    if (!ok) bad_field(where + "." + item.key(), "unknown key");
  }
}

Vector prob_vector(const json& j, const std::string& field, std::size_t dim) {
  Vector v = j.get<Vector>();
  if (v.size() != dim) bad_field(field, "length must equal d");
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] >= 0.0 && v[i] <= 1.0)) {
      bad_field(field + "[" + std::to_string(i) + "]",
                "probability outside [0,1]");
    }
  }
  return v;
}

void parse_synthetic(const json& j, SyntheticSpec& spec) {
  check_keys(j, "dataset.synthetic",
             {"d", "n_benign", "n_malware", "p_benign", "p_malware", "seed", "name"});
  if (j.contains("d")) spec.dim = j.at("d").get<std::size_t>();
  if (spec.dim == 0) bad_field("dataset.synthetic.d", "must be positive");
  if (j.contains("name")) spec.name = j.at("name").get<std::string>();
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("n_benign")) spec.n_benign = j.at("n_benign").get<std::size_t>();
  if (j.contains("n_malware")) spec.n_malware = j.at("n_malware").get<std::size_t>();
  if (j.contains("p_benign")) {
    spec.p_benign = prob_vector(j.at("p_benign"), "dataset.synthetic.p_benign", spec.dim);
  } else if (spec.p_benign.size() != spec.dim) {
    bad_field("dataset.synthetic.p_benign", "required when d differs from the default");
  }
  if (j.contains("p_malware")) {
    spec.p_malware = prob_vector(j.at("p_malware"), "dataset.synthetic.p_malware", spec.dim);
  } else if (spec.p_malware.size() != spec.dim) {
    bad_field("dataset.synthetic.p_malware", "required when d differs from the default");
  }
}

void parse_train(const json& j, TrainConfig& cfg) {
  check_keys(j, "train",
             {"defense", "epochs", "batch", "learning_rate", "optimizer", "beta1",
              "beta2", "lambda", "inner_steps", "alpha_1", "alpha_2", "alpha_inf",
              "mlp_hidden", "icnn_hidden", "rfgsm_random_round", "seed"});
  bool beta1_given = j.contains("beta1");
  if (j.contains("defense")) {
    const std::string name = j.at("defense").get<std::string>();
    if (!parse_defense_kind(name, cfg.defense)) {
      bad_field("train.defense", "unknown defense '" + name + "'");
    }
  }
  cfg.beta1 = beta1_given ? j.at("beta1").get<double>() : default_beta1(cfg.defense);
  if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<int>();
  if (j.contains("batch")) cfg.batch = j.at("batch").get<int>();
  if (j.contains("learning_rate")) cfg.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("optimizer")) {
    const std::string name = j.at("optimizer").get<std::string>();
    if (name == "sgd") cfg.optimizer = OptimizerKind::sgd;
    else if (name == "adam") cfg.optimizer = OptimizerKind::adam;
    else bad_field("train.optimizer", "must be 'sgd' or 'adam'");
  }
  if (j.contains("beta2")) cfg.beta2 = j.at("beta2").get<double>();
  if (j.contains("lambda")) cfg.lambda = j.at("lambda").get<double>();
  if (j.contains("inner_steps")) cfg.inner_steps = j.at("inner_steps").get<int>();
  if (j.contains("alpha_1")) cfg.alpha_1 = j.at("alpha_1").get<double>();
  if (j.contains("alpha_2")) cfg.alpha_2 = j.at("alpha_2").get<double>();
  if (j.contains("alpha_inf")) cfg.alpha_inf = j.at("alpha_inf").get<double>();
  if (j.contains("mlp_hidden")) cfg.mlp_hidden = j.at("mlp_hidden").get<std::size_t>();
  if (j.contains("icnn_hidden")) {
    cfg.icnn_hidden = j.at("icnn_hidden").get<std::vector<std::size_t>>();
  }
  if (j.contains("rfgsm_random_round")) {
    cfg.rfgsm_random_round = j.at("rfgsm_random_round").get<bool>();
  }
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    bad_field("train", e.what());
  }
}

}  // namespace

ExperimentConfig default_experiment() {
  return ExperimentConfig{};
}

ExperimentConfig load_experiment_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("cannot open config file: " + path.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config parse error: " + std::string(e.what()));
  }

  ExperimentConfig cfg = default_experiment();
  check_keys(j, "<root>",
             {"seed", "threads", "output_dir", "dataset", "space", "split",
              "train", "eval"});
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
  if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();

  if (j.contains("dataset")) {
    const json& ds = j.at("dataset");
    check_keys(ds, "dataset", {"path", "synthetic"});
    if (ds.contains("path") && ds.contains("synthetic")) {
      bad_field("dataset", "give either a path or a synthetic spec, not both");
    }
    if (ds.contains("path")) {
      cfg.dataset_path = ds.at("path").get<std::string>();
    } else if (ds.contains("synthetic")) {
      parse_synthetic(ds.at("synthetic"), cfg.synthetic);
    }
  }
  if (j.contains("space")) {
    check_keys(j.at("space"), "space", {"path"});
    if (j.at("space").contains("path")) {
      cfg.space_path = j.at("space").at("path").get<std::string>();
    }
  }
  if (j.contains("split")) {
    const json& sp = j.at("split");
    check_keys(sp, "split", {"train", "validation", "test", "seed"});
    if (sp.contains("train")) cfg.split.train = sp.at("train").get<double>();
    if (sp.contains("validation")) cfg.split.validation = sp.at("validation").get<double>();
    if (sp.contains("test")) cfg.split.test = sp.at("test").get<double>();
    if (sp.contains("seed")) cfg.split.seed = sp.at("seed").get<std::uint64_t>();
  }
  if (j.contains("train")) {
    parse_train(j.at("train"), cfg.train);
  }
  if (j.contains("eval")) {
    const json& ev = j.at("eval");
    check_keys(ev, "eval", {"k"});
    if (ev.contains("k")) cfg.eval_k = ev.at("k").get<double>();
    if (cfg.eval_k < 0.0 || cfg.eval_k >= 100.0) {
      bad_field("eval.k", "must lie in [0, 100)");
    }
  }
  return cfg;
}

std::vector<std::pair<std::string, AttackConfig>> default_attack_suite(
    AttackMode mode) {
  std::vector<std::pair<std::string, AttackConfig>> suite;
  auto push = [&](const std::string& name, AttackFamily family, NormP norm,
                  bool addition_only) {
    AttackConfig cfg;
    cfg.family = family;
    cfg.norm = norm;
    cfg.steps = 100;
    cfg.mode = mode;
    cfg.addition_only = addition_only;
    suite.emplace_back(name, cfg);
  };
  push("grosse", AttackFamily::grosse, NormP::l1, true);
  push("bca", AttackFamily::bca, NormP::l1, true);
  push("bga", AttackFamily::bga, NormP::l1, true);
  push("rfgsm", AttackFamily::rfgsm, NormP::linf, true);
  push("pgd_l1", AttackFamily::pgd, NormP::l1, false);
  push("pgd_l2", AttackFamily::pgd, NormP::l2, false);
  push("pgd_linf", AttackFamily::pgd, NormP::linf, false);
  push("mimicry_x10", AttackFamily::mimicry, NormP::l2, false);
  push("maxma", AttackFamily::maxma, NormP::l2, false);
  push("imaxma", AttackFamily::imaxma, NormP::l2, false);
  push("sma", AttackFamily::sma, NormP::l2, false);
  if (mode == AttackMode::adaptive) {
    push("orth_pgd_l1", AttackFamily::orth_pgd, NormP::l1, false);
    push("orth_pgd_l2", AttackFamily::orth_pgd, NormP::l2, false);
    push("orth_pgd_linf", AttackFamily::orth_pgd, NormP::linf, false);
    push("orth_maxma", AttackFamily::orth_maxma, NormP::l2, false);
    push("orth_imaxma", AttackFamily::orth_imaxma, NormP::l2, false);
  }
  return suite;
}

int resolve_threads(int requested) {
  if (const char* env = std::getenv("PAD_FORGE_THREADS")) {
    char* end = nullptr;
    const long value = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && value > 0) {
      return static_cast<int>(value);
    }
  }
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

double default_beta1(DefenseKind kind) {
  switch (kind) {
    case DefenseKind::dnn: return 0.0;
    case DefenseKind::at_rfgsm: return 0.01;
    case DefenseKind::at_maxma: return 0.01;
    case DefenseKind::pad_sma: return 0.1;
  }
  return 0.1;
}

}  // namespace padforge
