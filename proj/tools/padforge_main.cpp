// padforge: train and evaluate a hardened malware detector on binary
// feature vectors, attack it with an evasion suite, and run the numeric
// verification reports. Subcommands: gen-data, train, attack, eval, verify.
//
// Exit codes: 0 success, 2 configuration/usage error, 3 numeric failure,
// 4 artifact incompatibility.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "padforge/checkpoint.hpp"
#include "padforge/evaluation.hpp"
#include "padforge/experiment.hpp"
#include "padforge/theory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace padforge;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitArtifact = 4;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct DataBundle {
  Dataset full;
  Split parts;
  ManipulationSpace space;
};

DataBundle prepare_data(const ExperimentConfig& cfg) {
  DataBundle bundle;
  if (!cfg.dataset_path.empty()) {
    bundle.full = load_dataset(cfg.dataset_path);
  } else {
    bundle.full = generate_synthetic(cfg.synthetic);
  }
  bundle.parts = split_dataset(bundle.full, cfg.split);
  if (!cfg.space_path.empty()) {
    bundle.space = load_manipulation_space(cfg.space_path, bundle.full.dim);
  } else if (bundle.full.dim == drebin_mini_spec(0).dim) {
    bundle.space = drebin_mini_space();
  } else {
    throw std::invalid_argument(
        "no manipulation space given and dataset dimension does not match "
        "the stock benchmark; pass --space");
  }
  return bundle;
}

void check_dims(const Checkpoint& ckpt, const Dataset& data) {
  if (ckpt.mlp.input_dim() != data.dim) {
    throw ArtifactMismatch("checkpoint dimension " +
                           std::to_string(ckpt.mlp.input_dim()) +
                           " does not match dataset dimension " +
                           std::to_string(data.dim));
  }
}

double resolve_tau(const Checkpoint& ckpt, const DataBundle& data, double k) {
  if (ckpt.tau_set) return ckpt.tau;
  return calibrate_on_dataset(ckpt.icnn, data.parts.validation, k).tau;
}

bool defense_uses_g(const std::string& defense) {
  return defense == "pad_sma";
}

void print_metrics(const std::string& title, const MetricsReport& m) {
  std::printf("%-28s FNR %6.2f  FPR %6.2f  Acc %6.2f  bAcc %6.2f  F1 %6.2f", title.c_str(),
              m.fnr, m.fpr, m.acc, m.bacc, m.f1);
  if (m.abstained > 0) {
    std::printf("  (abstained %zu)", m.abstained);
  }
  std::printf("\n");
}

json metrics_to_json(const MetricsReport& m) {
  return json{{"fnr", m.fnr},   {"fpr", m.fpr},       {"acc", m.acc},
              {"bacc", m.bacc}, {"f1", m.f1},         {"tp", m.tp},
              {"tn", m.tn},     {"fp", m.fp},         {"fn", m.fn},
              {"abstained", m.abstained},             {"degenerate", m.degenerate}};
}

// ------------------------------------------------------------------ gen-data

int cmd_gen_data(const ExperimentConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const Dataset ds = generate_synthetic(cfg.synthetic);
  const fs::path data_path = fs::path(out_dir) / (cfg.synthetic.name + ".txt");
  save_dataset(ds, data_path);

  ManipulationSpace space;
  if (cfg.synthetic.dim == drebin_mini_spec(0).dim) {
    space = drebin_mini_space();
  } else {
    // default freedom for custom dimensions: everything addable, nothing removable
    space.addable.assign(cfg.synthetic.dim, 1);
    space.removable.assign(cfg.synthetic.dim, 0);
  }
  const fs::path space_path = fs::path(out_dir) / (cfg.synthetic.name + ".space.txt");
  save_manipulation_space(space, space_path);

  std::printf("wrote %s (%zu examples, d=%zu, %zu malware / %zu benign)\n",
              data_path.string().c_str(), ds.examples.size(), ds.dim,
              ds.count_label(1), ds.count_label(0));
  std::printf("wrote %s\n", space_path.string().c_str());
  return kExitOk;
}

// --------------------------------------------------------------------- train

int cmd_train(const ExperimentConfig& cfg, const std::string& out_path,
              const std::string& log_path) {
  const DataBundle data = prepare_data(cfg);

  const auto started = std::chrono::steady_clock::now();
  const TrainState state = train(data.parts.train, cfg.train, data.space);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  Checkpoint ckpt;
  ckpt.mlp = state.mlp;
  ckpt.icnn = state.icnn;
  ckpt.defense = defense_kind_name(cfg.train.defense);
  ckpt.tau = calibrate_on_dataset(state.icnn, data.parts.validation, cfg.eval_k).tau;
  ckpt.tau_set = true;

  fs::create_directories(fs::path(out_path).parent_path().empty()
                             ? fs::path(".")
                             : fs::path(out_path).parent_path());
  save_checkpoint(ckpt, out_path);

  {
    std::ofstream log(log_path);
    if (!log) throw std::runtime_error("cannot write training log: " + log_path);
    log << "# padforge training log: defense=" << ckpt.defense
        << " seed=" << cfg.train.seed << "\n";
    log << "# wall_time_sec=" << format_double(elapsed) << "\n";
    log << "epoch,f_clean,g_clean,f_adv,g_adv,total\n";
    for (std::size_t e = 0; e < state.history.size(); ++e) {
      const EpochLoss& l = state.history[e];
      log << (e + 1) << ',' << format_double(l.f_clean) << ','
          << format_double(l.g_clean) << ',' << format_double(l.f_adv) << ','
          << format_double(l.g_adv) << ',' << format_double(l.total) << "\n";
    }
  }

  std::printf("trained %s for %d epochs (%.1fs, %d skipped batches)\n",
              ckpt.defense.c_str(), state.epoch, elapsed, state.skipped_batches);
  std::printf("checkpoint: %s\ntau@%.1f = %s\n", out_path.c_str(), cfg.eval_k,
              format_double(ckpt.tau).c_str());
  print_metrics("clean test (classifier)", evaluate_classifier(state.mlp, data.parts.test));
  print_metrics("clean test (joint rule)",
                evaluate_joint(state.mlp, state.icnn, ckpt.tau, data.parts.test,
                               AbstainPolicy::exclude));
  return kExitOk;
}

// -------------------------------------------------------------------- attack

int cmd_attack(const ExperimentConfig& cfg, const std::string& ckpt_path,
               const AttackConfig& attack, const std::string& out_path,
               int threads) {
  const DataBundle data = prepare_data(cfg);
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  check_dims(ckpt, data.full);

  const double tau = resolve_tau(ckpt, data, cfg.eval_k);
  const bool use_g = defense_uses_g(ckpt.defense);
  DetectorPair det{&ckpt.mlp, use_g ? &ckpt.icnn : nullptr, tau};

  const std::vector<FeatureVector> malware = dense_rows(data.parts.test, 1);
  const std::vector<FeatureVector> benign_pool = dense_rows(data.parts.train, 0);
  if (malware.empty()) {
    throw std::invalid_argument("test split has no malware rows to attack");
  }

  const auto outcomes =
      attack_sweep(det, attack, malware, data.space, &benign_pool, threads);

  std::size_t detected = 0;
  fs::create_directories(fs::path(out_path).parent_path().empty()
                             ? fs::path(".")
                             : fs::path(out_path).parent_path());
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write attack report: " + out_path);
  for (const AttackOutcome& o : outcomes) {
    if (o.detected) ++detected;
    const json line = {
        {"index", o.index},
        {"family", attack_family_name(attack.family)},
        {"mode", attack.mode == AttackMode::adaptive ? "adaptive" : "oblivious"},
        {"evaded_f", o.result.evaded_f},
        {"evaded_g", o.result.evaded_g},
        {"chosen_lambda", o.result.chosen_lambda},
        {"J_final", o.result.j_final},
        {"flips_added", o.result.flips_added},
        {"flips_removed", o.result.flips_removed},
    };
    out << line.dump() << "\n";
  }
  const double robust =
      100.0 * static_cast<double>(detected) / static_cast<double>(outcomes.size());
  const json summary = {{"summary", true},
                        {"family", attack_family_name(attack.family)},
                        {"examples", outcomes.size()},
                        {"detected", detected},
                        {"robust_accuracy", robust}};
  out << summary.dump() << "\n";

  std::printf("%s (%s) on %s: robust accuracy %.2f%% over %zu malware\n",
              attack_family_name(attack.family),
              attack.mode == AttackMode::adaptive ? "adaptive" : "oblivious",
              ckpt.defense.c_str(), robust, outcomes.size());
  std::printf("report: %s\n", out_path.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------- eval

int cmd_eval(const ExperimentConfig& cfg, const std::vector<std::string>& ckpt_paths,
             AttackMode mode, const std::string& out_dir, int threads) {
  const DataBundle data = prepare_data(cfg);
  fs::create_directories(out_dir);

  const std::vector<FeatureVector> malware = dense_rows(data.parts.test, 1);
  const std::vector<FeatureVector> benign_pool = dense_rows(data.parts.train, 0);
  const auto suite = default_attack_suite(mode);

  json clean_report = json::object();
  json grid;
  grid["mode"] = mode == AttackMode::adaptive ? "adaptive" : "oblivious";
  grid["rows"] = json::array();
  grid["columns"] = json::array();
  std::vector<std::vector<std::string>> table(
      suite.size(), std::vector<std::string>(ckpt_paths.size(), "-"));

  for (const auto& [name, acfg] : suite) grid["rows"].push_back(name);

  std::vector<std::string> column_names;
  for (std::size_t c = 0; c < ckpt_paths.size(); ++c) {
    const Checkpoint ckpt = load_checkpoint(ckpt_paths[c]);
    check_dims(ckpt, data.full);
    const std::string column = fs::path(ckpt_paths[c]).stem().string();
    column_names.push_back(column);
    grid["columns"].push_back(column);

    const double tau = resolve_tau(ckpt, data, cfg.eval_k);
    const bool use_g = defense_uses_g(ckpt.defense);
    DetectorPair det{&ckpt.mlp, use_g ? &ckpt.icnn : nullptr, tau};

    json clean;
    clean["defense"] = ckpt.defense;
    clean["tau"] = tau;
    clean["classifier"] = metrics_to_json(evaluate_classifier(ckpt.mlp, data.parts.test));
    clean["joint"] = metrics_to_json(evaluate_joint(
        ckpt.mlp, ckpt.icnn, tau, data.parts.test, AbstainPolicy::exclude));
    clean_report[column] = clean;

    for (std::size_t r = 0; r < suite.size(); ++r) {
      const auto& [name, acfg] = suite[r];
      const bool orth = name.rfind("orth", 0) == 0;
      if (orth && !det.has_g()) continue;  // not applicable without g
      const double robust =
          robust_accuracy(det, acfg, malware, data.space, &benign_pool, threads);
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.2f", robust);
      table[r][c] = buf;
    }
  }

  json cells = json::array();
  for (std::size_t r = 0; r < suite.size(); ++r) {
    json row = json::array();
    for (const std::string& cell : table[r]) row.push_back(cell);
    cells.push_back(row);
  }
  grid["robust_accuracy"] = cells;

  {
    std::ofstream out(fs::path(out_dir) / "eval_clean.json");
    out << clean_report.dump(2) << "\n";
  }
  {
    std::ofstream out(fs::path(out_dir) / "eval_grid.json");
    out << grid.dump(2) << "\n";
  }
  {
    std::ofstream out(fs::path(out_dir) / "eval_grid.csv");
    out << "attack";
    for (const std::string& c : column_names) out << ',' << c;
    out << "\n";
    for (std::size_t r = 0; r < suite.size(); ++r) {
      out << suite[r].first;
      for (const std::string& cell : table[r]) out << ',' << cell;
      out << "\n";
    }
  }

  std::printf("%-14s", "attack");
  for (const std::string& c : column_names) std::printf(" %12s", c.c_str());
  std::printf("\n");
  for (std::size_t r = 0; r < suite.size(); ++r) {
    std::printf("%-14s", suite[r].first.c_str());
    for (const std::string& cell : table[r]) std::printf(" %12s", cell.c_str());
    std::printf("\n");
  }
  std::printf("reports under %s\n", out_dir.c_str());
  return kExitOk;
}

// -------------------------------------------------------------------- verify

int cmd_verify(const ExperimentConfig& cfg, const std::string& ckpt_path,
               const std::vector<std::string>& checks, double lambda,
               std::size_t pairs, int instances, int t1_bits,
               const std::string& out_dir) {
  const DataBundle data = prepare_data(cfg);
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  check_dims(ckpt, data.full);
  fs::create_directories(out_dir);

  auto enabled = [&](const char* name) {
    for (const std::string& c : checks) {
      if (c == "all" || c == name) return true;
    }
    return false;
  };

  if (data.full.dim > 512 && (enabled("hessian"))) {
    throw std::invalid_argument(
        "input dimension exceeds the eigen-decomposition cap (512); "
        "reduce d or skip the hessian check");
  }

  Rng rng(cfg.seed);

  if (enabled("hessian")) {
    // averaged sorted spectrum over test instances, against the classifier
    // alone (lambda = 0) and against the joint criterion
    const Dataset& test = data.parts.test;
    Vector avg_joint(data.full.dim, 0.0), avg_f_only(data.full.dim, 0.0);
    int used = 0;
    for (std::size_t i = 0; i < test.examples.size() && used < instances; ++i) {
      if (test.examples[i].label != 1) continue;
      Vector x(data.full.dim);
      const FeatureVector bits = test.dense(i);
      for (std::size_t k = 0; k < x.size(); ++k) x[k] = static_cast<double>(bits[k]);
      const ConcavityReport joint = hessian_spectrum(ckpt.mlp, ckpt.icnn, x, lambda, 1e-3);
      const ConcavityReport f_only = hessian_spectrum(ckpt.mlp, ckpt.icnn, x, 0.0, 1e-3);
      for (std::size_t k = 0; k < x.size(); ++k) {
        avg_joint[k] += joint.eigenvalues[k];
        avg_f_only[k] += f_only.eigenvalues[k];
      }
      ++used;
    }
    if (used == 0) throw std::invalid_argument("no malware instances for the hessian check");
    for (std::size_t k = 0; k < avg_joint.size(); ++k) {
      avg_joint[k] /= used;
      avg_f_only[k] /= used;
    }
    json out = {{"lambda", lambda},
                {"instances", used},
                {"avg_sorted_eigenvalues_joint", avg_joint},
                {"avg_sorted_eigenvalues_classifier_only", avg_f_only},
                {"min_eigenvalue_joint", avg_joint.front()},
                {"max_eigenvalue_joint", avg_joint.back()},
                {"min_eigenvalue_classifier_only", avg_f_only.front()},
                {"max_eigenvalue_classifier_only", avg_f_only.back()}};
    std::ofstream f(fs::path(out_dir) / "verify_hessian.json");
    f << out.dump(2) << "\n";
    std::printf("hessian: joint spectrum [%g, %g], classifier-only [%g, %g] (%d instances)\n",
                avg_joint.front(), avg_joint.back(), avg_f_only.front(),
                avg_f_only.back(), used);
  }

  if (enabled("constants")) {
    Rng sub = rng.split(1);
    const SmoothnessEstimate est = estimate_constants(ckpt.mlp, ckpt.icnn, pairs, sub);
    json out = {{"l_xx_f", est.l_xx_f},
                {"l_xx_g", est.l_xx_g},
                {"m_xx_g", est.m_xx_g},
                {"samples", est.samples}};
    std::ofstream f(fs::path(out_dir) / "verify_constants.json");
    f << out.dump(2) << "\n";
    std::printf("constants: L_f=%g L_g=%g M_g=%g (%zu pairs)\n", est.l_xx_f,
                est.l_xx_g, est.m_xx_g, est.samples);
  }

  if (enabled("theorem1")) {
    // reduce the manipulation space so the vertex enumeration stays exact
    ManipulationSpace reduced;
    reduced.addable.assign(data.full.dim, 0);
    reduced.removable.assign(data.full.dim, 0);
    int kept = 0;
    for (std::size_t i = 0; i < data.full.dim && kept < t1_bits; ++i) {
      if (data.space.addable[i] || data.space.removable[i]) {
        reduced.addable[i] = data.space.addable[i];
        reduced.removable[i] = data.space.removable[i];
        ++kept;
      }
    }
    Rng sub = rng.split(2);
    const SmoothnessEstimate est = estimate_constants(ckpt.mlp, ckpt.icnn, pairs, sub);
    const std::vector<int> t_list = {1, 5, 10, 25};
    json reports = json::array();
    int used = 0;
    for (std::size_t i = 0; i < data.parts.test.examples.size() && used < instances; ++i) {
      if (data.parts.test.examples[i].label != 1) continue;
      const FeatureVector bits = data.parts.test.dense(i);
      const Theorem1Report rep =
          theorem1_check(ckpt.mlp, ckpt.icnn, bits, reduced, lambda, t_list, est);
      json entries = json::array();
      for (const Theorem1Entry& e : rep.entries) {
        entries.push_back({{"steps", e.steps},
                           {"ratio", e.ratio},
                           {"bound", e.bound},
                           {"within_bound", e.within_bound}});
      }
      reports.push_back({{"applicable", rep.applicable},
                         {"j_start", rep.j_start},
                         {"j_opt", rep.j_opt},
                         {"entries", entries}});
      ++used;
    }
    json out = {{"lambda", lambda},
                {"constants", {{"l_xx_f", est.l_xx_f}, {"l_xx_g", est.l_xx_g}, {"m_xx_g", est.m_xx_g}}},
                {"instances", reports}};
    std::ofstream f(fs::path(out_dir) / "verify_theorem1.json");
    f << out.dump(2) << "\n";
    std::printf("theorem1: %d instances written (premise %s at lambda=%g)\n", used,
                lambda * est.m_xx_g > est.l_xx_f ? "holds" : "fails", lambda);
  }

  if (enabled("quadbound")) {
    Rng sub = rng.split(3);
    const QuadBoundReport rep =
        quadratic_bound_check(ckpt.mlp, ckpt.icnn, pairs, lambda, sub);
    json out = {{"applicable", rep.applicable}, {"lambda", rep.lambda},
                {"l_f", rep.l_f},               {"l_g", rep.l_g},
                {"m_g", rep.m_g},               {"pairs", rep.pairs},
                {"violations", rep.violations}, {"worst_margin", rep.worst_margin}};
    std::ofstream f(fs::path(out_dir) / "verify_quadbound.json");
    f << out.dump(2) << "\n";
    std::printf("quadbound: %s, %zu violations over %zu pairs\n",
                rep.applicable ? "applicable" : "premise fails", rep.violations,
                rep.pairs);
  }

  if (enabled("convergence")) {
    TrainConfig conv_cfg = cfg.train;
    conv_cfg.optimizer = OptimizerKind::sgd;
    const ConvergenceReport rep =
        convergence_trace(data.parts.train, conv_cfg, data.space);
    json out = {{"grad_norms", rep.grad_norms},
                {"running_mean", rep.running_mean},
                {"c1", rep.c1},
                {"c2", rep.c2},
                {"window_monotone", rep.window_monotone}};
    std::ofstream f(fs::path(out_dir) / "verify_convergence.json");
    f << out.dump(2) << "\n";
    std::printf("convergence: fitted floor c2=%g, window-monotone=%s\n", rep.c2,
                rep.window_monotone ? "yes" : "no");
  }

  std::printf("verification reports under %s\n", out_dir.c_str());
  return kExitOk;
}

NormP parse_norm(const std::string& name) {
  if (name == "1" || name == "l1") return NormP::l1;
  if (name == "2" || name == "l2") return NormP::l2;
  if (name == "inf" || name == "linf") return NormP::linf;
  throw std::invalid_argument("unknown norm '" + name + "' (use 1, 2, or inf)");
}

}  // namespace

int main(int argc, char** argv) {
  // Phase one: locate --config so file values become flag defaults.
  ExperimentConfig cfg;
  try {
    for (int i = 1; i + 1 < argc; ++i) {
      if (std::string(argv[i]) == "--config") {
        cfg = load_experiment_file(argv[i + 1]);
        break;
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }

  CLI::App app{"robust-malware-detection laboratory"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "experiment config file (JSON)");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset and its manipulation space");
  std::string gen_out = "data";
  gen->add_option("--out-dir", gen_out, "output directory");
  std::uint64_t gen_seed = cfg.synthetic.seed;
  gen->add_option("--seed", gen_seed, "generator seed");

  // train
  auto* tr = app.add_subcommand("train", "train a defense and write a checkpoint");
  std::string tr_data = cfg.dataset_path, tr_space = cfg.space_path;
  tr->add_option("--data", tr_data, "dataset file (default: built-in synthetic)");
  tr->add_option("--space", tr_space, "manipulation space file");
  std::string tr_defense = defense_kind_name(cfg.train.defense);
  tr->add_option("--defense", tr_defense, "dnn | at-rfgsm | at-maxma | pad-sma");
  int tr_epochs = cfg.train.epochs, tr_batch = cfg.train.batch;
  tr->add_option("--epochs", tr_epochs, "training epochs");
  tr->add_option("--batch", tr_batch, "mini-batch size");
  double tr_lr = cfg.train.learning_rate;
  tr->add_option("--lr", tr_lr, "learning rate");
  std::string tr_opt = cfg.train.optimizer == OptimizerKind::adam ? "adam" : "sgd";
  tr->add_option("--optimizer", tr_opt, "adam | sgd");
  double tr_beta1 = cfg.train.beta1, tr_beta2 = cfg.train.beta2, tr_lambda = cfg.train.lambda;
  auto* beta1_opt = tr->add_option("--beta1", tr_beta1, "adversarial classification weight");
  tr->add_option("--beta2", tr_beta2, "adversarial score weight");
  tr->add_option("--lambda", tr_lambda, "penalty factor for the inner search");
  int tr_inner = cfg.train.inner_steps;
  tr->add_option("--inner-steps", tr_inner, "inner attack iterations");
  std::size_t tr_hidden = cfg.train.mlp_hidden;
  tr->add_option("--hidden", tr_hidden, "classifier hidden width");
  std::vector<std::size_t> tr_icnn_hidden = cfg.train.icnn_hidden;
  tr->add_option("--icnn-hidden", tr_icnn_hidden, "convex net hidden widths");
  std::uint64_t tr_seed = cfg.train.seed, tr_split_seed = cfg.split.seed;
  tr->add_option("--seed", tr_seed, "training seed");
  tr->add_option("--split-seed", tr_split_seed, "dataset split seed");
  double tr_k = cfg.eval_k;
  tr->add_option("--k", tr_k, "validation outlier percentage for tau");
  std::string tr_out, tr_log;
  tr->add_option("--out", tr_out, "checkpoint path");
  tr->add_option("--log", tr_log, "training log (CSV) path");

  // attack
  auto* at = app.add_subcommand("attack", "attack test-split malware with one family");
  std::string at_ckpt;
  at->add_option("--checkpoint", at_ckpt, "model checkpoint")->required();
  std::string at_data = cfg.dataset_path, at_space = cfg.space_path;
  at->add_option("--data", at_data, "dataset file (default: built-in synthetic)");
  at->add_option("--space", at_space, "manipulation space file");
  std::string at_family = "pgd", at_norm = "2", at_mode = "oblivious";
  at->add_option("--attack", at_family, "attack family");
  at->add_option("--p", at_norm, "norm: 1 | 2 | inf");
  at->add_option("--mode", at_mode, "oblivious | adaptive");
  int at_steps = 100, at_nben = 10, at_repeats = 5;
  at->add_option("--steps", at_steps, "iterations");
  at->add_option("--n-ben", at_nben, "mimicry guide count");
  at->add_option("--repeats", at_repeats, "iterated-max rounds");
  double at_lambda = 1.0;
  at->add_option("--lambda", at_lambda, "penalty factor (fixed-lambda runs)");
  double at_a1 = 1.0, at_a2 = 0.5, at_ainf = 0.02;
  at->add_option("--alpha1", at_a1, "l1 step size");
  at->add_option("--alpha2", at_a2, "l2 step size");
  at->add_option("--alpha-inf", at_ainf, "linf step size");
  bool at_addition_only = false;
  at->add_flag("--addition-only", at_addition_only, "forbid feature removal");
  std::uint64_t at_seed = cfg.seed, at_split_seed = cfg.split.seed;
  at->add_option("--seed", at_seed, "attack seed");
  at->add_option("--split-seed", at_split_seed, "dataset split seed");
  double at_k = cfg.eval_k;
  at->add_option("--k", at_k, "tau percentage when checkpoint has none");
  int at_threads = cfg.threads;
  at->add_option("--threads", at_threads, "worker threads (0 = all)");
  std::string at_out;
  at->add_option("--out", at_out, "report path (JSON lines)");

  // eval
  auto* ev = app.add_subcommand("eval", "clean metrics plus the attack-grid matrix");
  std::vector<std::string> ev_ckpts;
  ev->add_option("--checkpoint", ev_ckpts, "checkpoints (repeatable)")->required();
  std::string ev_data = cfg.dataset_path, ev_space = cfg.space_path;
  ev->add_option("--data", ev_data, "dataset file (default: built-in synthetic)");
  ev->add_option("--space", ev_space, "manipulation space file");
  std::string ev_mode = "adaptive";
  ev->add_option("--mode", ev_mode, "oblivious | adaptive");
  double ev_k = cfg.eval_k;
  ev->add_option("--k", ev_k, "validation outlier percentage for tau");
  std::uint64_t ev_split_seed = cfg.split.seed;
  ev->add_option("--split-seed", ev_split_seed, "dataset split seed");
  int ev_threads = cfg.threads;
  ev->add_option("--threads", ev_threads, "worker threads (0 = all)");
  std::string ev_out = cfg.output_dir;
  ev->add_option("--out-dir", ev_out, "output directory");

  // verify
  auto* vf = app.add_subcommand("verify", "numeric verification reports");
  std::string vf_ckpt;
  vf->add_option("--checkpoint", vf_ckpt, "model checkpoint")->required();
  std::string vf_data = cfg.dataset_path, vf_space = cfg.space_path;
  vf->add_option("--data", vf_data, "dataset file (default: built-in synthetic)");
  vf->add_option("--space", vf_space, "manipulation space file");
  std::vector<std::string> vf_checks = {"all"};
  vf->add_option("--check", vf_checks,
                 "hessian | constants | theorem1 | quadbound | convergence | all");
  double vf_lambda = 1.0;
  vf->add_option("--lambda", vf_lambda, "penalty factor");
  std::size_t vf_pairs = 1000;
  vf->add_option("--pairs", vf_pairs, "sampled pairs for constants/bounds");
  int vf_instances = 20;
  vf->add_option("--instances", vf_instances, "instances for spectrum/bound checks");
  int vf_t1_bits = 10;
  vf->add_option("--t1-bits", vf_t1_bits, "modifiable bits kept for the exhaustive check");
  std::uint64_t vf_split_seed = cfg.split.seed, vf_seed = cfg.seed;
  vf->add_option("--split-seed", vf_split_seed, "dataset split seed");
  vf->add_option("--seed", vf_seed, "sampling seed");
  std::string vf_out = cfg.output_dir;
  vf->add_option("--out-dir", vf_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) {
      cfg.synthetic.seed = gen_seed;
      return cmd_gen_data(cfg, gen_out);
    }
    if (tr->parsed()) {
      cfg.dataset_path = tr_data;
      cfg.space_path = tr_space;
      if (!parse_defense_kind(tr_defense, cfg.train.defense)) {
        throw std::invalid_argument("unknown defense '" + tr_defense + "'");
      }
      if (beta1_opt->count() == 0 && config_path.empty()) {
        tr_beta1 = default_beta1(cfg.train.defense);
      }
      cfg.train.epochs = tr_epochs;
      cfg.train.batch = tr_batch;
      cfg.train.learning_rate = tr_lr;
      if (tr_opt == "adam") cfg.train.optimizer = OptimizerKind::adam;
      else if (tr_opt == "sgd") cfg.train.optimizer = OptimizerKind::sgd;
      else throw std::invalid_argument("unknown optimizer '" + tr_opt + "'");
      cfg.train.beta1 = tr_beta1;
      cfg.train.beta2 = tr_beta2;
      cfg.train.lambda = tr_lambda;
      cfg.train.inner_steps = tr_inner;
      cfg.train.mlp_hidden = tr_hidden;
      cfg.train.icnn_hidden = tr_icnn_hidden;
      cfg.train.seed = tr_seed;
      cfg.split.seed = tr_split_seed;
      cfg.eval_k = tr_k;
      cfg.train.validate();
      const std::string defense = defense_kind_name(cfg.train.defense);
      if (tr_out.empty()) tr_out = cfg.output_dir + "/" + defense + ".ckpt.json";
      if (tr_log.empty()) tr_log = cfg.output_dir + "/" + defense + ".train.csv";
      fs::create_directories(cfg.output_dir);
      return cmd_train(cfg, tr_out, tr_log);
    }
    if (at->parsed()) {
      cfg.dataset_path = at_data;
      cfg.space_path = at_space;
      cfg.split.seed = at_split_seed;
      cfg.eval_k = at_k;
      AttackConfig attack;
      if (!parse_attack_family(at_family, attack.family)) {
        throw std::invalid_argument("unknown attack family '" + at_family + "'");
      }
      attack.norm = parse_norm(at_norm);
      if (at_mode == "oblivious") attack.mode = AttackMode::oblivious;
      else if (at_mode == "adaptive") attack.mode = AttackMode::adaptive;
      else throw std::invalid_argument("unknown mode '" + at_mode + "'");
      attack.steps = at_steps;
      attack.n_ben = at_nben;
      attack.repeats = at_repeats;
      attack.lambda = at_lambda;
      attack.alpha_1 = at_a1;
      attack.alpha_2 = at_a2;
      attack.alpha_inf = at_ainf;
      attack.addition_only = at_addition_only;
      attack.seed = at_seed;
      attack.validate();
      if (at_out.empty()) {
        at_out = cfg.output_dir + "/attack_" + at_family + ".jsonl";
      }
      return cmd_attack(cfg, at_ckpt, attack, at_out, resolve_threads(at_threads));
    }
    if (ev->parsed()) {
      cfg.dataset_path = ev_data;
      cfg.space_path = ev_space;
      cfg.split.seed = ev_split_seed;
      cfg.eval_k = ev_k;
      AttackMode mode;
      if (ev_mode == "oblivious") mode = AttackMode::oblivious;
      else if (ev_mode == "adaptive") mode = AttackMode::adaptive;
      else throw std::invalid_argument("unknown mode '" + ev_mode + "'");
      return cmd_eval(cfg, ev_ckpts, mode, ev_out, resolve_threads(ev_threads));
    }
    if (vf->parsed()) {
      cfg.dataset_path = vf_data;
      cfg.space_path = vf_space;
      cfg.split.seed = vf_split_seed;
      cfg.seed = vf_seed;
      for (const std::string& c : vf_checks) {
        if (c != "all" && c != "hessian" && c != "constants" && c != "theorem1" &&
            c != "quadbound" && c != "convergence") {
          throw std::invalid_argument("unknown check '" + c + "'");
        }
      }
      return cmd_verify(cfg, vf_ckpt, vf_checks, vf_lambda, vf_pairs, vf_instances,
                        vf_t1_bits, vf_out);
    }
  } catch (const ArtifactMismatch& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitArtifact;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitOk;
}
