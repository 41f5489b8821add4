#include "jointdep/cli.hpp"

#include <deque>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "jointdep/config.hpp"
#include "jointdep/errors.hpp"
#include "jointdep/eval.hpp"
#include "jointdep/parallel.hpp"

namespace jointdep {

namespace {

namespace fs = std::filesystem;

// Configuration problems (exit 1).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Missing or unreadable inputs and models (exit 2).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Binding {
  CLI::Option* option;
  std::string key;
  std::string* value;
};

class FlagTable {
 public:
  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    values_.emplace_back();
    bindings_.push_back({app->add_option(flag, values_.back(), help), key, &values_.back()});
  }

  void apply(RunConfig& cfg) const {
    for (const auto& b : bindings_) {
      if (b.option->count() > 0) set_option(cfg, b.key, *b.value);
    }
  }

 private:
  std::deque<std::string> values_;
  std::vector<Binding> bindings_;
};

void require_set(const std::string& value, const std::string& flag) {
  if (value.empty()) throw UsageError(fmt::format("missing required option {}", flag));
}

void require_file(const std::string& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw DataError(fmt::format("{} not found: {}", what, path));
}

void require_dir(const std::string& path, const std::string& what) {
  if (!fs::is_directory(path)) throw DataError(fmt::format("{} not found: {}", what, path));
}

void require_parent_writable(const std::string& path) {
  const fs::path parent = fs::absolute(path).parent_path();
  if (!fs::is_directory(parent)) {
    throw DataError(fmt::format("output directory does not exist: {}", parent.string()));
  }
}

template <class Fn>
void with_report_stream(const RunConfig& cfg, std::ostream& out, Fn&& fn) {
  if (cfg.report_path.empty()) {
    fn(out);
    return;
  }
  std::ofstream file(cfg.report_path);
  if (!file) throw DataError(fmt::format("cannot write report {}", cfg.report_path));
  fn(file);
}

Corpus read_corpus(const std::string& path) {
  try {
    return read_conllu_file(path);
  } catch (const ParseError& e) {
    throw DataError(fmt::format("{}: {}", path, e.what()));
  }
}

int cmd_train(RunConfig& cfg, std::ostream& err) {
  require_set(cfg.train_path, "--train");
  require_set(cfg.out_dir, "--out");
  require_file(cfg.train_path, "training file");
  if (!cfg.rules_path.empty()) require_file(cfg.rules_path, "rules file");
  if (fs::exists(cfg.out_dir) && !fs::is_directory(cfg.out_dir)) {
    throw DataError(fmt::format("output path is not a directory: {}", cfg.out_dir));
  }

  if (!cfg.rules_path.empty()) cfg.train.rules = load_rules(cfg.rules_path);
  const Corpus full = read_corpus(cfg.train_path);
  const Corpus c = filter_corpus(full, cfg.train_max_len, cfg.count_punct_in_filter);
  if (c.N() == 0) {
    throw DataError(fmt::format("no training sentences of length <= {} in {}", cfg.train_max_len,
                                cfg.train_path));
  }
  fmt::print(err, "training on {} of {} sentences\n", c.N(), full.N());

  fs::create_directories(cfg.out_dir);
  {
    std::ofstream conf(fs::path(cfg.out_dir) / "config.txt");
    dump_config(cfg, conf);
  }
  const fs::path out(cfg.out_dir);
  const TrainState state = train(c, cfg.train, [&](const TrainState& s) {
    if (!s.metrics.empty()) {
      const auto& m = s.metrics.back();
      fmt::print(err, "iteration {}: objective {:.6f} -> {:.6f}, agreement {:.3f}\n", m.iteration,
                 m.objective_before, m.objective, m.dd_convergence);
    }
    write_checkpoint((out / fmt::format("iter_{:03d}", s.iteration)).string(), s, c);
  });
  write_checkpoint((out / "final").string(), state, c);
  return 0;
}

std::vector<DepTree> decode_all(const Corpus& c, const RunConfig& cfg,
                                const std::optional<DmvParams>& theta,
                                const std::optional<CmstModel>& m, int threads) {
  const ConstraintConfig relaxed{kUnboundedDepth, cfg.train.constraints.dep_len_beta};
  std::vector<DepTree> trees(c.sentences.size());
  parallel_for(c.N(), threads, [&](int i) {
    const Sentence& x = c.sentences[i];
    if (x.n() == 0) return;
    if (cfg.decoder == "cmst") {
      trees[i] = lmo_decode(x, *m).tree;
      return;
    }
    auto decode = [&](const ConstraintConfig& cc) {
      return cfg.decoder == "dmv" ? viterbi_decode(x, *theta, cc).tree
                                  : dd_decode(x, *theta, cc, *m, cfg.train.dd).tree;
    };
    try {
      trees[i] = decode(cfg.train.constraints);
    } catch (const InfeasibleError&) {
      try {
        trees[i] = decode(relaxed);
      } catch (const InfeasibleError&) {
        throw DataError(fmt::format("sentence {} has no tree with nonzero probability", i + 1));
      }
    }
  });
  return trees;
}

int cmd_parse(RunConfig& cfg) {
  require_set(cfg.model_dir, "--model");
  require_set(cfg.input_path, "--input");
  require_set(cfg.output_path, "--output");
  require_dir(cfg.model_dir, "model directory");
  const fs::path dir(cfg.model_dir);
  const bool need_dmv = cfg.decoder != "cmst";
  const bool need_cmst = cfg.decoder != "dmv";
  if (need_dmv) require_file((dir / "dmv.model").string(), "DMV model file");
  if (need_cmst) require_file((dir / "cmst.model").string(), "Convex-MST model file");
  require_file(cfg.input_path, "input file");
  require_parent_writable(cfg.output_path);

  std::optional<DmvParams> theta;
  std::optional<CmstModel> m;
  try {
    if (need_dmv) theta = load_dmv((dir / "dmv.model").string());
    if (need_cmst) m = load_cmst((dir / "cmst.model").string());
  } catch (const ParseError& e) {
    throw DataError(fmt::format("bad model file: {}", e.what()));
  }
  const Corpus c = read_corpus(cfg.input_path);
  const auto trees = decode_all(c, cfg, theta, m, resolve_threads(cfg.threads));
  write_conllu_file(c, trees, cfg.output_path);
  return 0;
}

int cmd_eval(RunConfig& cfg, std::ostream& out) {
  require_set(cfg.gold_path, "--gold");
  require_set(cfg.pred_path, "--pred");
  require_file(cfg.gold_path, "gold file");
  require_file(cfg.pred_path, "prediction file");
  if (!cfg.report_path.empty()) require_parent_writable(cfg.report_path);

  const Corpus gold = read_corpus(cfg.gold_path);
  const Corpus pred = read_corpus(cfg.pred_path);
  if (gold.N() != pred.N()) {
    throw DataError(fmt::format("gold has {} sentences but predictions have {}", gold.N(),
                                pred.N()));
  }
  std::vector<DepTree> trees;
  try {
    trees = gold_trees(pred);
  } catch (const ContractError& e) {
    throw DataError(fmt::format("{}: {}", cfg.pred_path, e.what()));
  }
  EvalReport report;
  try {
    report = directed_accuracy(gold, trees, cfg.eval_max_len, cfg.exclude_punct);
  } catch (const ContractError& e) {
    throw DataError(e.what());
  }
  with_report_stream(cfg, out, [&](std::ostream& os) {
    if (cfg.format == "table") {
      write_eval_table(report, os);
    } else {
      write_eval_csv(report, os);
    }
  });
  return 0;
}

int cmd_analyze(RunConfig& cfg, std::ostream& out) {
  require_set(cfg.pred_path, "--pred");
  require_file(cfg.pred_path, "prediction file");
  if (!cfg.rules_path.empty()) require_file(cfg.rules_path, "rules file");
  if (!cfg.report_path.empty()) require_parent_writable(cfg.report_path);

  const RuleSet rules = cfg.rules_path.empty() ? default_rules() : load_rules(cfg.rules_path);
  const Corpus pred = read_corpus(cfg.pred_path);
  AnalysisReport report;
  try {
    report = analyze(gold_trees(pred), pred, rules);
  } catch (const ContractError& e) {
    throw DataError(fmt::format("{}: {}", cfg.pred_path, e.what()));
  }
  with_report_stream(cfg, out, [&](std::ostream& os) {
    if (cfg.format == "table") {
      write_analysis_table(report, os);
    } else {
      write_analysis_csv(report, os);
    }
  });
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unsupervised dependency parsing with jointly trained DMV and Convex-MST models"};
  app.name("jointdep");
  app.require_subcommand(0, 1);

  std::string config_path;
  std::vector<std::string> overrides;
  bool dump = false;
  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--set", overrides, "override one setting, key=value (repeatable)");
  app.add_flag("--dump-config", dump, "print the effective configuration and exit");

  FlagTable flags;
  CLI::App* train_cmd = app.add_subcommand("train", "train models and write checkpoints");
  flags.add(train_cmd, "--mode", "mode", "dmv-only | cmst-only | dmv-init-from-cmst | joint");
  flags.add(train_cmd, "--train", "train", "training CoNLL-U file");
  flags.add(train_cmd, "--max-len", "train_max_len", "maximum training sentence length");
  flags.add(train_cmd, "--out", "out", "checkpoint directory");
  flags.add(train_cmd, "--rules", "rules", "rule file (default: built-in rules)");
  flags.add(train_cmd, "--seed", "seed", "random seed");
  flags.add(train_cmd, "--outer-iters", "outer_iters", "joint training iterations");
  flags.add(train_cmd, "--threads", "threads", "worker threads (0: hardware count)");

  CLI::App* parse_cmd = app.add_subcommand("parse", "decode a CoNLL-U file with trained models");
  flags.add(parse_cmd, "--model", "model", "model directory (a checkpoint)");
  flags.add(parse_cmd, "--input", "input", "input CoNLL-U file");
  flags.add(parse_cmd, "--output", "output", "output CoNLL-U file");
  flags.add(parse_cmd, "--decoder", "decoder", "dmv | cmst | dd");
  flags.add(parse_cmd, "--threads", "threads", "worker threads (0: hardware count)");

  CLI::App* eval_cmd = app.add_subcommand("eval", "directed dependency accuracy");
  flags.add(eval_cmd, "--gold", "gold", "gold CoNLL-U file");
  flags.add(eval_cmd, "--pred", "pred", "predicted CoNLL-U file");
  flags.add(eval_cmd, "--max-len", "eval_max_len", "maximum evaluated sentence length");
  flags.add(eval_cmd, "--report", "report", "report file (default: stdout)");
  flags.add(eval_cmd, "--format", "format", "csv | table");
  bool include_punct = false;
  eval_cmd->add_flag("--include-punct", include_punct, "score punctuation tokens too");

  CLI::App* analyze_cmd =
      app.add_subcommand("analyze", "rule satisfaction, dependency length, center embedding");
  flags.add(analyze_cmd, "--pred", "pred", "predicted CoNLL-U file");
  flags.add(analyze_cmd, "--rules", "rules", "rule file (default: built-in rules)");
  flags.add(analyze_cmd, "--report", "report", "report file (default: stdout)");
  flags.add(analyze_cmd, "--format", "format", "csv | table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    fmt::print(err, "error: {}\n\n{}", e.what(), app.help());
    return 1;
  }

  RunConfig cfg;
  try {
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ContractError(fmt::format("--set expects key=value: {}", kv));
      set_option(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    flags.apply(cfg);
    if (include_punct) cfg.exclude_punct = false;
    if (cfg.threads < 0) throw ContractError("threads must be >= 0");
    cfg.train.threads = resolve_threads(cfg.threads);
    validate(cfg.train);
    if (cfg.train_max_len < 1 || cfg.eval_max_len < 1) throw ContractError("max-len must be >= 1");
  } catch (const ContractError& e) {
    fmt::print(err, "error: {}\n\n{}", e.what(), app.help());
    return 1;
  }

  if (dump) {
    dump_config(cfg, out);
    return 0;
  }
  if (app.get_subcommands().empty()) {
    fmt::print(err, "error: a subcommand is required\n\n{}", app.help());
    return 1;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(cfg, err);
    if (parse_cmd->parsed()) return cmd_parse(cfg);
    if (eval_cmd->parsed()) return cmd_eval(cfg, out);
    return cmd_analyze(cfg, out);
  } catch (const UsageError& e) {
    fmt::print(err, "error: {}\n\n{}", e.what(), app.help());
    return 1;
  } catch (const DataError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return 2;
  } catch (const ParseError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return 2;
  } catch (const InfeasibleError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return 2;
  } catch (const ContractError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return 2;
  }
}

}  // namespace jointdep
