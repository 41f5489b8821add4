#include "jointdep/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "jointdep/errors.hpp"
#include "jointdep/parallel.hpp"

namespace jointdep {

namespace {

struct Entry {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string bad_value(const std::string& key, const std::string& value) {
  return fmt::format("invalid value '{}' for {}", value, key);
}

int parse_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ContractError(bad_value(key, v));
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ContractError(bad_value(key, v));
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) throw ContractError(bad_value(key, v));
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ContractError(bad_value(key, v));
}

template <class Acc>
Entry int_entry(std::string key, Acc acc) {
  return {key, [acc, key](RunConfig& c, const std::string& v) { acc(c) = parse_int(key, v); },
          [acc](const RunConfig& c) { return fmt::format("{}", acc(const_cast<RunConfig&>(c))); }};
}

template <class Acc>
Entry double_entry(std::string key, Acc acc) {
  return {key, [acc, key](RunConfig& c, const std::string& v) { acc(c) = parse_double(key, v); },
          [acc](const RunConfig& c) { return fmt::format("{}", acc(const_cast<RunConfig&>(c))); }};
}

template <class Acc>
Entry bool_entry(std::string key, Acc acc) {
  return {key, [acc, key](RunConfig& c, const std::string& v) { acc(c) = parse_bool(key, v); },
          [acc](const RunConfig& c) {
            return std::string(acc(const_cast<RunConfig&>(c)) ? "true" : "false");
          }};
}

template <class Acc>
Entry string_entry(std::string key, Acc acc) {
  return {key, [acc](RunConfig& c, const std::string& v) { acc(c) = v; },
          [acc](const RunConfig& c) { return acc(const_cast<RunConfig&>(c)); }};
}

// Enumerations stored as their names.
template <class E, class Acc>
Entry enum_entry(std::string key, Acc acc, std::vector<std::pair<std::string, E>> names) {
  return {key,
          [acc, key, names](RunConfig& c, const std::string& v) {
            for (const auto& [name, e] : names) {
              if (name == v) {
                acc(c) = e;
                return;
              }
            }
            throw ContractError(bad_value(key, v));
          },
          [acc, names](const RunConfig& c) {
            const E cur = acc(const_cast<RunConfig&>(c));
            for (const auto& [name, e] : names) {
              if (e == cur) return name;
            }
            return std::string("?");
          }};
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t;
    t.push_back(enum_entry<TrainMode>("mode", [](RunConfig& c) -> TrainMode& { return c.train.mode; },
                                      {{"dmv-only", TrainMode::kDmvOnly},
                                       {"cmst-only", TrainMode::kCmstOnly},
                                       {"dmv-init-from-cmst", TrainMode::kDmvInitFromCmst},
                                       {"joint", TrainMode::kJoint}}));
    t.push_back(int_entry("outer_iters", [](RunConfig& c) -> int& { return c.train.outer_iters; }));
    t.push_back(int_entry("extra_separate_iters",
                          [](RunConfig& c) -> int& { return c.train.extra_separate_iters; }));
    t.push_back(int_entry("em_pretrain_iters",
                          [](RunConfig& c) -> int& { return c.train.em_pretrain_iters; }));
    t.push_back(enum_entry<InitMode>("dmv_init",
                                     [](RunConfig& c) -> InitMode& { return c.train.dmv_init; },
                                     {{"uniform", InitMode::kUniform},
                                      {"harmonic", InitMode::kHarmonic}}));
    t.push_back({"seed",
                 [](RunConfig& c, const std::string& v) { c.train.seed = parse_u64("seed", v); },
                 [](const RunConfig& c) { return fmt::format("{}", c.train.seed); }});
    t.push_back(double_entry("init_jitter",
                             [](RunConfig& c) -> double& { return c.train.init_jitter; }));
    t.push_back({"max_ce_depth",
                 [](RunConfig& c, const std::string& v) {
                   c.train.constraints.max_ce_depth =
                       v == "none" ? kUnboundedDepth : parse_int("max_ce_depth", v);
                 },
                 [](const RunConfig& c) {
                   const int d = c.train.constraints.max_ce_depth;
                   return d == kUnboundedDepth ? std::string("none") : std::to_string(d);
                 }});
    t.push_back(double_entry("dep_len_beta", [](RunConfig& c) -> double& {
      return c.train.constraints.dep_len_beta;
    }));
    t.push_back(double_entry("em_smoothing",
                             [](RunConfig& c) -> double& { return c.train.em_smoothing; }));
    t.push_back(double_entry("mstep_smoothing",
                             [](RunConfig& c) -> double& { return c.train.mstep_smoothing; }));
    t.push_back(double_entry("lambda", [](RunConfig& c) -> double& { return c.train.lambda; }));
    t.push_back(double_entry("mu", [](RunConfig& c) -> double& { return c.train.mu; }));
    t.push_back(int_entry("fw_iters", [](RunConfig& c) -> int& { return c.train.fw_iters; }));
    t.push_back(double_entry("sgd_lr", [](RunConfig& c) -> double& { return c.train.sgd_lr; }));
    t.push_back(int_entry("sgd_batch", [](RunConfig& c) -> int& { return c.train.sgd_batch; }));
    t.push_back(double_entry("dd_tau0", [](RunConfig& c) -> double& { return c.train.dd.tau0; }));
    t.push_back(enum_entry<StepRule>(
        "dd_step_rule", [](RunConfig& c) -> StepRule& { return c.train.dd.step_rule; },
        {{"constant", StepRule::kConstant},
         {"inverse", StepRule::kInverse},
         {"inverse_sqrt", StepRule::kInverseSqrt}}));
    t.push_back(int_entry("dd_max_iters", [](RunConfig& c) -> int& { return c.train.dd.max_iters; }));
    t.push_back(enum_entry<Fallback>(
        "dd_fallback", [](RunConfig& c) -> Fallback& { return c.train.dd.fallback; },
        {{"generative", Fallback::kGenerative},
         {"discriminative", Fallback::kDiscriminative},
         {"better_objective", Fallback::kBetterObjective}}));
    t.push_back(double_entry("g_weight", [](RunConfig& c) -> double& { return c.train.dd.g_weight; }));
    t.push_back(int_entry("threads", [](RunConfig& c) -> int& { return c.threads; }));
    t.push_back(int_entry("train_max_len", [](RunConfig& c) -> int& { return c.train_max_len; }));
    t.push_back(bool_entry("count_punct_in_filter",
                           [](RunConfig& c) -> bool& { return c.count_punct_in_filter; }));
    t.push_back(int_entry("eval_max_len", [](RunConfig& c) -> int& { return c.eval_max_len; }));
    t.push_back(bool_entry("exclude_punct", [](RunConfig& c) -> bool& { return c.exclude_punct; }));
    t.push_back({"decoder",
                 [](RunConfig& c, const std::string& v) {
                   if (v != "dmv" && v != "cmst" && v != "dd") {
                     throw ContractError(bad_value("decoder", v));
                   }
                   c.decoder = v;
                 },
                 [](const RunConfig& c) { return c.decoder; }});
    t.push_back({"format",
                 [](RunConfig& c, const std::string& v) {
                   if (v != "csv" && v != "table") throw ContractError(bad_value("format", v));
                   c.format = v;
                 },
                 [](const RunConfig& c) { return c.format; }});
    t.push_back(string_entry("train", [](RunConfig& c) -> std::string& { return c.train_path; }));
    t.push_back(string_entry("rules", [](RunConfig& c) -> std::string& { return c.rules_path; }));
    t.push_back(string_entry("model", [](RunConfig& c) -> std::string& { return c.model_dir; }));
    t.push_back(string_entry("input", [](RunConfig& c) -> std::string& { return c.input_path; }));
    t.push_back(string_entry("output", [](RunConfig& c) -> std::string& { return c.output_path; }));
    t.push_back(string_entry("out", [](RunConfig& c) -> std::string& { return c.out_dir; }));
    t.push_back(string_entry("gold", [](RunConfig& c) -> std::string& { return c.gold_path; }));
    t.push_back(string_entry("pred", [](RunConfig& c) -> std::string& { return c.pred_path; }));
    t.push_back(string_entry("report", [](RunConfig& c) -> std::string& { return c.report_path; }));
    return t;
  }();
  return table;
}

const Entry& find_entry(const std::string& key) {
  for (const auto& e : entries()) {
    if (e.key == key) return e;
  }
  throw ContractError(fmt::format("unknown config key '{}'", key));
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& e : entries()) keys.push_back(e.key);
  return keys;
}

void set_option(RunConfig& cfg, const std::string& key, const std::string& value) {
  find_entry(key).set(cfg, value);
}

std::string get_option(const RunConfig& cfg, const std::string& key) {
  return find_entry(key).get(cfg);
}

void apply_config(RunConfig& cfg, std::istream& in) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ContractError(fmt::format("config line {}: expected key = value", lineno));
    }
    try {
      set_option(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const ContractError& e) {
      throw ContractError(fmt::format("config line {}: {}", lineno, e.what()));
    }
  }
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractError(fmt::format("cannot open config file {}", path));
  apply_config(cfg, in);
}

void dump_config(const RunConfig& cfg, std::ostream& out) {
  for (const auto& e : entries()) fmt::print(out, "{} = {}\n", e.key, e.get(cfg));
}

int resolve_threads(int configured) {
  if (std::getenv("JOINTDEP_THREADS") == nullptr && configured > 0) return configured;
  return default_threads();
}

}  // namespace jointdep
