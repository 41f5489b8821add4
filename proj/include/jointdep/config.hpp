#pragma once

// Flat key=value run configuration covering every module setting plus the
// file paths of a batch run.

#include <iosfwd>
#include <string>
#include <vector>

#include "jointdep/trainer.hpp"

namespace jointdep {

struct RunConfig {
  TrainConfig train;
  int train_max_len = 15;
  bool count_punct_in_filter = true;
  int eval_max_len = 40;
  bool exclude_punct = true;
  std::string decoder = "dd";  // dmv | cmst | dd
  std::string format = "csv";  // csv | table
  int threads = 0;             // 0 selects the hardware count

  // Paths; empty means unset. rules_path empty selects the built-in rule set.
  std::string train_path;
  std::string rules_path;
  std::string model_dir;
  std::string input_path;
  std::string output_path;
  std::string out_dir;
  std::string gold_path;
  std::string pred_path;
  std::string report_path;  // empty writes to stdout
};

// Every recognized key, in dump order.
std::vector<std::string> config_keys();

// Throws ContractError on an unknown key or a malformed value.
void set_option(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_option(const RunConfig& cfg, const std::string& key);

// Parses `key = value` lines; blank lines and lines starting with # are ignored.
void apply_config(RunConfig& cfg, std::istream& in);
void apply_config_file(RunConfig& cfg, const std::string& path);

void dump_config(const RunConfig& cfg, std::ostream& out);

// Worker count: JOINTDEP_THREADS when set, else `configured` when positive,
// else the hardware count.
int resolve_threads(int configured);

}  // namespace jointdep
