#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "jointdep/cmst.hpp"
#include "jointdep/corpus.hpp"

namespace jointdep {

struct SentenceScore {
  int correct = 0;
  int scored = 0;
};

struct EvalReport {
  double dda_all = 0.0;   // over sentences with length <= max_len
  double dda_le15 = 0.0;  // over sentences with length <= 15
  int tokens_scored = 0;
  int tokens_scored_le15 = 0;
  int max_len = 0;
  std::vector<SentenceScore> per_sentence;  // aligned with the corpus; skipped sentences score 0/0
};

// Directed dependency accuracy. Sentences longer than max_len are skipped;
// with exclude_punct, tokens tagged PUNCT are not scored.
EvalReport directed_accuracy(const Corpus& gold, const std::vector<DepTree>& pred, int max_len,
                             bool exclude_punct = true);

struct RuleSatisfaction {
  double overall = 0.0;
  int arcs = 0;
  std::map<std::string, double> by_head_tag;  // fraction per head tag (ROOT for root arcs)
  std::map<std::string, int> arcs_by_head_tag;
};

RuleSatisfaction rule_satisfaction(const std::vector<DepTree>& pred, const Corpus& c,
                                   const RuleSet& r);

// Mean |head - dependent| over non-root arcs.
double avg_dep_length(const std::vector<DepTree>& pred);

std::map<int, int> ce_depth_histogram(const std::vector<DepTree>& pred);

struct AnalysisReport {
  RuleSatisfaction rules;
  double avg_dep_length = 0.0;
  std::map<int, int> ce_depth_histogram;
};

AnalysisReport analyze(const std::vector<DepTree>& pred, const Corpus& c, const RuleSet& r);

// CSV schema v1: header `metric,group,value`, first row `schema_version,,1`.
void write_eval_csv(const EvalReport& report, std::ostream& out);
void write_analysis_csv(const AnalysisReport& report, std::ostream& out);
void write_eval_table(const EvalReport& report, std::ostream& out);
void write_analysis_table(const AnalysisReport& report, std::ostream& out);

}  // namespace jointdep
