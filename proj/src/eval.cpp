#include "jointdep/eval.hpp"

#include <cstdlib>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "jointdep/dmv.hpp"
#include "jointdep/errors.hpp"

namespace jointdep {

EvalReport directed_accuracy(const Corpus& gold, const std::vector<DepTree>& pred, int max_len,
                             bool exclude_punct) {
  if (pred.size() != gold.sentences.size()) {
    throw ContractError("prediction count does not match gold corpus size");
  }
  EvalReport report;
  report.max_len = max_len;
  report.per_sentence.resize(pred.size());
  int correct = 0;
  int correct15 = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const auto& s = gold.sentences[i];
    if (!s.has_gold()) throw ContractError(fmt::format("sentence {} has no gold heads", i + 1));
    if (pred[i].n() != s.n()) {
      throw ContractError(fmt::format("sentence {}: predicted tree has the wrong length", i + 1));
    }
    if (s.n() > max_len) continue;
    auto& score = report.per_sentence[i];
    for (int j = 0; j < s.n(); ++j) {
      if (exclude_punct && s.tokens[j].is_punct) continue;
      ++score.scored;
      score.correct += pred[i].heads[j] == *s.tokens[j].gold_head;
    }
    report.tokens_scored += score.scored;
    correct += score.correct;
    if (s.n() <= 15) {
      report.tokens_scored_le15 += score.scored;
      correct15 += score.correct;
    }
  }
  if (report.tokens_scored > 0) report.dda_all = static_cast<double>(correct) / report.tokens_scored;
  if (report.tokens_scored_le15 > 0) {
    report.dda_le15 = static_cast<double>(correct15) / report.tokens_scored_le15;
  }
  return report;
}

RuleSatisfaction rule_satisfaction(const std::vector<DepTree>& pred, const Corpus& c,
                                   const RuleSet& r) {
  if (pred.size() != c.sentences.size()) {
    throw ContractError("prediction count does not match corpus size");
  }
  RuleSatisfaction out;
  std::map<std::string, int> hits;
  int total_hits = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const auto& s = c.sentences[i];
    if (pred[i].n() != s.n()) throw ContractError("tree length does not match sentence");
    for (int d = 1; d <= s.n(); ++d) {
      const int h = pred[i].heads[d - 1];
      const std::string head_tag = h == 0 ? std::string(kRootTag) : s.tokens[h - 1].upos;
      const bool hit = r.contains(head_tag, s.tokens[d - 1].upos);
      ++out.arcs;
      ++out.arcs_by_head_tag[head_tag];
      hits[head_tag] += hit;
      total_hits += hit;
    }
  }
  if (out.arcs > 0) out.overall = static_cast<double>(total_hits) / out.arcs;
  for (const auto& [tag, count] : out.arcs_by_head_tag) {
    out.by_head_tag[tag] = static_cast<double>(hits[tag]) / count;
  }
  return out;
}

double avg_dep_length(const std::vector<DepTree>& pred) {
  long total = 0;
  long arcs = 0;
  for (const auto& tree : pred) {
    for (int d = 1; d <= tree.n(); ++d) {
      const int h = tree.heads[d - 1];
      if (h == 0) continue;
      total += std::abs(h - d);
      ++arcs;
    }
  }
  if (arcs == 0) throw ContractError("no non-root arcs to measure");
  return static_cast<double>(total) / static_cast<double>(arcs);
}

std::map<int, int> ce_depth_histogram(const std::vector<DepTree>& pred) {
  std::map<int, int> hist;
  for (const auto& tree : pred) ++hist[ce_depth(tree)];
  return hist;
}

AnalysisReport analyze(const std::vector<DepTree>& pred, const Corpus& c, const RuleSet& r) {
  AnalysisReport report;
  report.rules = rule_satisfaction(pred, c, r);
  report.avg_dep_length = avg_dep_length(pred);
  report.ce_depth_histogram = ce_depth_histogram(pred);
  return report;
}

void write_eval_csv(const EvalReport& report, std::ostream& out) {
  out << "metric,group,value\n";
  out << "schema_version,,1\n";
  fmt::print(out, "dda_all,len<={},{:.6f}\n", report.max_len, report.dda_all);
  fmt::print(out, "dda_le15,len<=15,{:.6f}\n", report.dda_le15);
  fmt::print(out, "tokens_scored,len<={},{}\n", report.max_len, report.tokens_scored);
  fmt::print(out, "tokens_scored,len<=15,{}\n", report.tokens_scored_le15);
}

void write_analysis_csv(const AnalysisReport& report, std::ostream& out) {
  out << "metric,group,value\n";
  out << "schema_version,,1\n";
  fmt::print(out, "rule_satisfaction,all,{:.6f}\n", report.rules.overall);
  for (const auto& [tag, frac] : report.rules.by_head_tag) {
    fmt::print(out, "rule_satisfaction,{},{:.6f}\n", tag, frac);
  }
  fmt::print(out, "avg_dep_length,all,{:.6f}\n", report.avg_dep_length);
  for (const auto& [depth, count] : report.ce_depth_histogram) {
    fmt::print(out, "ce_depth_count,{},{}\n", depth, count);
  }
}

void write_eval_table(const EvalReport& report, std::ostream& out) {
  fmt::print(out, "{:<12}{:>10}{:>10}\n", "slice", "DDA", "tokens");
  fmt::print(out, "{:<12}{:>10.2f}{:>10}\n", fmt::format("len<={}", report.max_len),
             100.0 * report.dda_all, report.tokens_scored);
  fmt::print(out, "{:<12}{:>10.2f}{:>10}\n", "len<=15", 100.0 * report.dda_le15,
             report.tokens_scored_le15);
}

void write_analysis_table(const AnalysisReport& report, std::ostream& out) {
  fmt::print(out, "{:<24}{:>10}\n", "rule satisfaction", "percent");
  fmt::print(out, "{:<24}{:>10.2f}\n", "all", 100.0 * report.rules.overall);
  for (const auto& [tag, frac] : report.rules.by_head_tag) {
    fmt::print(out, "{:<24}{:>10.2f}\n", "head=" + tag, 100.0 * frac);
  }
  fmt::print(out, "{:<24}{:>10.3f}\n", "avg dependency length", report.avg_dep_length);
  for (const auto& [depth, count] : report.ce_depth_histogram) {
    fmt::print(out, "{:<24}{:>10}\n", fmt::format("ce depth {}", depth), count);
  }
}

}  // namespace jointdep
