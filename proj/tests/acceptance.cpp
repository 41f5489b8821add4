// Property-based acceptance suite. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "helpers.hpp"
#include "jointdep/cli.hpp"
#include "jointdep/decoder.hpp"
#include "jointdep/errors.hpp"
#include "jointdep/frank_wolfe.hpp"
#include "oracle.hpp"

using namespace jointdep;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int g_failures = 0;

void report(int id, const std::string& name, const Outcome& o) {
  fmt::print("{} criterion {}: {} ({})\n", o.pass ? "PASS" : "FAIL", id, name, o.detail);
  std::cout.flush();
  if (!o.pass) ++g_failures;
}

ConstraintConfig random_constraints(Rng& rng) {
  const int d = rng.uniform_int(0, 3);
  return {d == 3 ? kUnboundedDepth : d, rng.uniform() < 0.5 ? 0.0 : rng.uniform(0.0, 0.5)};
}

Outcome chart_vs_oracle() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(1001);
  int instances = 0;
  double worst_viterbi = 0.0;
  double worst_inside = 0.0;
  bool ok = true;
  while (instances < 250) {
    const Corpus c = testing::random_corpus(rng, 1, 1, 5, 5, false);
    const Sentence& x = c.sentences[0];
    const DmvParams theta = testing::random_params(c.pos_vocab, rng);
    const ConstraintConfig cfg = random_constraints(rng);
    const Eigen::VectorXd prices = rng.uniform() < 0.5
                                       ? Eigen::VectorXd()
                                       : testing::random_vector(rng, x.n() * x.n(), 1.0);
    const auto tags = tag_ids(x, theta.vocab);
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> logs;
    for (const auto& h : oracle::all_projective_trees(x.n())) {
      const double f = oracle::dmv_score(tags, h, theta, cfg.max_ce_depth, cfg.dep_len_beta);
      if (f == oracle::kNegInf) continue;
      logs.push_back(f);
      const double u = prices.size() ? oracle::linear_cost(h, prices) : 0.0;
      best = std::min(best, -f + u);
    }
    ++instances;
    if (logs.empty()) {
      bool threw = false;
      try {
        viterbi_decode(x, theta, cfg, prices);
      } catch (const InfeasibleError&) {
        threw = true;
      }
      ok = ok && threw && inside_loglik(x, theta, cfg) == -std::numeric_limits<double>::infinity();
      continue;
    }
    const ViterbiResult v = viterbi_decode(x, theta, cfg, prices);
    worst_viterbi = std::max(worst_viterbi, std::abs(v.score - best));
    worst_inside = std::max(worst_inside, std::abs(inside_loglik(x, theta, cfg) - oracle::log_sum_exp(logs)));
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ok = ok && worst_viterbi <= 1e-9 && worst_inside <= 1e-8 && secs < 120.0;
  return {ok, fmt::format("{} instances, max viterbi err {:.2e}, max inside err {:.2e}, {:.2f}s",
                          instances, worst_viterbi, worst_inside, secs)};
}

Outcome lmo_vs_oracle() {
  Rng rng(1002);
  double worst = 0.0;
  const int instances = 250;
  for (int k = 0; k < instances; ++k) {
    const Corpus c = testing::random_corpus(rng, 1, 1, 5, 6, false);
    const CmstModel m = testing::random_cmst(c, rng, 1.0);
    const auto p = make_problem(c.sentences[0], m);
    const Eigen::VectorXd u = testing::random_vector(rng, p.n * p.n, 0.5);
    const Eigen::VectorXd cost = arc_costs(p, m, u);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& h : oracle::all_projective_trees(p.n)) best = std::min(best, oracle::linear_cost(h, cost));
    const LmoResult r = lmo_decode(p, m, u);
    worst = std::max({worst, std::abs(r.score - best),
                      std::abs(oracle::linear_cost(r.tree.heads, cost) - best)});
  }
  return {worst <= 1e-9, fmt::format("{} instances, max err {:.2e}", instances, worst)};
}

Outcome dd_certificate() {
  Rng rng(1003);
  int converged = 0;
  double worst = 0.0;
  const int instances = 150;
  for (int k = 0; k < instances; ++k) {
    const Corpus c = testing::random_corpus(rng, 1, 1, 4, 4, false);
    const Sentence& x = c.sentences[0];
    const DmvParams theta = testing::random_params(c.pos_vocab, rng);
    const CmstModel m = testing::random_cmst(c, rng, 0.3);
    ConstraintConfig cfg = random_constraints(rng);
    const auto p = make_problem(x, m);
    const auto tags = tag_ids(x, theta.vocab);
    const Eigen::VectorXd cost = arc_costs(p, m);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& h : oracle::all_projective_trees(x.n())) {
      const double f = oracle::dmv_score(tags, h, theta, cfg.max_ce_depth, cfg.dep_len_beta);
      if (f != oracle::kNegInf) best = std::min(best, -f + oracle::linear_cost(h, cost));
    }
    if (!std::isfinite(best)) {
      cfg.max_ce_depth = kUnboundedDepth;
      for (const auto& h : oracle::all_projective_trees(x.n())) {
        best = std::min(best, -oracle::dmv_score(tags, h, theta, kUnboundedDepth, cfg.dep_len_beta) +
                                  oracle::linear_cost(h, cost));
      }
    }
    const DDResult r = dd_decode(x, theta, cfg, p, m, DDConfig{});
    if (!r.converged) continue;
    ++converged;
    worst = std::max(worst, std::abs(joint_score(x, r.tree, theta, cfg, p, m) - best));
  }
  return {worst <= 1e-9 && converged > 0,
          fmt::format("{} instances, {} converged, max score err {:.2e}", instances, converged, worst)};
}

Outcome em_monotone() {
  Rng rng(1004);
  const Corpus seed_tags = testing::random_corpus(rng, 30, 1, 3, 6);
  const Corpus c = sample_corpus(testing::random_params(seed_tags.pos_vocab, rng), 100, 10, 1004);
  const ConstraintConfig cfg = ConstraintConfig::unconstrained();
  DmvParams theta = init_params(c, InitMode::kHarmonic);
  double prev = -std::numeric_limits<double>::infinity();
  double worst_drop = 0.0;
  bool ok = true;
  // em_step reports the likelihood under its input, so 21 steps cover 20 updates.
  for (int k = 0; k <= 20; ++k) {
    const EmStepResult r = em_step(c, theta, cfg, 0.0);
    const double tol = 1e-10 * std::max(1.0, std::abs(r.loglik));
    if (r.loglik < prev - tol) ok = false;
    if (k > 0) worst_drop = std::max(worst_drop, prev - r.loglik);
    prev = r.loglik;
    theta = r.params;
  }
  return {ok, fmt::format("20 updates on {} sentences, final loglik {:.6f}, largest decrease {:.2e}",
                          c.N(), prev, worst_drop)};
}

Outcome fw_monotone() {
  Rng rng(1005);
  const Corpus seed_tags = testing::random_corpus(rng, 30, 1, 3, 7);
  const Corpus c = sample_corpus(testing::random_params(seed_tags.pos_vocab, rng), 100, 10, 1005);
  CmstModel m = CmstModel::create(c, default_rules(), 1.0, 0.5);
  FrankWolfe fw(make_problems(c, m), m);
  double prev = fw.objective();
  bool monotone = true;
  double initial_gap = 0.0;
  for (int k = 0; k < 50; ++k) {
    const FwIteration it = fw.step();
    if (k == 0) initial_gap = it.gap;
    if (it.objective > prev + 1e-10 * std::max(1.0, std::abs(prev))) monotone = false;
    prev = it.objective;
  }
  const double final_gap = fw.duality_gap();
  const bool ok = monotone && final_gap >= 0.0 && final_gap < 0.1 * initial_gap;
  return {ok, fmt::format("monotone {}, initial gap {:.4e}, final gap {:.4e} ({:.1f}%)", monotone,
                          initial_gap, final_gap, 100.0 * final_gap / initial_gap)};
}

Outcome gradient_check() {
  Rng rng(1006);
  double worst = 0.0;
  const int instances = 50;
  for (int k = 0; k < instances; ++k) {
    const Corpus c = testing::random_corpus(rng, 4, 1, 8, 7);
    const CmstModel m = testing::random_cmst(c, rng);
    const int N = c.N();
    const std::vector<ArcProblem> problems{make_problem(c.sentences[0], m)};
    const ArcVector y = to_arc_vector(gold_tree(c.sentences[0]));
    // One SGD step of unit rate on one sentence moves w by exactly minus the gradient.
    const CmstModel after = sgd_update(problems, {y}, m, 1.0, N, 1);
    const Eigen::VectorXd g = m.w - after.w;
    const double h = 1e-5;
    Eigen::VectorXd fd(m.w.size());
    for (Eigen::Index j = 0; j < m.w.size(); ++j) {
      CmstModel plus = m;
      CmstModel minus = m;
      plus.w[j] += h;
      minus.w[j] -= h;
      fd[j] = (sentence_objective(problems[0], y, plus, N) - sentence_objective(problems[0], y, minus, N)) /
              (2 * h);
    }
    worst = std::max(worst, (g - fd).norm() / std::max(1e-12, fd.norm()));
  }
  return {worst < 1e-6, fmt::format("{} instances, max relative error {:.2e}", instances, worst)};
}

Outcome normalization_fuzz() {
  Rng rng(1007);
  int decodes = 0;
  int params_checked = 0;
  double worst_norm = 0.0;
  bool trees_ok = true;
  auto check_params = [&](const DmvParams& p) {
    worst_norm = std::max(worst_norm, max_normalization_error(p));
    ++params_checked;
  };
  auto check_tree = [&](const DepTree& t, int n, int depth) {
    ++decodes;
    if (t.n() != n || !is_valid_projective_tree(t)) trees_ok = false;
    if (depth != kUnboundedDepth && ce_depth(t) > depth) trees_ok = false;
  };
  while (decodes < 1000) {
    const Corpus c = testing::random_corpus(rng, 8, 1, 9, 6);
    const ConstraintConfig cfg = random_constraints(rng);
    check_params(init_params(c, InitMode::kHarmonic));
    check_params(init_params(c, InitMode::kUniform, rng.uniform_int(0, 1000), 0.5));
    const DmvParams theta = testing::random_params(c.pos_vocab, rng);
    const EmStepResult em = em_step(c, theta, cfg, rng.uniform() < 0.5 ? 0.0 : 0.1);
    check_params(em.params);
    check_params(mstep_from_trees(c, gold_trees(c), rng.uniform() < 0.5 ? 0.0 : 0.1));
    const CmstModel m = testing::random_cmst(c, rng);
    DDConfig dd;
    dd.max_iters = 20;
    for (const auto& x : c.sentences) {
      try {
        check_tree(viterbi_decode(x, em.params, cfg).tree, x.n(), cfg.max_ce_depth);
      } catch (const InfeasibleError&) {
      }
      try {
        check_tree(dd_decode(x, theta, cfg, m, dd).tree, x.n(), cfg.max_ce_depth);
      } catch (const InfeasibleError&) {
      }
      check_tree(lmo_decode(x, m).tree, x.n(), kUnboundedDepth);
    }
  }
  return {trees_ok && worst_norm <= 1e-12,
          fmt::format("{} decodes, {} parameter sets, max normalization error {:.2e}", decodes,
                      params_checked, worst_norm)};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    files[fs::relative(e.path(), dir).string()] = s.str();
  }
  return files;
}

Outcome determinism(const std::string& toy) {
  if (!fs::is_regular_file(toy)) return {false, "toy corpus not found: " + toy};
  const fs::path dir = fs::temp_directory_path() / "jointdep_acceptance_determinism";
  std::vector<std::map<std::string, std::string>> runs;
  for (const char* threads : {"1", "4"}) {
    fs::remove_all(dir);
    const std::string out = dir.string();
    const std::vector<const char*> argv{"jointdep", "train", "--mode", "joint", "--train", toy.c_str(),
                                        "--seed", "7", "--threads", threads, "--out", out.c_str()};
    std::ostringstream sink_out, sink_err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), sink_out, sink_err);
    if (code != 0) return {false, fmt::format("train exited with {}: {}", code, sink_err.str())};
    runs.push_back(snapshot(dir));
  }
  fs::remove_all(dir);
  // The saved configuration records the thread count; every other file must match.
  runs[0].erase("config.txt");
  runs[1].erase("config.txt");
  const bool same = runs[0] == runs[1];
  return {same && !runs[0].empty(),
          fmt::format("{} checkpoint files compared across runs with 1 and 4 threads", runs[0].size())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string toy = argc > 1 ? argv[1] : "data/toy.conllu";
  report(1, "chart vs brute force", chart_vs_oracle());
  report(2, "LMO vs brute force", lmo_vs_oracle());
  report(3, "agreement certificate", dd_certificate());
  report(4, "EM monotonicity", em_monotone());
  report(5, "Frank-Wolfe monotonicity and gap", fw_monotone());
  report(6, "gradient check", gradient_check());
  report(7, "normalization and tree validity", normalization_fuzz());
  report(8, "training determinism", determinism(toy));
  fmt::print("{} of 8 criteria passed\n", 8 - g_failures);
  return g_failures == 0 ? 0 : 1;
}
