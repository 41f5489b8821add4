#include "jointdep/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "jointdep/errors.hpp"
#include "jointdep/eval.hpp"
#include "jointdep/frank_wolfe.hpp"
#include "jointdep/logmath.hpp"
#include "jointdep/parallel.hpp"

namespace jointdep {

void validate(const TrainConfig& cfg) {
  if (cfg.outer_iters < 1) throw ContractError("outer_iters must be >= 1");
  if (cfg.extra_separate_iters < 0) throw ContractError("extra_separate_iters must be >= 0");
  if (cfg.em_pretrain_iters < 0) throw ContractError("em_pretrain_iters must be >= 0");
  if (cfg.fw_iters < 1) throw ContractError("fw_iters must be >= 1");
  if (cfg.sgd_lr <= 0.0) throw ContractError("sgd_lr must be > 0");
  if (cfg.sgd_batch < 1) throw ContractError("sgd_batch must be >= 1");
  if (cfg.lambda <= 0.0) throw ContractError("lambda must be > 0");
  if (cfg.mu < 0.0) throw ContractError("mu must be >= 0");
  if (cfg.constraints.max_ce_depth < 0) throw ContractError("max_ce_depth must be >= 0");
  if (cfg.constraints.dep_len_beta < 0.0) throw ContractError("dep_len_beta must be >= 0");
  if (cfg.dd.max_iters < 1) throw ContractError("dd max_iters must be >= 1");
  if (cfg.dd.tau0 <= 0.0) throw ContractError("dd tau0 must be > 0");
  if (cfg.threads < 1) throw ContractError("threads must be >= 1");
}

namespace {

void require_corpus(const Corpus& c) {
  if (c.N() == 0) throw ContractError("training corpus is empty");
}

DmvParams run_em(const Corpus& c, DmvParams theta, const TrainConfig& cfg, int iters) {
  for (int k = 0; k < iters; ++k) {
    theta = em_step(c, theta, cfg.constraints, cfg.em_smoothing, cfg.threads).params;
  }
  return theta;
}

FrankWolfe make_frank_wolfe(const Corpus& c, const TrainConfig& cfg) {
  CmstModel m = CmstModel::create(c, cfg.rules, cfg.lambda, cfg.mu);
  auto problems = make_problems(c, m, cfg.threads);
  return FrankWolfe(std::move(problems), std::move(m), cfg.threads);
}

void run_fw(FrankWolfe& fw, int iters) {
  for (int k = 0; k < iters; ++k) fw.step();
}

std::vector<DepTree> decode_cmst(const std::vector<ArcProblem>& problems, const CmstModel& m,
                                 int threads) {
  std::vector<DepTree> trees(problems.size());
  parallel_for(static_cast<int>(problems.size()), threads,
               [&](int i) { trees[i] = lmo_decode(problems[i], m).tree; });
  return trees;
}

bool all_gold(const Corpus& c) {
  for (const auto& s : c.sentences) {
    if (!s.has_gold()) return false;
  }
  return true;
}

Corpus subset(const Corpus& c, const std::vector<int>& keep) {
  Corpus out;
  out.pos_vocab = c.pos_vocab;
  for (int i : keep) out.sentences.push_back(c.sentences[i]);
  return out;
}

}  // namespace

DmvParams train_dmv(const Corpus& c, const TrainConfig& cfg) {
  validate(cfg);
  require_corpus(c);
  return run_em(c, init_params(c, cfg.dmv_init, cfg.seed, cfg.init_jitter), cfg,
                cfg.em_pretrain_iters);
}

CmstModel train_cmst(const Corpus& c, const TrainConfig& cfg) {
  validate(cfg);
  require_corpus(c);
  FrankWolfe fw = make_frank_wolfe(c, cfg);
  run_fw(fw, cfg.fw_iters);
  return fw.model();
}

TrainState pretrain(const Corpus& c, const TrainConfig& cfg) {
  TrainState state;
  state.theta = train_dmv(c, cfg);
  state.cmst = train_cmst(c, cfg);
  return state;
}

double joint_corpus_objective(const Corpus& c, const std::vector<DepTree>& trees,
                              const DmvParams& theta, const ConstraintConfig& cfg_f,
                              std::span<const ArcProblem> problems, const CmstModel& m,
                              double g_weight) {
  if (trees.size() != c.sentences.size() || problems.size() != c.sentences.size()) {
    throw ContractError("trees and problems must align with the corpus");
  }
  double total = 0.0;
  for (size_t i = 0; i < trees.size(); ++i) {
    total += joint_objective(c.sentences[i], trees[i], theta, cfg_f, problems[i], m, c.N(),
                             g_weight);
  }
  return total;
}

TrainState joint_train(const Corpus& c, const TrainConfig& cfg,
                       const IterationCallback& on_iteration) {
  validate(cfg);
  require_corpus(c);
  if (cfg.mode != TrainMode::kJoint) throw ContractError("joint_train requires mode joint");
  const int N = c.N();

  TrainState state;
  state.theta = train_dmv(c, cfg);
  FrankWolfe fw = make_frank_wolfe(c, cfg);
  run_fw(fw, cfg.fw_iters);
  state.cmst = fw.model();
  const auto& problems = fw.problems();
  if (on_iteration) on_iteration(state);

  const bool gold = all_gold(c);
  const ConstraintConfig relaxed{kUnboundedDepth, cfg.constraints.dep_len_beta};
  std::vector<DepTree> previous;

  for (int outer = 1; outer <= cfg.outer_iters; ++outer) {
    IterationMetrics metrics;
    metrics.iteration = outer;

    // Decode with frozen snapshots of both models.
    const DmvParams& theta = *state.theta;
    const CmstModel& m = *state.cmst;
    std::vector<DDResult> results(static_cast<size_t>(N));
    std::vector<char> status(static_cast<size_t>(N), 0);  // 0 ok, 1 relaxed, 2 failed
    parallel_for(N, cfg.threads, [&](int i) {
      try {
        results[i] = dd_decode(c.sentences[i], theta, cfg.constraints, problems[i], m, cfg.dd);
      } catch (const InfeasibleError&) {
        try {
          results[i] = dd_decode(c.sentences[i], theta, relaxed, problems[i], m, cfg.dd);
          status[i] = 1;
        } catch (const InfeasibleError&) {
          status[i] = 2;
        }
      }
    });

    std::vector<int> ok;
    int converged = 0;
    for (int i = 0; i < N; ++i) {
      if (status[i] == 1) ++metrics.infeasible;
      if (status[i] == 2) {
        ++metrics.skipped;
        continue;
      }
      ok.push_back(i);
      converged += results[i].converged;
    }
    metrics.dd_convergence = static_cast<double>(converged) / N;
    if (ok.empty()) throw InfeasibleError("no training sentence could be decoded");

    std::vector<DepTree> decoded(static_cast<size_t>(N));
    for (int i = 0; i < N; ++i) {
      decoded[i] = status[i] == 2 ? (state.trees.empty() ? DepTree{} : state.trees[i])
                                  : results[i].tree;
    }

    const Corpus kept = subset(c, ok);
    std::vector<DepTree> kept_trees;
    std::vector<ArcVector> kept_vectors;
    std::vector<ArcProblem> kept_problems;
    for (int i : ok) {
      kept_trees.push_back(decoded[i]);
      kept_vectors.push_back(to_arc_vector(decoded[i]));
      kept_problems.push_back(problems[i]);
    }
    metrics.objective_before = joint_corpus_objective(kept, kept_trees, theta, cfg.constraints,
                                                      kept_problems, m, cfg.dd.g_weight);

    // Parameter updates with the parses fixed.
    DmvParams new_theta = mstep_from_trees(kept, kept_trees, cfg.mstep_smoothing, &theta.vocab);
    const double lr = cfg.sgd_lr / outer;
    const double g_before = corpus_objective(kept_problems, kept_vectors, m);
    CmstModel new_m = m;
    double rate = lr;
    constexpr int kMaxHalvings = 10;
    for (int attempt = 0; attempt <= kMaxHalvings; ++attempt, rate *= 0.5) {
      CmstModel candidate = sgd_update(kept_problems, kept_vectors, m, rate, N, cfg.sgd_batch);
      if (corpus_objective(kept_problems, kept_vectors, candidate) <= g_before) {
        new_m = std::move(candidate);
        break;
      }
    }
    metrics.objective = joint_corpus_objective(kept, kept_trees, new_theta, cfg.constraints,
                                               kept_problems, new_m, cfg.dd.g_weight);

    // Extra separate iterations for each model.
    if (cfg.extra_separate_iters > 0) {
      new_theta = run_em(c, std::move(new_theta), cfg, cfg.extra_separate_iters);
      std::vector<DepTree> warm = decoded;
      for (int i = 0; i < N; ++i) {
        if (warm[i].n() != c.sentences[i].n()) warm[i] = lmo_decode(problems[i], new_m).tree;
      }
      fw.set_weights(new_m.w);
      fw.warm_start(warm);
      run_fw(fw, cfg.extra_separate_iters);
      new_m = fw.model();
    }

    if (gold && metrics.skipped == 0) {
      metrics.accuracy = directed_accuracy(c, decoded, std::numeric_limits<int>::max()).dda_all;
    }

    state.theta = std::move(new_theta);
    state.cmst = std::move(new_m);
    state.trees = decoded;
    state.iteration = outer;
    state.metrics.push_back(metrics);
    if (on_iteration) on_iteration(state);

    if (metrics.skipped == 0 && decoded == previous) break;
    previous = std::move(decoded);
  }
  return state;
}

DInitResult train_baseline_d_init(const Corpus& c, const TrainConfig& cfg) {
  validate(cfg);
  require_corpus(c);
  if (cfg.mode != TrainMode::kDmvInitFromCmst) {
    throw ContractError("train_baseline_d_init requires mode dmv-init-from-cmst");
  }
  FrankWolfe fw = make_frank_wolfe(c, cfg);
  run_fw(fw, cfg.fw_iters);
  const auto parses = decode_cmst(fw.problems(), fw.model(), cfg.threads);

  DInitResult result;
  result.initial_theta = mstep_from_trees(c, parses, cfg.mstep_smoothing);
  result.state.theta = run_em(c, result.initial_theta, cfg, cfg.em_pretrain_iters);
  return result;
}

TrainState train(const Corpus& c, const TrainConfig& cfg, const IterationCallback& on_iteration) {
  TrainState state;
  switch (cfg.mode) {
    case TrainMode::kDmvOnly:
      state.theta = train_dmv(c, cfg);
      break;
    case TrainMode::kCmstOnly:
      state.cmst = train_cmst(c, cfg);
      break;
    case TrainMode::kDmvInitFromCmst:
      state = train_baseline_d_init(c, cfg).state;
      break;
    case TrainMode::kJoint:
      return joint_train(c, cfg, on_iteration);
  }
  if (on_iteration) on_iteration(state);
  return state;
}

void write_metrics_csv(const std::vector<IterationMetrics>& metrics, std::ostream& out) {
  out << "iteration,objective_before,objective,dd_convergence,accuracy,infeasible,skipped\n";
  for (const auto& m : metrics) {
    fmt::print(out, "{},{:.10e},{:.10e},{:.6f},{:.6f},{},{}\n", m.iteration, m.objective_before,
               m.objective, m.dd_convergence, m.accuracy, m.infeasible, m.skipped);
  }
}

void write_checkpoint(const std::string& dir, const TrainState& state, const Corpus& c) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  if (state.theta) save_dmv(*state.theta, (base / "dmv.model").string());
  if (state.cmst) save_cmst(*state.cmst, (base / "cmst.model").string());
  if (!state.trees.empty()) write_conllu_file(c, state.trees, (base / "trees.conllu").string());
  std::ofstream out(base / "metrics.csv");
  if (!out) throw ParseError("cannot write " + (base / "metrics.csv").string());
  write_metrics_csv(state.metrics, out);
}

}  // namespace jointdep
