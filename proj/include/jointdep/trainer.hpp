#pragma once

// Training modes: each model alone, the generative model initialized from the
// discriminative parses, and joint training by alternating agreement decoding
// with per-model parameter updates.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jointdep/cmst.hpp"
#include "jointdep/decoder.hpp"
#include "jointdep/dmv.hpp"

namespace jointdep {

enum class TrainMode { kDmvOnly, kCmstOnly, kDmvInitFromCmst, kJoint };

struct TrainConfig {
  TrainMode mode = TrainMode::kJoint;
  int outer_iters = 10;
  int extra_separate_iters = 3;
  int em_pretrain_iters = 50;
  InitMode dmv_init = InitMode::kHarmonic;
  std::uint64_t seed = 1;
  double init_jitter = 0.0;
  ConstraintConfig constraints;
  double em_smoothing = 0.0;
  double mstep_smoothing = 0.1;
  double lambda = 1.0;
  double mu = 0.5;
  int fw_iters = 50;
  double sgd_lr = 0.05;
  int sgd_batch = 32;
  DDConfig dd;
  RuleSet rules = default_rules();
  int threads = 1;
};

struct IterationMetrics {
  int iteration = 0;
  double objective_before = 0.0;  // J at the decoded trees before the parameter update
  double objective = 0.0;         // J after the M-step and SGD update
  double dd_convergence = 0.0;    // fraction of sentences where agreement was reached
  double accuracy = -1.0;         // directed accuracy of the decoded trees, -1 without gold
  int infeasible = 0;             // sentences decoded without the depth cap
  int skipped = 0;                // sentences left out of this iteration's updates
};

struct TrainState {
  std::optional<DmvParams> theta;
  std::optional<CmstModel> cmst;
  std::vector<DepTree> trees;  // empty until trees have been decoded
  int iteration = 0;
  std::vector<IterationMetrics> metrics;
};

using IterationCallback = std::function<void(const TrainState&)>;

void validate(const TrainConfig& cfg);

// Separate pretraining of both models: init + EM, and Frank-Wolfe.
TrainState pretrain(const Corpus& c, const TrainConfig& cfg);

DmvParams train_dmv(const Corpus& c, const TrainConfig& cfg);
CmstModel train_cmst(const Corpus& c, const TrainConfig& cfg);

TrainState joint_train(const Corpus& c, const TrainConfig& cfg,
                       const IterationCallback& on_iteration = {});

// Generative model initialized by a hard M-step on the discriminative parses.
struct DInitResult {
  TrainState state;
  DmvParams initial_theta;  // before EM
};
DInitResult train_baseline_d_init(const Corpus& c, const TrainConfig& cfg);

// Dispatches on cfg.mode.
TrainState train(const Corpus& c, const TrainConfig& cfg,
                 const IterationCallback& on_iteration = {});

// Sum over sentences of F + g_weight * G at the given trees.
double joint_corpus_objective(const Corpus& c, const std::vector<DepTree>& trees,
                              const DmvParams& theta, const ConstraintConfig& cfg_f,
                              std::span<const ArcProblem> problems, const CmstModel& m,
                              double g_weight = 1.0);

// Writes dmv.model / cmst.model (when present), trees.conllu (when trees exist)
// and metrics.csv into `dir`, creating it.
void write_checkpoint(const std::string& dir, const TrainState& state, const Corpus& c);
void write_metrics_csv(const std::vector<IterationMetrics>& metrics, std::ostream& out);

}  // namespace jointdep
