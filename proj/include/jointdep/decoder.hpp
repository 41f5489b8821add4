#pragma once

// Agreement decoding of the two models by dual decomposition: both decoders
// are re-run with per-arc prices until they return the same tree.

#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "jointdep/cmst.hpp"
#include "jointdep/dmv.hpp"

namespace jointdep {

enum class StepRule { kConstant, kInverse, kInverseSqrt };
enum class Fallback { kGenerative, kDiscriminative, kBetterObjective };

struct DualPrices {
  Eigen::VectorXd u;  // one entry per arc slot

  static DualPrices zeros(int n) { return {Eigen::VectorXd::Zero(num_arc_slots(n))}; }
};

struct DDConfig {
  double tau0 = 1.0;
  StepRule step_rule = StepRule::kInverseSqrt;
  int max_iters = 50;
  Fallback fallback = Fallback::kBetterObjective;
  double g_weight = 1.0;  // scale of the discriminative objective

  double step_size(int k) const;  // k is 1-based
};

struct DDResult {
  DepTree tree;
  bool converged = false;
  int iterations = 0;
  int final_gap = 0;  // disagreeing arc slots in the last iteration
  // Lagrangian dual value of the last iteration: a lower bound on the joint
  // objective minus its tree-independent terms.
  double dual_value = 0.0;
  Eigen::VectorXd prices;  // u when decoding stopped
};

// F(y) + g_weight * G(y) without G's tree-independent terms:
// -log(P f) + g_weight * sum of lmo arc costs over y.
double joint_score(const Sentence& x, const DepTree& y, const DmvParams& theta,
                   const ConstraintConfig& cfg_f, const ArcProblem& problem, const CmstModel& m,
                   double g_weight = 1.0);

// Full joint objective F + G including lambda/(2N) |w|^2.
double joint_objective(const Sentence& x, const DepTree& y, const DmvParams& theta,
                       const ConstraintConfig& cfg_f, const ArcProblem& problem,
                       const CmstModel& m, int corpus_size, double g_weight = 1.0);

DDResult dd_decode(const Sentence& x, const DmvParams& theta, const ConstraintConfig& cfg_f,
                   const ArcProblem& problem, const CmstModel& m, const DDConfig& dd);
DDResult dd_decode(const Sentence& x, const DmvParams& theta, const ConstraintConfig& cfg_f,
                   const CmstModel& m, const DDConfig& dd);

// One CSV row per sentence: sentence,iterations,converged,final_gap
void write_dd_trace(const std::vector<DDResult>& results, std::ostream& out);

}  // namespace jointdep
