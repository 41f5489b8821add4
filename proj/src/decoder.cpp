#include "jointdep/decoder.hpp"

#include <cmath>
#include <ostream>

#include <fmt/ostream.h>

#include "jointdep/eisner.hpp"
#include "jointdep/errors.hpp"

namespace jointdep {

double DDConfig::step_size(int k) const {
  switch (step_rule) {
    case StepRule::kConstant:
      return tau0;
    case StepRule::kInverse:
      return tau0 / k;
    case StepRule::kInverseSqrt:
      return tau0 / std::sqrt(static_cast<double>(k));
  }
  return tau0;
}

double joint_score(const Sentence& x, const DepTree& y, const DmvParams& theta,
                   const ConstraintConfig& cfg_f, const ArcProblem& problem, const CmstModel& m,
                   double g_weight) {
  const double f = -tree_logprob(x, y, theta, cfg_f);
  return f + g_weight * arc_costs(problem, m).dot(to_arc_vector(y));
}

double joint_objective(const Sentence& x, const DepTree& y, const DmvParams& theta,
                       const ConstraintConfig& cfg_f, const ArcProblem& problem,
                       const CmstModel& m, int corpus_size, double g_weight) {
  const double f = -tree_logprob(x, y, theta, cfg_f);
  return f + g_weight * sentence_objective(problem, to_arc_vector(y), m, corpus_size);
}

DDResult dd_decode(const Sentence& x, const DmvParams& theta, const ConstraintConfig& cfg_f,
                   const ArcProblem& problem, const CmstModel& m, const DDConfig& dd) {
  if (dd.max_iters < 1) throw ContractError("max_iters must be >= 1");
  if (dd.tau0 <= 0.0) throw ContractError("tau0 must be > 0");
  if (problem.n != x.n()) throw ContractError("arc problem does not match the sentence");
  const int n = x.n();
  const Eigen::VectorXd g_costs = dd.g_weight * arc_costs(problem, m);
  DualPrices prices = DualPrices::zeros(n);

  DDResult result;
  DepTree y_hat;
  DepTree z_hat;
  for (int k = 1; k <= dd.max_iters; ++k) {
    const ViterbiResult gen = viterbi_decode(x, theta, cfg_f, prices.u);
    const EisnerResult disc = eisner_min_cost(g_costs - prices.u);
    y_hat = gen.tree;
    z_hat = disc.tree;
    result.iterations = k;
    result.dual_value = gen.score + disc.cost;
    if (y_hat == z_hat) {
      result.tree = y_hat;
      result.converged = true;
      result.final_gap = 0;
      result.prices = prices.u;
      return result;
    }
    const Eigen::VectorXd diff = to_arc_vector(y_hat) - to_arc_vector(z_hat);
    result.final_gap = static_cast<int>((diff.array() != 0.0).count());
    prices.u += dd.step_size(k) * diff;
  }
  result.prices = prices.u;

  switch (dd.fallback) {
    case Fallback::kGenerative:
      result.tree = y_hat;
      break;
    case Fallback::kDiscriminative:
      result.tree = z_hat;
      break;
    case Fallback::kBetterObjective: {
      const double sy = joint_score(x, y_hat, theta, cfg_f, problem, m, dd.g_weight);
      const double sz = joint_score(x, z_hat, theta, cfg_f, problem, m, dd.g_weight);
      result.tree = sz < sy ? z_hat : y_hat;
      break;
    }
  }
  return result;
}

DDResult dd_decode(const Sentence& x, const DmvParams& theta, const ConstraintConfig& cfg_f,
                   const CmstModel& m, const DDConfig& dd) {
  return dd_decode(x, theta, cfg_f, make_problem(x, m), m, dd);
}

void write_dd_trace(const std::vector<DDResult>& results, std::ostream& out) {
  out << "sentence,iterations,converged,final_gap\n";
  for (size_t i = 0; i < results.size(); ++i) {
    fmt::print(out, "{},{},{},{}\n", i + 1, results[i].iterations, results[i].converged ? 1 : 0,
               results[i].final_gap);
  }
}

}  // namespace jointdep
