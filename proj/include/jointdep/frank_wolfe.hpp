#pragma once

// Frank-Wolfe over the relaxed tree polytope for the discriminative-clustering
// objective. The weights are eliminated in closed form (ridge regression), so
// the iterate is the set of relaxed per-sentence arc vectors Y and the
// optimal w(Y), which is linear in Y.

#include <memory>
#include <vector>

#include <Eigen/Core>

#include "jointdep/cmst.hpp"

namespace jointdep {

class RidgeSolver;

struct FwIteration {
  double objective = 0.0;  // after the step
  double gap = 0.0;        // duality gap at the iterate the step started from
  double step = 0.0;       // line-search step length in [0, 1]
};

class FrankWolfe {
 public:
  FrankWolfe(std::vector<ArcProblem> problems, CmstModel model, int threads = 1);
  ~FrankWolfe();
  FrankWolfe(FrankWolfe&&) noexcept;
  FrankWolfe& operator=(FrankWolfe&&) noexcept;

  // Relaxed start: per sentence, the midpoint of the left- and right-branching chains.
  void init_chain_mixture();
  // Puts every sentence at the vertex of the given tree.
  void warm_start(const std::vector<DepTree>& trees);

  FwIteration step();
  // Total objective sum_a G_a(y_a, w) at the current iterate.
  double objective() const;
  // sum_a g_a . (y_a - s_a) where s_a is the LMO vertex for gradient g_a.
  double duality_gap() const;

  const CmstModel& model() const { return model_; }
  void set_weights(const Eigen::VectorXd& w);
  const std::vector<Eigen::VectorXd>& relaxed() const { return relaxed_; }
  const std::vector<ArcProblem>& problems() const { return problems_; }

 private:
  Eigen::VectorXd solve_weights(const std::vector<Eigen::VectorXd>& targets) const;
  double objective_at(const Eigen::VectorXd& w) const;
  std::vector<Eigen::VectorXd> gradients() const;

  std::vector<ArcProblem> problems_;
  CmstModel model_;
  std::vector<Eigen::VectorXd> relaxed_;
  std::unique_ptr<RidgeSolver> solver_;
  int threads_;
};

struct FwResult {
  CmstModel model;
  std::vector<double> objectives;  // index 0 = before the first step
  std::vector<double> gaps;        // gap at the start of each step
  double final_gap = 0.0;          // gap at the returned iterate
};

FwResult fw_train(const Corpus& c, CmstModel m, int iters, int threads = 1);

}  // namespace jointdep
