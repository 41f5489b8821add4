#include "jointdep/frank_wolfe.hpp"

#include <algorithm>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include "jointdep/eisner.hpp"
#include "jointdep/errors.hpp"
#include "jointdep/parallel.hpp"

namespace jointdep {

// Solves (sum_a X_a^T X_a / n_a + lambda I) w = rhs. Direct sparse LDL^T below
// kDirectLimit features, conjugate gradients (relative residual 1e-8) above.
class RidgeSolver {
 public:
  static constexpr int kDirectLimit = 5000;

  RidgeSolver(const std::vector<ArcProblem>& problems, double lambda, int dim) {
    Eigen::SparseMatrix<double> gram(dim, dim);
    for (const auto& p : problems) {
      const Eigen::SparseMatrix<double> x = p.X;
      Eigen::SparseMatrix<double> xtx = x.transpose() * x;
      gram += xtx / static_cast<double>(p.n);
    }
    Eigen::SparseMatrix<double> eye(dim, dim);
    eye.setIdentity();
    gram += lambda * eye;
    gram.makeCompressed();
    direct_ = dim < kDirectLimit;
    if (direct_) {
      ldlt_.compute(gram);
      if (ldlt_.info() != Eigen::Success) throw ContractError("ridge system is not positive definite");
    } else {
      cg_.setTolerance(1e-8);
      cg_.compute(gram);
    }
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs, const Eigen::VectorXd& guess) const {
    if (direct_) return ldlt_.solve(rhs);
    return cg_.solveWithGuess(rhs, guess);
  }

 private:
  bool direct_ = true;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg_;
};

FrankWolfe::FrankWolfe(std::vector<ArcProblem> problems, CmstModel model, int threads)
    : problems_(std::move(problems)), model_(std::move(model)), threads_(threads) {
  if (model_.lambda <= 0.0) throw ContractError("Frank-Wolfe training needs lambda > 0");
  for (const auto& p : problems_) {
    if (p.X.cols() != model_.w.size()) throw ContractError("feature dimension mismatch");
  }
  solver_ = std::make_unique<RidgeSolver>(problems_, model_.lambda,
                                          static_cast<int>(model_.w.size()));
  init_chain_mixture();
}

FrankWolfe::~FrankWolfe() = default;
FrankWolfe::FrankWolfe(FrankWolfe&&) noexcept = default;
FrankWolfe& FrankWolfe::operator=(FrankWolfe&&) noexcept = default;

void FrankWolfe::init_chain_mixture() {
  relaxed_.clear();
  for (const auto& p : problems_) {
    DepTree left{std::vector<int>(static_cast<size_t>(p.n))};
    DepTree right{std::vector<int>(static_cast<size_t>(p.n))};
    for (int j = 0; j < p.n; ++j) {
      left.heads[j] = j;                         // token j+1 headed by token j
      right.heads[j] = j + 1 < p.n ? j + 2 : 0;  // token j+1 headed by token j+2
    }
    relaxed_.push_back(0.5 * (to_arc_vector(left) + to_arc_vector(right)));
  }
}

void FrankWolfe::warm_start(const std::vector<DepTree>& trees) {
  if (trees.size() != problems_.size()) throw ContractError("tree count does not match corpus size");
  for (size_t i = 0; i < trees.size(); ++i) {
    if (trees[i].n() != problems_[i].n) throw ContractError("tree length mismatch");
    relaxed_[i] = to_arc_vector(trees[i]);
  }
}

void FrankWolfe::set_weights(const Eigen::VectorXd& w) {
  if (w.size() != model_.w.size()) throw ContractError("weight vector dimension mismatch");
  model_.w = w;
}

Eigen::VectorXd FrankWolfe::solve_weights(const std::vector<Eigen::VectorXd>& targets) const {
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(model_.w.size());
  for (size_t i = 0; i < problems_.size(); ++i) {
    rhs += problems_[i].X.transpose() * targets[i] / static_cast<double>(problems_[i].n);
  }
  return solver_->solve(rhs, model_.w);
}

double FrankWolfe::objective_at(const Eigen::VectorXd& w) const {
  double total = 0.5 * model_.lambda * w.squaredNorm();
  for (size_t i = 0; i < problems_.size(); ++i) {
    const auto& p = problems_[i];
    total += (relaxed_[i] - p.X * w).squaredNorm() / (2.0 * p.n) - model_.mu * p.v.dot(relaxed_[i]);
  }
  return total;
}

double FrankWolfe::objective() const { return objective_at(model_.w); }

std::vector<Eigen::VectorXd> FrankWolfe::gradients() const {
  std::vector<Eigen::VectorXd> grads(problems_.size());
  for (size_t i = 0; i < problems_.size(); ++i) {
    const auto& p = problems_[i];
    grads[i] = (relaxed_[i] - p.X * model_.w) / static_cast<double>(p.n) - model_.mu * p.v;
  }
  return grads;
}

double FrankWolfe::duality_gap() const {
  const auto grads = gradients();
  std::vector<double> gaps(problems_.size());
  parallel_for(static_cast<int>(problems_.size()), threads_, [&](int i) {
    const auto vertex = to_arc_vector(eisner_min_cost(grads[i]).tree);
    gaps[i] = grads[i].dot(relaxed_[i] - vertex);
  });
  double total = 0.0;
  for (double g : gaps) total += g;
  return total;
}

FwIteration FrankWolfe::step() {
  FwIteration it;
  const Eigen::VectorXd refreshed = solve_weights(relaxed_);
  if (objective_at(refreshed) <= objective()) model_.w = refreshed;

  const auto grads = gradients();
  const int count = static_cast<int>(problems_.size());
  std::vector<Eigen::VectorXd> directions(problems_.size());
  std::vector<double> gaps(problems_.size());
  parallel_for(count, threads_, [&](int i) {
    directions[i] = to_arc_vector(eisner_min_cost(grads[i]).tree) - relaxed_[i];
    gaps[i] = -grads[i].dot(directions[i]);
  });
  for (double g : gaps) it.gap += g;

  // Along Y + t D the optimal weights are w + t w1, and the objective is the
  // quadratic a t^2 + b t + const.
  const Eigen::VectorXd w1 = solve_weights(directions);
  double a = 0.5 * model_.lambda * w1.squaredNorm();
  double b = model_.lambda * model_.w.dot(w1);
  for (int i = 0; i < count; ++i) {
    const auto& p = problems_[i];
    const Eigen::VectorXd r0 = relaxed_[i] - p.X * model_.w;
    const Eigen::VectorXd r1 = directions[i] - p.X * w1;
    a += r1.squaredNorm() / (2.0 * p.n);
    b += r0.dot(r1) / p.n - model_.mu * p.v.dot(directions[i]);
  }
  double t = 0.0;
  if (a > 0.0) {
    t = std::clamp(-b / (2.0 * a), 0.0, 1.0);
  } else if (b < 0.0) {
    t = 1.0;
  }
  if (t > 0.0) {
    const double before = objective();
    const Eigen::VectorXd w_old = model_.w;
    const auto y_old = relaxed_;
    for (int i = 0; i < count; ++i) relaxed_[i] += t * directions[i];
    model_.w += t * w1;
    // Rounding can make a vanishing step nominally uphill; undo it then.
    if (objective() > before) {
      model_.w = w_old;
      relaxed_ = y_old;
      t = 0.0;
    }
  }
  it.step = t;
  it.objective = objective();
  return it;
}

FwResult fw_train(const Corpus& c, CmstModel m, int iters, int threads) {
  if (iters < 1) throw ContractError("Frank-Wolfe needs at least one iteration");
  auto problems = make_problems(c, m, threads);
  FrankWolfe fw(std::move(problems), std::move(m), threads);
  FwResult result;
  result.objectives.push_back(fw.objective());
  for (int k = 0; k < iters; ++k) {
    const auto it = fw.step();
    result.objectives.push_back(it.objective);
    result.gaps.push_back(it.gap);
  }
  result.final_gap = fw.duality_gap();
  result.model = fw.model();
  return result;
}

}  // namespace jointdep
