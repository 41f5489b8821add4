#include "jointdep/eisner.hpp"

#include <limits>

#include "jointdep/errors.hpp"

namespace jointdep {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Complete / incomplete spans over positions 1..n; [L] = head at right end,
// [R] = head at left end.
struct Charts {
  explicit Charts(int n)
      : complete_l(Eigen::MatrixXd::Constant(n + 2, n + 2, kInf)),
        complete_r(Eigen::MatrixXd::Constant(n + 2, n + 2, kInf)),
        incomplete_l(Eigen::MatrixXd::Constant(n + 2, n + 2, kInf)),
        incomplete_r(Eigen::MatrixXd::Constant(n + 2, n + 2, kInf)),
        bp_cl(Eigen::MatrixXi::Constant(n + 2, n + 2, -1)),
        bp_cr(Eigen::MatrixXi::Constant(n + 2, n + 2, -1)),
        bp_il(Eigen::MatrixXi::Constant(n + 2, n + 2, -1)),
        bp_ir(Eigen::MatrixXi::Constant(n + 2, n + 2, -1)) {}

  Eigen::MatrixXd complete_l, complete_r, incomplete_l, incomplete_r;
  Eigen::MatrixXi bp_cl, bp_cr, bp_il, bp_ir;
};

void backtrack_complete(const Charts& c, int i, int j, bool head_right, std::vector<int>& heads);

void backtrack_incomplete(const Charts& c, int i, int j, bool head_right,
                          std::vector<int>& heads) {
  if (head_right) {
    heads[i - 1] = j;
  } else {
    heads[j - 1] = i;
  }
  const int k = head_right ? c.bp_il(i, j) : c.bp_ir(i, j);
  backtrack_complete(c, i, k, false, heads);
  backtrack_complete(c, k + 1, j, true, heads);
}

void backtrack_complete(const Charts& c, int i, int j, bool head_right, std::vector<int>& heads) {
  if (i == j) return;
  if (head_right) {
    const int k = c.bp_cl(i, j);
    backtrack_complete(c, i, k, true, heads);
    backtrack_incomplete(c, k, j, true, heads);
  } else {
    const int k = c.bp_cr(i, j);
    backtrack_incomplete(c, i, k, false, heads);
    backtrack_complete(c, k, j, false, heads);
  }
}

}  // namespace

EisnerResult eisner_min_cost(const Eigen::Ref<const Eigen::VectorXd>& arc_costs) {
  int n = 0;
  while (static_cast<Eigen::Index>(n) * n < arc_costs.size()) ++n;
  if (n == 0 || static_cast<Eigen::Index>(n) * n != arc_costs.size()) {
    throw ContractError("arc cost vector must have n*n entries with n >= 1");
  }
  auto cost = [&](int h, int d) { return arc_costs[arc_slot(n, h, d)]; };

  Charts c(n);
  for (int i = 1; i <= n; ++i) {
    c.complete_l(i, i) = 0.0;
    c.complete_r(i, i) = 0.0;
  }
  for (int width = 1; width < n; ++width) {
    for (int i = 1; i + width <= n; ++i) {
      const int j = i + width;
      double best = kInf;
      int arg = -1;
      for (int k = i; k < j; ++k) {
        const double v = c.complete_r(i, k) + c.complete_l(k + 1, j);
        if (v < best) {
          best = v;
          arg = k;
        }
      }
      c.incomplete_l(i, j) = best + cost(j, i);
      c.incomplete_r(i, j) = best + cost(i, j);
      c.bp_il(i, j) = arg;
      c.bp_ir(i, j) = arg;

      best = kInf;
      arg = -1;
      for (int k = i; k < j; ++k) {
        const double v = c.complete_l(i, k) + c.incomplete_l(k, j);
        if (v < best) {
          best = v;
          arg = k;
        }
      }
      c.complete_l(i, j) = best;
      c.bp_cl(i, j) = arg;

      best = kInf;
      arg = -1;
      for (int k = i + 1; k <= j; ++k) {
        const double v = c.incomplete_r(i, k) + c.complete_r(k, j);
        if (v < best) {
          best = v;
          arg = k;
        }
      }
      c.complete_r(i, j) = best;
      c.bp_cr(i, j) = arg;
    }
  }

  double best = kInf;
  int root = -1;
  for (int r = 1; r <= n; ++r) {
    const double v = cost(0, r) + c.complete_l(1, r) + c.complete_r(r, n);
    if (v < best) {
      best = v;
      root = r;
    }
  }
  if (root < 0) throw ContractError("arc costs must not be NaN or +inf everywhere");

  EisnerResult result;
  result.tree.heads.assign(static_cast<size_t>(n), -1);
  result.tree.heads[root - 1] = 0;
  backtrack_complete(c, 1, root, true, result.tree.heads);
  backtrack_complete(c, root, n, false, result.tree.heads);
  result.cost = best;
  return result;
}

}  // namespace jointdep
