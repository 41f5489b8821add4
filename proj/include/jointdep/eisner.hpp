#pragma once

#include <Eigen/Core>

#include "jointdep/corpus.hpp"

namespace jointdep {

struct EisnerResult {
  DepTree tree;
  double cost = 0.0;
};

// Minimum-cost projective single-rooted tree under arc-factored costs.
// `arc_costs` is indexed by arc_slot(n, head, dep) and has n*n entries.
// Among equal-cost derivations the smallest split point wins.
EisnerResult eisner_min_cost(const Eigen::Ref<const Eigen::VectorXd>& arc_costs);

}  // namespace jointdep
