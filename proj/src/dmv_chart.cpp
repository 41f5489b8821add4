// Split-head chart for the valence model with a center-embedding budget layer.
//
// Items for head h and layer b (every subtree below has depth <= b):
//   RS[b][h][j]  right half of h covering h..j, more right children to come
//   RC[b][h][j]  right half of h covering h..j, stopped
//   LS/LC        mirror images for the left half
//   RL[b][h][d]  h takes right child d as its outermost right child (d's left half inside)
//   RM[b][h][d]  same, but d is not outermost, so d's subtree must fit in layer b-1
//   LL/LM        mirror images
// Committing to "outermost" when a child is attached is what lets the budget
// be charged at attachment time. With no cap there is one layer and RM/LM
// reuse it.

#include <cstdint>

#include "jointdep/dmv.hpp"
#include "jointdep/errors.hpp"
#include "jointdep/logmath.hpp"
#include "jointdep/parallel.hpp"

namespace jointdep {

namespace {

struct HyperEdge {
  int tail0 = -1;
  int tail1 = -1;
  int event0 = -1;
  int event1 = -1;
  int slot = -1;
  double penalty = 0.0;
};

class DmvHypergraph {
 public:
  DmvHypergraph(const std::vector<int>& tags, const DmvEvents& events,
                const ConstraintConfig& cfg);

  int num_nodes() const { return static_cast<int>(first_edge_.size()) - 1; }
  int goal() const { return goal_; }
  int n() const { return n_; }
  const std::vector<HyperEdge>& edges() const { return edges_; }
  int first_edge(int node) const { return first_edge_[node]; }
  int last_edge(int node) const { return first_edge_[node + 1]; }

  Eigen::VectorXd edge_weights(const Eigen::VectorXd& log_probs,
                               const Eigen::Ref<const Eigen::VectorXd>& prices) const;

 private:
  enum Kind { kRS, kRC, kLS, kLC, kRL, kRM, kLL, kLM, kNumKinds };

  int& id(Kind k, int layer, int i, int j) {
    return ids_[((static_cast<size_t>(k) * layers_ + layer) * (n_ + 2) + i) * (n_ + 2) + j];
  }
  // Edges added between open_node and close_node belong to the new node.
  int open_node() const { return num_nodes(); }
  // Returns the node id, or -1 (and no node) when no edge was added.
  int close_node(int node) {
    if (static_cast<int>(edges_.size()) == first_edge_.back()) return -1;
    first_edge_.push_back(static_cast<int>(edges_.size()));
    return node;
  }
  void add_leaf(int event) { edges_.push_back({-1, -1, event, -1, -1, 0.0}); }
  void add_binary(int t0, int t1, int e0, int e1, int slot = -1, double penalty = 0.0) {
    if (t0 < 0 || t1 < 0) return;
    edges_.push_back({t0, t1, e0, e1, slot, penalty});
  }

  int n_;
  int layers_;
  std::vector<int> ids_;
  std::vector<HyperEdge> edges_;
  std::vector<int> first_edge_{0};
  int goal_ = -1;
};

DmvHypergraph::DmvHypergraph(const std::vector<int>& tags, const DmvEvents& ev,
                             const ConstraintConfig& cfg)
    : n_(static_cast<int>(tags.size())) {
  const bool bounded = cfg.max_ce_depth != kUnboundedDepth && cfg.max_ce_depth < n_ - 1;
  if (cfg.max_ce_depth < 0) throw ContractError("max_ce_depth must be >= 0");
  layers_ = bounded ? cfg.max_ce_depth + 1 : 1;
  ids_.assign(static_cast<size_t>(kNumKinds) * layers_ * (n_ + 2) * (n_ + 2), -1);
  const double beta = cfg.dep_len_beta;
  auto tag = [&](int pos) { return tags[pos - 1]; };
  auto adj = [](bool has) { return has ? Adjacency::kHasChild : Adjacency::kNoChild; };

  for (int w = 0; w < n_; ++w) {
    for (int b = 0; b < layers_; ++b) {
      const int mid = bounded ? b - 1 : b;  // layer of a non-outermost child, -1 if none
      for (int i = 1; i + w <= n_; ++i) {
        const int j = i + w;
        if (w == 0) {
          int v = open_node();
          add_leaf(-1);
          id(kRS, b, i, i) = close_node(v);
          v = open_node();
          add_leaf(ev.stop(tag(i), Dir::kRight, Adjacency::kNoChild));
          id(kRC, b, i, i) = close_node(v);
          v = open_node();
          add_leaf(-1);
          id(kLS, b, i, i) = close_node(v);
          v = open_node();
          add_leaf(ev.stop(tag(i), Dir::kLeft, Adjacency::kNoChild));
          id(kLC, b, i, i) = close_node(v);
          continue;
        }
        const double penalty = -beta * (w - 1);

        // Head i takes right child j.
        const int attach_r = ev.attach(tag(i), Dir::kRight, tag(j));
        for (const Kind kind : {kRL, kRM}) {
          const int child_layer = kind == kRL ? b : mid;
          const int v = open_node();
          if (child_layer >= 0) {
            for (int k = i; k < j; ++k) {
              add_binary(id(kRS, b, i, k), id(kLC, child_layer, k + 1, j),
                         ev.cont(tag(i), Dir::kRight, adj(k > i)), attach_r, arc_slot(n_, i, j),
                         penalty);
            }
          }
          id(kind, b, i, j) = close_node(v);
        }
        // Head j takes left child i.
        const int attach_l = ev.attach(tag(j), Dir::kLeft, tag(i));
        for (const Kind kind : {kLL, kLM}) {
          const int child_layer = kind == kLL ? b : mid;
          const int v = open_node();
          if (child_layer >= 0) {
            for (int k = i; k < j; ++k) {
              add_binary(id(kRC, child_layer, i, k), id(kLS, b, k + 1, j),
                         ev.cont(tag(j), Dir::kLeft, adj(k + 1 < j)), attach_l,
                         arc_slot(n_, j, i), penalty);
            }
          }
          id(kind, b, i, j) = close_node(v);
        }

        int v = open_node();
        if (mid >= 0) {
          for (int d = i + 1; d <= j; ++d) add_binary(id(kRM, b, i, d), id(kRC, mid, d, j), -1, -1);
        }
        id(kRS, b, i, j) = close_node(v);

        v = open_node();
        const int stop_r = ev.stop(tag(i), Dir::kRight, Adjacency::kHasChild);
        for (int d = i + 1; d <= j; ++d) add_binary(id(kRL, b, i, d), id(kRC, b, d, j), stop_r, -1);
        id(kRC, b, i, j) = close_node(v);

        v = open_node();
        if (mid >= 0) {
          for (int d = i; d < j; ++d) add_binary(id(kLC, mid, i, d), id(kLM, b, d, j), -1, -1);
        }
        id(kLS, b, i, j) = close_node(v);

        v = open_node();
        const int stop_l = ev.stop(tag(j), Dir::kLeft, Adjacency::kHasChild);
        for (int d = i; d < j; ++d) add_binary(id(kLC, b, i, d), id(kLL, b, d, j), stop_l, -1);
        id(kLC, b, i, j) = close_node(v);
      }
    }
  }

  const int top = layers_ - 1;
  const int v = open_node();
  for (int r = 1; r <= n_; ++r) {
    add_binary(id(kLC, top, 1, r), id(kRC, top, r, n_), ev.root(tag(r)), -1, arc_slot(n_, 0, r));
  }
  goal_ = close_node(v);
}

Eigen::VectorXd DmvHypergraph::edge_weights(const Eigen::VectorXd& log_probs,
                                            const Eigen::Ref<const Eigen::VectorXd>& prices) const {
  Eigen::VectorXd w(static_cast<Eigen::Index>(edges_.size()));
  const bool priced = prices.size() > 0;
  for (size_t e = 0; e < edges_.size(); ++e) {
    const auto& edge = edges_[e];
    double s = edge.penalty;
    if (edge.event0 >= 0) s += log_probs[edge.event0];
    if (edge.event1 >= 0) s += log_probs[edge.event1];
    if (priced && edge.slot >= 0) s -= prices[edge.slot];
    w[static_cast<Eigen::Index>(e)] = s;
  }
  return w;
}

double tail_sum(const HyperEdge& e, const Eigen::VectorXd& inside) {
  double s = 0.0;
  if (e.tail0 >= 0) s += inside[e.tail0];
  if (e.tail1 >= 0) s += inside[e.tail1];
  return s;
}

Eigen::VectorXd run_inside(const DmvHypergraph& g, const Eigen::VectorXd& weights) {
  Eigen::VectorXd inside = Eigen::VectorXd::Constant(g.num_nodes(), kLogZero);
  const auto& edges = g.edges();
  for (int v = 0; v < g.num_nodes(); ++v) {
    double acc = kLogZero;
    for (int e = g.first_edge(v); e < g.last_edge(v); ++e) {
      acc = log_add(acc, weights[e] + tail_sum(edges[e], inside));
    }
    inside[v] = acc;
  }
  return inside;
}

void check_sentence(const Sentence& x) {
  if (x.n() < 1) throw ContractError("sentence must contain at least one token");
}

}  // namespace

double inside_loglik(const Sentence& x, const DmvParams& params, const ConstraintConfig& cfg) {
  check_sentence(x);
  const DmvEvents ev(params.num_tags());
  const DmvHypergraph g(tag_ids(x, params.vocab), ev, cfg);
  if (g.goal() < 0) return kLogZero;
  const Eigen::VectorXd inside = run_inside(g, g.edge_weights(ev.log_probs(params), Eigen::VectorXd()));
  return inside[g.goal()];
}

double expected_counts(const Sentence& x, const DmvParams& params, const ConstraintConfig& cfg,
                       Eigen::VectorXd& counts) {
  check_sentence(x);
  const DmvEvents ev(params.num_tags());
  if (counts.size() != ev.size()) throw ContractError("count vector has the wrong size");
  const DmvHypergraph g(tag_ids(x, params.vocab), ev, cfg);
  if (g.goal() < 0) return kLogZero;
  const Eigen::VectorXd weights = g.edge_weights(ev.log_probs(params), Eigen::VectorXd());
  const Eigen::VectorXd inside = run_inside(g, weights);
  const double log_z = inside[g.goal()];
  if (log_z == kLogZero) return log_z;

  const auto& edges = g.edges();
  Eigen::VectorXd outside = Eigen::VectorXd::Constant(g.num_nodes(), kLogZero);
  outside[g.goal()] = 0.0;
  for (int v = g.num_nodes() - 1; v >= 0; --v) {
    if (outside[v] == kLogZero) continue;
    for (int e = g.first_edge(v); e < g.last_edge(v); ++e) {
      const auto& edge = edges[e];
      const double base = outside[v] + weights[e];
      const double posterior = std::exp(base + tail_sum(edge, inside) - log_z);
      if (posterior > 0.0) {
        if (edge.event0 >= 0) counts[edge.event0] += posterior;
        if (edge.event1 >= 0) counts[edge.event1] += posterior;
      }
      if (edge.tail0 >= 0) {
        outside[edge.tail0] = log_add(outside[edge.tail0], base + inside[edge.tail1]);
        outside[edge.tail1] = log_add(outside[edge.tail1], base + inside[edge.tail0]);
      }
    }
  }
  return log_z;
}

EmStepResult em_step(const Corpus& c, const DmvParams& params, const ConstraintConfig& cfg,
                     double smoothing, int threads) {
  if (smoothing < 0.0) throw ContractError("smoothing must be >= 0");
  const DmvEvents ev(params.num_tags());
  // Fixed-size blocks summed in index order keep results independent of the
  // worker count.
  constexpr int kBlock = 16;
  const int num_blocks = (c.N() + kBlock - 1) / kBlock;
  std::vector<Eigen::VectorXd> block_counts(static_cast<size_t>(num_blocks));
  std::vector<double> block_loglik(static_cast<size_t>(num_blocks), 0.0);
  std::vector<int> block_skipped(static_cast<size_t>(num_blocks), 0);

  parallel_for(num_blocks, threads, [&](int b) {
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(ev.size());
    const int end = std::min(c.N(), (b + 1) * kBlock);
    for (int s = b * kBlock; s < end; ++s) {
      const double ll = expected_counts(c.sentences[s], params, cfg, counts);
      if (ll == kLogZero) {
        ++block_skipped[b];
      } else {
        block_loglik[b] += ll;
      }
    }
    block_counts[b] = std::move(counts);
  });

  Eigen::VectorXd counts = Eigen::VectorXd::Zero(ev.size());
  EmStepResult result;
  for (int b = 0; b < num_blocks; ++b) {
    counts += block_counts[b];
    result.loglik += block_loglik[b];
    result.skipped += block_skipped[b];
  }
  result.params = normalize_counts(params.vocab, counts, smoothing, &params);
  return result;
}

ViterbiResult viterbi_decode(const Sentence& x, const DmvParams& params,
                             const ConstraintConfig& cfg,
                             const Eigen::Ref<const Eigen::VectorXd>& prices) {
  check_sentence(x);
  const int n = x.n();
  if (prices.size() != 0 && prices.size() != num_arc_slots(n)) {
    throw ContractError("price vector dimension does not match the sentence");
  }
  const DmvEvents ev(params.num_tags());
  const DmvHypergraph g(tag_ids(x, params.vocab), ev, cfg);
  if (g.goal() < 0) throw InfeasibleError("no tree satisfies the depth bound");
  const Eigen::VectorXd weights = g.edge_weights(ev.log_probs(params), prices);
  const auto& edges = g.edges();

  Eigen::VectorXd best = Eigen::VectorXd::Constant(g.num_nodes(), kLogZero);
  std::vector<int> back(static_cast<size_t>(g.num_nodes()), -1);
  for (int v = 0; v < g.num_nodes(); ++v) {
    for (int e = g.first_edge(v); e < g.last_edge(v); ++e) {
      const double s = weights[e] + tail_sum(edges[e], best);
      if (s > best[v]) {
        best[v] = s;
        back[v] = e;
      }
    }
  }
  if (best[g.goal()] == kLogZero) throw InfeasibleError("every tree has zero probability");

  ViterbiResult result;
  result.tree.heads.assign(static_cast<size_t>(n), -1);
  std::vector<int> stack{g.goal()};
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    const auto& edge = edges[back[v]];
    if (edge.slot >= 0) result.tree.heads[slot_dep(n, edge.slot) - 1] = slot_head(n, edge.slot);
    if (edge.tail0 >= 0) stack.push_back(edge.tail0);
    if (edge.tail1 >= 0) stack.push_back(edge.tail1);
  }
  result.score = -best[g.goal()];
  return result;
}

}  // namespace jointdep
