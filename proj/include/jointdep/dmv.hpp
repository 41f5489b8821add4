#pragma once

// Dependency model with valence plus the structural constraint factor
// (bounded center-embedding depth, short-dependency penalty).

#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "jointdep/corpus.hpp"

namespace jointdep {

enum class Dir : int { kLeft = 0, kRight = 1 };
enum class Adjacency : int { kNoChild = 0, kHasChild = 1 };

inline constexpr int kUnboundedDepth = std::numeric_limits<int>::max();

struct DmvParams {
  Vocab vocab;
  Eigen::VectorXd root;                  // root(tag)
  std::array<Eigen::MatrixXd, 2> attach;  // attach[dir](head, child)
  std::array<Eigen::MatrixXd, 2> stop;    // stop[dir](head, adjacency)

  int num_tags() const { return vocab.size(); }
  static DmvParams zeros(const Vocab& vocab);
};

struct ConstraintConfig {
  int max_ce_depth = 1;       // kUnboundedDepth disables the cap
  double dep_len_beta = 0.1;  // weight of the per-arc (len - 1) penalty

  static ConstraintConfig unconstrained() { return {kUnboundedDepth, 0.0}; }
};

// Flat index space over every rule event; counts and log-probabilities share it.
class DmvEvents {
 public:
  explicit DmvEvents(int num_tags) : p_(num_tags) {}

  int size() const { return p_ + 2 * p_ * p_ + 8 * p_; }
  int root(int tag) const { return tag; }
  int attach(int head, Dir dir, int child) const {
    return p_ + (head * 2 + static_cast<int>(dir)) * p_ + child;
  }
  // decision 0 = stop, 1 = continue
  int stop(int head, Dir dir, Adjacency adj, int decision = 0) const {
    return p_ + 2 * p_ * p_ +
           ((head * 2 + static_cast<int>(dir)) * 2 + static_cast<int>(adj)) * 2 + decision;
  }
  int cont(int head, Dir dir, Adjacency adj) const { return stop(head, dir, adj, 1); }

  Eigen::VectorXd log_probs(const DmvParams& params) const;

 private:
  int p_;
};

enum class InitMode { kUniform, kHarmonic };

// `jitter` > 0 multiplies every entry by a seeded factor in [1, 1 + jitter)
// before renormalizing.
DmvParams init_params(const Corpus& c, InitMode mode, std::uint64_t seed = 0,
                      double jitter = 0.0);

// Normalizes event counts per conditioning context after adding `smoothing`.
// Contexts whose smoothed total is zero copy `fallback` when given, else go uniform.
DmvParams normalize_counts(const Vocab& vocab, const Eigen::VectorXd& counts, double smoothing,
                           const DmvParams* fallback = nullptr);

// Largest deviation of any distribution from summing to one.
double max_normalization_error(const DmvParams& params);

// Maximum number of strictly-interior subtree spans nested along any root path.
// A token is interior when its span lies strictly inside its head's span, i.e.
// it is not the outermost child on its side.
int ce_depth(const DepTree& tree);

// log P(x, y) + log f(x, y).
double tree_logprob(const Sentence& x, const DepTree& y, const DmvParams& params,
                    const ConstraintConfig& cfg);

// Hard event counts of one tree (root, attach, stop/continue).
void accumulate_tree_counts(const std::vector<int>& tags, const DepTree& tree,
                            const DmvEvents& events, Eigen::VectorXd& counts);

double inside_loglik(const Sentence& x, const DmvParams& params, const ConstraintConfig& cfg);

// Posterior-expected event counts for one sentence; returns the log marginal.
// Counts are added to `counts` only when the marginal is finite.
double expected_counts(const Sentence& x, const DmvParams& params, const ConstraintConfig& cfg,
                       Eigen::VectorXd& counts);

struct EmStepResult {
  DmvParams params;
  double loglik = 0.0;  // corpus log likelihood under the input parameters
  int skipped = 0;      // sentences with zero marginal
};

EmStepResult em_step(const Corpus& c, const DmvParams& params, const ConstraintConfig& cfg,
                     double smoothing = 0.0, int threads = 1);

struct ViterbiResult {
  DepTree tree;
  double score = 0.0;  // -tree_logprob + u . y
};

// argmin over projective trees of -log(P f) + u . y. An empty `prices` vector
// means zero prices. Throws InfeasibleError when every tree has zero weight.
ViterbiResult viterbi_decode(const Sentence& x, const DmvParams& params,
                             const ConstraintConfig& cfg,
                             const Eigen::Ref<const Eigen::VectorXd>& prices = Eigen::VectorXd());

DmvParams mstep_from_trees(const Corpus& c, const std::vector<DepTree>& trees,
                           double smoothing = 0.1, const Vocab* vocab = nullptr);

// Samples a corpus of projective trees from the generative model. Sentences
// longer than `max_len` are rejected and redrawn.
Corpus sample_corpus(const DmvParams& params, int num_sentences, int max_len, std::uint64_t seed);

// Versioned text format; values are written with 17 significant digits.
void write_dmv(const DmvParams& params, std::ostream& out);
DmvParams read_dmv(std::istream& in);
void save_dmv(const DmvParams& params, const std::string& path);
DmvParams load_dmv(const std::string& path);

}  // namespace jointdep
