#pragma once

// Discriminative-clustering parser: sparse arc features, POS-pair rule prior,
// the per-sentence convex objective and its projective decoders.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "jointdep/corpus.hpp"

namespace jointdep {

inline constexpr const char* kRootTag = "ROOT";

// Directed (head tag -> dependent tag) pairs; head may be ROOT.
class RuleSet {
 public:
  RuleSet() = default;
  RuleSet(std::initializer_list<std::pair<std::string, std::string>> rules);

  void add(const std::string& head, const std::string& dep) { rules_.emplace(head, dep); }
  bool contains(const std::string& head, const std::string& dep) const {
    return rules_.count({head, dep}) > 0;
  }
  size_t size() const { return rules_.size(); }
  bool empty() const { return rules_.empty(); }
  const std::set<std::pair<std::string, std::string>>& rules() const { return rules_; }

  friend bool operator==(const RuleSet&, const RuleSet&) = default;

 private:
  std::set<std::pair<std::string, std::string>> rules_;
};

RuleSet default_rules();
// One `HEAD DEP` pair per line; `#` starts a comment.
RuleSet parse_rules(std::istream& in);
RuleSet load_rules(const std::string& path);
void write_rules(const RuleSet& rules, std::ostream& out);

enum class FeatureKind : std::uint8_t {
  kBias,
  kHead,
  kDep,
  kPair,
  kPairDir,
  kPairDirDist,
  kDirDist,
  kRootArc,
  kRootDep,
};

// Fields that a template does not use are -1.
struct FeatureKey {
  FeatureKind kind = FeatureKind::kBias;
  int head = -1;  // tag id
  int dep = -1;   // tag id
  int dir = -1;   // 0 = dependent left of head, 1 = right
  int bin = -1;   // distance bin

  std::uint64_t packed() const;
  friend bool operator==(const FeatureKey&, const FeatureKey&) = default;
};

// Distance bins {1, 2, 3, 4, 5, 6-10, >10} -> 0..6.
int distance_bin(int distance);

// Feature index over a training corpus. Tag ids: corpus tags in first-seen
// order, then UNK, then ROOT.
class FeatureTemplate {
 public:
  FeatureTemplate();
  static FeatureTemplate build(const Corpus& c);
  static FeatureTemplate from_parts(const Vocab& tags, const std::vector<FeatureKey>& keys);

  int dimension() const { return static_cast<int>(keys_.size()); }
  const Vocab& tags() const { return tags_; }
  const std::vector<FeatureKey>& keys() const { return keys_; }
  std::optional<int> find(const FeatureKey& key) const;

  int unk_id() const { return tags_.size(); }
  int root_id() const { return tags_.size() + 1; }
  std::vector<int> sentence_tags(const Sentence& x) const;

  friend bool operator==(const FeatureTemplate& a, const FeatureTemplate& b) {
    return a.tags_ == b.tags_ && a.keys_ == b.keys_;
  }

 private:
  int add(const FeatureKey& key);

  Vocab tags_;
  std::vector<FeatureKey> keys_;
  std::unordered_map<std::uint64_t, int> index_;
};

// Features firing on arc head -> dep (head 0 = root) given per-token tag ids.
std::vector<FeatureKey> arc_features(const std::vector<int>& tags, int root_id, int head, int dep);

// One row per arc slot, 0/1 entries.
using FeatureMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

FeatureMatrix extract_features(const Sentence& x, const FeatureTemplate& t);

// 1.0 on every arc slot whose (head tag -> dep tag) pair is a rule.
Eigen::VectorXd rule_vector(const Sentence& x, const RuleSet& r);

struct CmstModel {
  Eigen::VectorXd w;
  double lambda = 1.0;
  double mu = 0.5;
  FeatureTemplate templates;
  RuleSet rules;

  // Zero weights sized to a template built from `c`.
  static CmstModel create(const Corpus& c, RuleSet rules, double lambda = 1.0, double mu = 0.5);
};

// Precomputed per-sentence data: X (n*n x dim) and the rule vector v.
struct ArcProblem {
  int n = 0;
  FeatureMatrix X;
  Eigen::VectorXd v;
};

ArcProblem make_problem(const Sentence& x, const CmstModel& m);
std::vector<ArcProblem> make_problems(const Corpus& c, const CmstModel& m, int threads = 1);

// 1/(2n) |y - Xw|^2 + lambda/(2N) |w|^2 - mu v.y, for y anywhere in the box
// (relaxed points included).
double sentence_objective(const ArcProblem& p, const Eigen::Ref<const Eigen::VectorXd>& y,
                          const CmstModel& m, int corpus_size);
double sentence_objective(const Sentence& x, const ArcVector& y, const CmstModel& m,
                          int corpus_size);

// Per-arc linear cost of a 0/1 tree vector: (1 - 2 (Xw)_i)/(2n) - mu v_i - u_i.
// For tree vectors the objective minus its y-independent terms equals the
// sum of these costs over the tree's arcs.
Eigen::VectorXd arc_costs(const ArcProblem& p, const CmstModel& m,
                          const Eigen::Ref<const Eigen::VectorXd>& prices = Eigen::VectorXd());

struct LmoResult {
  DepTree tree;
  double score = 0.0;  // attained linear cost
};

LmoResult lmo_decode(const ArcProblem& p, const CmstModel& m,
                     const Eigen::Ref<const Eigen::VectorXd>& prices = Eigen::VectorXd());
LmoResult lmo_decode(const Sentence& x, const CmstModel& m,
                     const Eigen::Ref<const Eigen::VectorXd>& prices = Eigen::VectorXd());

// d/dw of sentence_objective: (1/n) X^T (X w - y) + (lambda / N) w.
Eigen::VectorXd weight_gradient(const ArcProblem& p, const Eigen::Ref<const Eigen::VectorXd>& y,
                                const Eigen::Ref<const Eigen::VectorXd>& w, double lambda,
                                int corpus_size);

// One pass of mini-batch SGD in corpus order with fixed target trees; each step
// uses the mean per-sentence gradient of its batch.
CmstModel sgd_update(std::span<const ArcProblem> problems, const std::vector<ArcVector>& trees,
                     CmstModel m, double lr, int corpus_size, int batch_size = 32);
CmstModel sgd_update(const Corpus& batch, const std::vector<ArcVector>& trees, CmstModel m,
                     double lr, int corpus_size, int batch_size = 32);

// Sum over sentences of sentence_objective at fixed vertices.
double corpus_objective(std::span<const ArcProblem> problems, const std::vector<ArcVector>& trees,
                        const CmstModel& m);

void write_cmst(const CmstModel& m, std::ostream& out);
CmstModel read_cmst(std::istream& in);
void save_cmst(const CmstModel& m, const std::string& path);
CmstModel load_cmst(const std::string& path);

}  // namespace jointdep
