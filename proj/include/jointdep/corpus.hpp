#pragma once

// CoNLL-U corpora, dependency trees and the flattened arc-slot indexing shared
// by both parsing models.

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace jointdep {

struct Token {
  std::string form;
  std::string upos;
  std::optional<int> gold_head;  // 0 = root, 1-based otherwise
  bool is_punct = false;
  // Raw CoNLL-U columns, kept so that writing preserves everything but HEAD.
  std::array<std::string, 10> columns;
};

struct Sentence {
  std::vector<Token> tokens;
  std::vector<std::string> comments;

  int n() const { return static_cast<int>(tokens.size()); }
  bool has_gold() const;
};

// Ordered tag inventory with first-seen indexing.
class Vocab {
 public:
  Vocab() = default;
  explicit Vocab(const std::vector<std::string>& tags);

  int add(const std::string& tag);
  std::optional<int> find(const std::string& tag) const;
  const std::string& operator[](int i) const { return tags_[static_cast<size_t>(i)]; }
  int size() const { return static_cast<int>(tags_.size()); }
  bool empty() const { return tags_.empty(); }
  const std::vector<std::string>& tags() const { return tags_; }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tags_ == b.tags_; }

 private:
  std::vector<std::string> tags_;
  std::unordered_map<std::string, int> index_;
};

struct Corpus {
  std::vector<Sentence> sentences;
  Vocab pos_vocab;

  int N() const { return static_cast<int>(sentences.size()); }
};

// heads[j] is the head of token j+1; 0 denotes the root.
struct DepTree {
  std::vector<int> heads;

  int n() const { return static_cast<int>(heads.size()); }
  friend bool operator==(const DepTree&, const DepTree&) = default;
};

// 0/1 indicator over the n*n arc slots (see arc_slot).
using ArcVector = Eigen::VectorXd;

// Slot of arc head -> dep, with head in [0, n], dep in [1, n], head != dep.
// Slots are grouped by dependent; within a group heads run 0..n skipping dep.
inline int arc_slot(int n, int head, int dep) {
  return (dep - 1) * n + (head < dep ? head : head - 1);
}
inline int num_arc_slots(int n) { return n * n; }
inline int slot_dep(int n, int slot) { return slot / n + 1; }
inline int slot_head(int n, int slot) {
  const int dep = slot_dep(n, slot);
  const int h = slot % n;
  return h < dep ? h : h + 1;
}

bool is_single_rooted_tree(const DepTree& tree);
bool is_projective(const DepTree& tree);
// Single-rooted, acyclic and projective (root arc included in the crossing check).
bool is_valid_projective_tree(const DepTree& tree);

ArcVector to_arc_vector(const DepTree& tree);
// Throws ContractError unless `bits` encodes a valid projective tree.
DepTree to_dep_tree(const ArcVector& bits);

// Subtree span [left, right] of every token (1-based, indexed by token - 1).
std::vector<std::pair<int, int>> subtree_spans(const DepTree& tree);

DepTree gold_tree(const Sentence& s);
std::vector<DepTree> gold_trees(const Corpus& c);

// Maps each token's UPOS into `vocab`; unseen tags map to `unknown`.
std::vector<int> tag_ids(const Sentence& s, const Vocab& vocab, int unknown = 0);

Corpus parse_conllu(std::istream& in);
Corpus read_conllu_file(const std::string& path);
void write_conllu(const Corpus& c, const std::vector<DepTree>& predicted, std::ostream& out);
void write_conllu_file(const Corpus& c, const std::vector<DepTree>& predicted,
                       const std::string& path);

Corpus filter_corpus(const Corpus& c, int max_len, bool count_punct = true);

// Sentence length under the filtering policy.
int sentence_length(const Sentence& s, bool count_punct);

}  // namespace jointdep
