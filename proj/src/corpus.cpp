#include "jointdep/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "jointdep/errors.hpp"

namespace jointdep {

bool Sentence::has_gold() const {
  return std::all_of(tokens.begin(), tokens.end(),
                     [](const Token& t) { return t.gold_head.has_value(); });
}

Vocab::Vocab(const std::vector<std::string>& tags) {
  for (const auto& t : tags) add(t);
}

int Vocab::add(const std::string& tag) {
  auto [it, inserted] = index_.emplace(tag, size());
  if (inserted) tags_.push_back(tag);
  return it->second;
}

std::optional<int> Vocab::find(const std::string& tag) const {
  auto it = index_.find(tag);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool is_single_rooted_tree(const DepTree& tree) {
  const int n = tree.n();
  if (n == 0) return false;
  int roots = 0;
  for (int j = 0; j < n; ++j) {
    const int h = tree.heads[j];
    if (h < 0 || h > n || h == j + 1) return false;
    if (h == 0) ++roots;
  }
  if (roots != 1) return false;
  // Every token must reach the root within n steps.
  for (int j = 1; j <= n; ++j) {
    int cur = j;
    int steps = 0;
    while (cur != 0 && steps <= n) {
      cur = tree.heads[cur - 1];
      ++steps;
    }
    if (cur != 0) return false;
  }
  return true;
}

bool is_projective(const DepTree& tree) {
  const int n = tree.n();
  for (int a = 1; a <= n; ++a) {
    const int l1 = std::min(a, tree.heads[a - 1]);
    const int r1 = std::max(a, tree.heads[a - 1]);
    for (int b = 1; b <= n; ++b) {
      const int l2 = std::min(b, tree.heads[b - 1]);
      const int r2 = std::max(b, tree.heads[b - 1]);
      if (l1 < l2 && l2 < r1 && r1 < r2) return false;
    }
  }
  return true;
}

bool is_valid_projective_tree(const DepTree& tree) {
  return is_single_rooted_tree(tree) && is_projective(tree);
}

ArcVector to_arc_vector(const DepTree& tree) {
  const int n = tree.n();
  ArcVector bits = ArcVector::Zero(num_arc_slots(n));
  for (int d = 1; d <= n; ++d) bits[arc_slot(n, tree.heads[d - 1], d)] = 1.0;
  return bits;
}

DepTree to_dep_tree(const ArcVector& bits) {
  const auto slots = bits.size();
  int n = 0;
  while (static_cast<Eigen::Index>(n) * n < slots) ++n;
  if (static_cast<Eigen::Index>(n) * n != slots || n == 0) {
    throw ContractError("arc vector dimension is not a positive square");
  }
  DepTree tree{std::vector<int>(static_cast<size_t>(n), -1)};
  for (int s = 0; s < slots; ++s) {
    if (bits[s] == 0.0) continue;
    if (bits[s] != 1.0) throw ContractError("arc vector entries must be 0 or 1");
    const int d = slot_dep(n, s);
    if (tree.heads[d - 1] != -1) throw ContractError("token has more than one head");
    tree.heads[d - 1] = slot_head(n, s);
  }
  if (!is_valid_projective_tree(tree)) {
    throw ContractError("arc vector does not encode a projective single-rooted tree");
  }
  return tree;
}

std::vector<std::pair<int, int>> subtree_spans(const DepTree& tree) {
  const int n = tree.n();
  std::vector<std::pair<int, int>> spans(static_cast<size_t>(n));
  for (int j = 1; j <= n; ++j) spans[j - 1] = {j, j};
  // Propagate each token's position up its head chain.
  for (int j = 1; j <= n; ++j) {
    int cur = tree.heads[j - 1];
    int steps = 0;
    while (cur != 0 && steps++ < n) {
      auto& sp = spans[cur - 1];
      sp.first = std::min(sp.first, j);
      sp.second = std::max(sp.second, j);
      cur = tree.heads[cur - 1];
    }
  }
  return spans;
}

DepTree gold_tree(const Sentence& s) {
  DepTree tree;
  tree.heads.reserve(s.tokens.size());
  for (const auto& t : s.tokens) {
    if (!t.gold_head) throw ContractError("sentence is missing gold heads");
    tree.heads.push_back(*t.gold_head);
  }
  return tree;
}

std::vector<DepTree> gold_trees(const Corpus& c) {
  std::vector<DepTree> out;
  out.reserve(c.sentences.size());
  for (size_t i = 0; i < c.sentences.size(); ++i) {
    if (!c.sentences[i].has_gold()) {
      throw ContractError(fmt::format("sentence {} is missing gold heads", i + 1));
    }
    out.push_back(gold_tree(c.sentences[i]));
  }
  return out;
}

std::vector<int> tag_ids(const Sentence& s, const Vocab& vocab, int unknown) {
  std::vector<int> ids;
  ids.reserve(s.tokens.size());
  for (const auto& t : s.tokens) ids.push_back(vocab.find(t.upos).value_or(unknown));
  return ids;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::optional<int> to_int(const std::string& s) {
  int v = 0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
  return v;
}

}  // namespace

Corpus parse_conllu(std::istream& in) {
  Corpus corpus;
  Sentence current;
  std::vector<long> head_lines;
  long line_no = 0;

  auto flush = [&]() {
    if (current.tokens.empty()) {
      current.comments.clear();
      return;
    }
    const int n = current.n();
    for (int j = 0; j < n; ++j) {
      const auto& h = current.tokens[j].gold_head;
      if (h && (*h < 0 || *h > n)) throw ParseError("head index out of range", head_lines[j]);
      if (h && *h == j + 1) throw ParseError("token is its own head", head_lines[j]);
    }
    for (const auto& t : current.tokens) corpus.pos_vocab.add(t.upos);
    corpus.sentences.push_back(std::move(current));
    current = Sentence{};
    head_lines.clear();
  };

  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') {
      current.comments.push_back(line);
      continue;
    }
    auto cols = split_tabs(line);
    if (cols.size() != 10) {
      throw ParseError("expected 10 tab-separated columns, found " + std::to_string(cols.size()),
                       line_no);
    }
    const std::string& id = cols[0];
    if (id.find('-') != std::string::npos || id.find('.') != std::string::npos) continue;
    auto idx = to_int(id);
    if (!idx) throw ParseError("non-integer token id '" + id + "'", line_no);
    if (*idx != current.n() + 1) throw ParseError("token ids must be consecutive from 1", line_no);

    Token tok;
    tok.form = cols[1];
    tok.upos = cols[3];
    tok.is_punct = tok.upos == "PUNCT";
    if (cols[6] != "_") {
      auto h = to_int(cols[6]);
      if (!h) throw ParseError("non-integer head '" + cols[6] + "'", line_no);
      tok.gold_head = *h;
    }
    std::move(cols.begin(), cols.end(), tok.columns.begin());
    current.tokens.push_back(std::move(tok));
    head_lines.push_back(line_no);
  }
  flush();
  return corpus;
}

Corpus read_conllu_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return parse_conllu(in);
}

void write_conllu(const Corpus& c, const std::vector<DepTree>& predicted, std::ostream& out) {
  if (predicted.size() != c.sentences.size()) {
    throw ContractError("predicted tree count does not match corpus size");
  }
  for (size_t i = 0; i < c.sentences.size(); ++i) {
    const auto& s = c.sentences[i];
    if (predicted[i].n() != s.n()) {
      throw ContractError("tree length does not match sentence " + std::to_string(i + 1));
    }
    for (const auto& comment : s.comments) out << comment << '\n';
    for (int j = 0; j < s.n(); ++j) {
      const auto& t = s.tokens[j];
      std::array<std::string, 10> cols = t.columns;
      if (cols[0].empty()) {
        cols = {std::to_string(j + 1), t.form, "_", t.upos, "_", "_", "", "_", "_", "_"};
      }
      cols[6] = std::to_string(predicted[i].heads[j]);
      for (size_t k = 0; k < cols.size(); ++k) {
        if (k) out << '\t';
        out << cols[k];
      }
      out << '\n';
    }
    out << '\n';
  }
}

void write_conllu_file(const Corpus& c, const std::vector<DepTree>& predicted,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  write_conllu(c, predicted, out);
}

int sentence_length(const Sentence& s, bool count_punct) {
  if (count_punct) return s.n();
  return static_cast<int>(std::count_if(s.tokens.begin(), s.tokens.end(),
                                        [](const Token& t) { return !t.is_punct; }));
}

Corpus filter_corpus(const Corpus& c, int max_len, bool count_punct) {
  if (max_len < 1) throw ContractError("max_len must be >= 1");
  Corpus out;
  for (const auto& s : c.sentences) {
    if (sentence_length(s, count_punct) > max_len) continue;
    for (const auto& t : s.tokens) out.pos_vocab.add(t.upos);
    out.sentences.push_back(s);
  }
  return out;
}

}  // namespace jointdep
