#include "jointdep/dmv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "jointdep/errors.hpp"
#include "jointdep/logmath.hpp"
#include "jointdep/rng.hpp"

namespace jointdep {

namespace {

constexpr std::array<Dir, 2> kDirs = {Dir::kLeft, Dir::kRight};
constexpr std::array<Adjacency, 2> kAdjs = {Adjacency::kNoChild, Adjacency::kHasChild};

int idx(Dir d) { return static_cast<int>(d); }
int idx(Adjacency a) { return static_cast<int>(a); }

const char* dir_name(Dir d) { return d == Dir::kLeft ? "left" : "right"; }
const char* adj_name(Adjacency a) { return a == Adjacency::kNoChild ? "nochild" : "haschild"; }

// Children of every head on one side, nearest first.
std::vector<std::vector<int>> children_by_side(const DepTree& tree, Dir dir) {
  const int n = tree.n();
  std::vector<std::vector<int>> kids(static_cast<size_t>(n + 1));
  if (dir == Dir::kLeft) {
    for (int d = n; d >= 1; --d) {
      const int h = tree.heads[d - 1];
      if (h > d) kids[h].push_back(d);
    }
  } else {
    for (int d = 1; d <= n; ++d) {
      const int h = tree.heads[d - 1];
      if (h != 0 && h < d) kids[h].push_back(d);
    }
  }
  return kids;
}

void check_tree(const Sentence& x, const DepTree& y) {
  if (y.n() != x.n()) throw ContractError("tree length does not match sentence length");
  if (!is_valid_projective_tree(y)) throw ContractError("tree is not projective and single-rooted");
}

}  // namespace

DmvParams DmvParams::zeros(const Vocab& vocab) {
  const int p = vocab.size();
  DmvParams out;
  out.vocab = vocab;
  out.root = Eigen::VectorXd::Zero(p);
  for (int d = 0; d < 2; ++d) {
    out.attach[d] = Eigen::MatrixXd::Zero(p, p);
    out.stop[d] = Eigen::MatrixXd::Zero(p, 2);
  }
  return out;
}

Eigen::VectorXd DmvEvents::log_probs(const DmvParams& params) const {
  Eigen::VectorXd lp(size());
  for (int t = 0; t < p_; ++t) lp[root(t)] = safe_log(params.root[t]);
  for (Dir d : kDirs) {
    for (int h = 0; h < p_; ++h) {
      for (int c = 0; c < p_; ++c) lp[attach(h, d, c)] = safe_log(params.attach[idx(d)](h, c));
      for (Adjacency a : kAdjs) {
        const double s = params.stop[idx(d)](h, idx(a));
        lp[stop(h, d, a)] = safe_log(s);
        lp[cont(h, d, a)] = safe_log(1.0 - s);
      }
    }
  }
  return lp;
}

DmvParams normalize_counts(const Vocab& vocab, const Eigen::VectorXd& counts, double smoothing,
                           const DmvParams* fallback) {
  const int p = vocab.size();
  const DmvEvents ev(p);
  if (counts.size() != ev.size()) throw ContractError("count vector has the wrong size");
  if (smoothing < 0.0) throw ContractError("smoothing must be >= 0");
  DmvParams out = DmvParams::zeros(vocab);

  double total = 0.0;
  for (int t = 0; t < p; ++t) total += counts[ev.root(t)] + smoothing;
  for (int t = 0; t < p; ++t) {
    out.root[t] = total > 0.0 ? (counts[ev.root(t)] + smoothing) / total
                  : fallback  ? fallback->root[t]
                              : 1.0 / p;
  }
  for (Dir d : kDirs) {
    for (int h = 0; h < p; ++h) {
      total = 0.0;
      for (int c = 0; c < p; ++c) total += counts[ev.attach(h, d, c)] + smoothing;
      for (int c = 0; c < p; ++c) {
        out.attach[idx(d)](h, c) = total > 0.0 ? (counts[ev.attach(h, d, c)] + smoothing) / total
                                   : fallback  ? fallback->attach[idx(d)](h, c)
                                               : 1.0 / p;
      }
      for (Adjacency a : kAdjs) {
        const double s = counts[ev.stop(h, d, a)] + smoothing;
        const double k = counts[ev.cont(h, d, a)] + smoothing;
        out.stop[idx(d)](h, idx(a)) = s + k > 0.0 ? s / (s + k)
                                      : fallback  ? fallback->stop[idx(d)](h, idx(a))
                                                  : 0.5;
      }
    }
  }
  return out;
}

double max_normalization_error(const DmvParams& params) {
  double err = std::abs(params.root.sum() - 1.0);
  for (int d = 0; d < 2; ++d) {
    const Eigen::VectorXd rows = params.attach[d].rowwise().sum();
    err = std::max(err, (rows.array() - 1.0).abs().maxCoeff());
    const auto& s = params.stop[d];
    if (s.size() > 0 && (s.minCoeff() < 0.0 || s.maxCoeff() > 1.0)) {
      err = std::max(err, std::max(-s.minCoeff(), s.maxCoeff() - 1.0));
    }
  }
  return err;
}

DmvParams init_params(const Corpus& c, InitMode mode, std::uint64_t seed, double jitter) {
  if (c.pos_vocab.empty()) throw ContractError("cannot initialize parameters over an empty vocabulary");
  const int p = c.pos_vocab.size();
  const DmvEvents ev(p);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(ev.size());

  for (int t = 0; t < p; ++t) counts[ev.root(t)] = 1.0;
  for (Dir d : kDirs) {
    for (int h = 0; h < p; ++h) {
      for (Adjacency a : kAdjs) {
        counts[ev.stop(h, d, a)] = 1.0;
        counts[ev.cont(h, d, a)] = 1.0;
      }
      if (mode == InitMode::kUniform) {
        for (int ch = 0; ch < p; ++ch) counts[ev.attach(h, d, ch)] = 1.0;
      }
    }
  }
  if (mode == InitMode::kHarmonic) {
    for (const auto& s : c.sentences) {
      const auto tags = tag_ids(s, c.pos_vocab);
      const int n = s.n();
      for (int h = 1; h <= n; ++h) {
        for (int d = 1; d <= n; ++d) {
          if (h == d) continue;
          const Dir dir = d < h ? Dir::kLeft : Dir::kRight;
          counts[ev.attach(tags[h - 1], dir, tags[d - 1])] += 1.0 / (std::abs(h - d) + 1);
        }
      }
    }
  }
  if (jitter > 0.0) {
    Rng rng(seed);
    for (Eigen::Index i = 0; i < counts.size(); ++i) counts[i] *= 1.0 + jitter * rng.uniform();
  }
  return normalize_counts(c.pos_vocab, counts, 0.0);
}

int ce_depth(const DepTree& tree) {
  const int n = tree.n();
  const auto spans = subtree_spans(tree);
  std::vector<int> interior(static_cast<size_t>(n + 1), 0);
  for (int d = 1; d <= n; ++d) {
    const int h = tree.heads[d - 1];
    if (h == 0) continue;
    const auto [l, r] = spans[d - 1];
    const auto [hl, hr] = spans[h - 1];
    interior[d] = (hl < l && r < hr) ? 1 : 0;
  }
  int depth = 0;
  for (int d = 1; d <= n; ++d) {
    int count = 0;
    int steps = 0;
    for (int cur = d; cur != 0 && steps <= n; cur = tree.heads[cur - 1], ++steps) {
      count += interior[cur];
    }
    depth = std::max(depth, count);
  }
  return depth;
}

void accumulate_tree_counts(const std::vector<int>& tags, const DepTree& tree,
                            const DmvEvents& events, Eigen::VectorXd& counts) {
  const int n = tree.n();
  for (int d = 1; d <= n; ++d) {
    if (tree.heads[d - 1] == 0) counts[events.root(tags[d - 1])] += 1.0;
  }
  for (Dir dir : kDirs) {
    const auto kids = children_by_side(tree, dir);
    for (int h = 1; h <= n; ++h) {
      const int th = tags[h - 1];
      Adjacency adj = Adjacency::kNoChild;
      for (int child : kids[h]) {
        counts[events.cont(th, dir, adj)] += 1.0;
        counts[events.attach(th, dir, tags[child - 1])] += 1.0;
        adj = Adjacency::kHasChild;
      }
      counts[events.stop(th, dir, adj)] += 1.0;
    }
  }
}

double tree_logprob(const Sentence& x, const DepTree& y, const DmvParams& params,
                    const ConstraintConfig& cfg) {
  check_tree(x, y);
  if (cfg.max_ce_depth != kUnboundedDepth && ce_depth(y) > cfg.max_ce_depth) return kLogZero;
  const auto tags = tag_ids(x, params.vocab);
  const DmvEvents ev(params.num_tags());
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(ev.size());
  accumulate_tree_counts(tags, y, ev, counts);
  const Eigen::VectorXd lp = ev.log_probs(params);

  double total = 0.0;
  for (Eigen::Index i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0.0) continue;
    if (lp[i] == kLogZero) return kLogZero;
    total += counts[i] * lp[i];
  }
  double penalty = 0.0;
  for (int d = 1; d <= y.n(); ++d) {
    const int h = y.heads[d - 1];
    if (h != 0) penalty += std::abs(h - d) - 1;
  }
  return total - cfg.dep_len_beta * penalty;
}

DmvParams mstep_from_trees(const Corpus& c, const std::vector<DepTree>& trees, double smoothing,
                           const Vocab* vocab) {
  if (trees.size() != c.sentences.size()) {
    throw ContractError("tree count does not match corpus size");
  }
  const Vocab& v = vocab ? *vocab : c.pos_vocab;
  const DmvEvents ev(v.size());
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(ev.size());
  for (size_t i = 0; i < trees.size(); ++i) {
    check_tree(c.sentences[i], trees[i]);
    accumulate_tree_counts(tag_ids(c.sentences[i], v), trees[i], ev, counts);
  }
  return normalize_counts(v, counts, smoothing);
}

namespace {

struct SampledNode {
  int tag = 0;
  std::vector<SampledNode> left;   // nearest first
  std::vector<SampledNode> right;  // nearest first
};

bool sample_node(const DmvParams& params, Rng& rng, int tag, int& budget, SampledNode& out) {
  out.tag = tag;
  if (--budget < 0) return false;
  for (Dir dir : kDirs) {
    auto& side = dir == Dir::kLeft ? out.left : out.right;
    Adjacency adj = Adjacency::kNoChild;
    while (rng.uniform() >= params.stop[idx(dir)](tag, idx(adj))) {
      const int child = rng.categorical(params.attach[idx(dir)].row(tag));
      side.emplace_back();
      if (!sample_node(params, rng, child, budget, side.back())) return false;
      adj = Adjacency::kHasChild;
    }
  }
  return true;
}

// Writes tags/heads in surface order with heads resolved to 1-based positions.
int layout(const SampledNode& node, int head_pos, std::vector<int>& tags,
           std::vector<int>& heads) {
  std::vector<const SampledNode*> left_nodes;
  for (auto it = node.left.rbegin(); it != node.left.rend(); ++it) {
    left_nodes.push_back(&*it);
  }
  // Left children precede the head; their head is patched once it is placed.
  std::vector<int> left_positions;
  for (const auto* child : left_nodes) left_positions.push_back(layout(*child, -1, tags, heads));
  tags.push_back(node.tag);
  heads.push_back(head_pos);
  const int self = static_cast<int>(tags.size());
  for (int pos : left_positions) heads[pos - 1] = self;
  for (const auto& child : node.right) layout(child, self, tags, heads);
  return self;
}

}  // namespace

Corpus sample_corpus(const DmvParams& params, int num_sentences, int max_len, std::uint64_t seed) {
  if (max_len < 1) throw ContractError("max_len must be >= 1");
  Rng rng(seed);
  Corpus out;
  constexpr int kMaxAttempts = 10000;
  for (int i = 0; i < num_sentences; ++i) {
    bool done = false;
    for (int attempt = 0; attempt < kMaxAttempts && !done; ++attempt) {
      SampledNode root;
      int budget = max_len;
      const int root_tag = rng.categorical(params.root);
      if (!sample_node(params, rng, root_tag, budget, root)) continue;
      std::vector<int> tags;
      std::vector<int> heads;
      layout(root, 0, tags, heads);
      Sentence s;
      for (size_t j = 0; j < tags.size(); ++j) {
        Token t;
        t.upos = params.vocab[tags[j]];
        t.form = fmt::format("{}{}", t.upos, j + 1);
        t.gold_head = heads[j];
        t.is_punct = t.upos == "PUNCT";
        t.columns = {std::to_string(j + 1), t.form, "_", t.upos, "_", "_",
                     std::to_string(heads[j]), "dep", "_", "_"};
        s.tokens.push_back(std::move(t));
      }
      for (const auto& t : s.tokens) out.pos_vocab.add(t.upos);
      out.sentences.push_back(std::move(s));
      done = true;
    }
    if (!done) throw ContractError("could not sample a sentence within max_len");
  }
  return out;
}

void write_dmv(const DmvParams& params, std::ostream& out) {
  const int p = params.num_tags();
  fmt::print(out, "jointdep-dmv 1\ntags {}\n", p);
  for (int t = 0; t < p; ++t) fmt::print(out, "{}\n", params.vocab[t]);
  for (int t = 0; t < p; ++t) fmt::print(out, "root {} {:.16e}\n", params.vocab[t], params.root[t]);
  for (Dir d : kDirs) {
    for (int h = 0; h < p; ++h) {
      for (int c = 0; c < p; ++c) {
        fmt::print(out, "attach {} {} {} {:.16e}\n", params.vocab[h], dir_name(d), params.vocab[c],
                   params.attach[idx(d)](h, c));
      }
    }
  }
  for (Dir d : kDirs) {
    for (int h = 0; h < p; ++h) {
      for (Adjacency a : kAdjs) {
        fmt::print(out, "stop {} {} {} {:.16e}\n", params.vocab[h], dir_name(d), adj_name(a),
                   params.stop[idx(d)](h, idx(a)));
      }
    }
  }
  out << "end\n";
}

namespace {

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::vector<std::string> next() {
    std::string line;
    if (!std::getline(in_, line)) throw ParseError("unexpected end of model file", line_no_);
    ++line_no_;
    std::istringstream ss(line);
    std::vector<std::string> fields;
    for (std::string f; ss >> f;) fields.push_back(f);
    return fields;
  }
  long line() const { return line_no_; }

 private:
  std::istream& in_;
  long line_no_ = 0;
};

double parse_double(const std::string& s, long line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || s.empty()) throw ParseError("bad number '" + s + "'", line);
  return v;
}

}  // namespace

DmvParams read_dmv(std::istream& in) {
  LineReader reader(in);
  auto header = reader.next();
  if (header.size() != 2 || header[0] != "jointdep-dmv") {
    throw ParseError("not a jointdep-dmv model file", reader.line());
  }
  if (header[1] != "1") throw ParseError("unsupported dmv model version " + header[1], reader.line());
  auto tags_line = reader.next();
  if (tags_line.size() != 2 || tags_line[0] != "tags") throw ParseError("expected 'tags <count>'", reader.line());
  const int p = static_cast<int>(parse_double(tags_line[1], reader.line()));
  if (p < 1) throw ParseError("tag count must be positive", reader.line());
  Vocab vocab;
  for (int t = 0; t < p; ++t) {
    auto f = reader.next();
    if (f.size() != 1) throw ParseError("expected one tag per line", reader.line());
    vocab.add(f[0]);
  }
  if (vocab.size() != p) throw ParseError("duplicate tag in vocabulary", reader.line());
  DmvParams params = DmvParams::zeros(vocab);

  auto tag = [&](const std::string& s) {
    auto t = vocab.find(s);
    if (!t) throw ParseError("unknown tag '" + s + "'", reader.line());
    return *t;
  };
  auto dir = [&](const std::string& s) {
    if (s == "left") return Dir::kLeft;
    if (s == "right") return Dir::kRight;
    throw ParseError("bad direction '" + s + "'", reader.line());
  };
  auto adj = [&](const std::string& s) {
    if (s == "nochild") return Adjacency::kNoChild;
    if (s == "haschild") return Adjacency::kHasChild;
    throw ParseError("bad adjacency '" + s + "'", reader.line());
  };

  const long expected = p + 2L * p * p + 4L * p;
  long seen = 0;
  while (true) {
    auto f = reader.next();
    if (f.size() == 1 && f[0] == "end") break;
    if (f.size() == 3 && f[0] == "root") {
      params.root[tag(f[1])] = parse_double(f[2], reader.line());
    } else if (f.size() == 5 && f[0] == "attach") {
      params.attach[idx(dir(f[2]))](tag(f[1]), tag(f[3])) = parse_double(f[4], reader.line());
    } else if (f.size() == 5 && f[0] == "stop") {
      params.stop[idx(dir(f[2]))](tag(f[1]), idx(adj(f[3]))) = parse_double(f[4], reader.line());
    } else {
      throw ParseError("unrecognized model line", reader.line());
    }
    ++seen;
  }
  if (seen != expected) {
    throw ParseError(fmt::format("expected {} parameter lines, found {}", expected, seen), reader.line());
  }
  return params;
}

void save_dmv(const DmvParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  write_dmv(params, out);
}

DmvParams load_dmv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return read_dmv(in);
}

}  // namespace jointdep
