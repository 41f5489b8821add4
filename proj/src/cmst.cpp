#include "jointdep/cmst.hpp"

#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "jointdep/eisner.hpp"
#include "jointdep/errors.hpp"
#include "jointdep/parallel.hpp"

namespace jointdep {

RuleSet::RuleSet(std::initializer_list<std::pair<std::string, std::string>> rules)
    : rules_(rules.begin(), rules.end()) {}

RuleSet default_rules() {
  return {{"ROOT", "VERB"}, {"ROOT", "NOUN"}, {"VERB", "NOUN"}, {"VERB", "PRON"},
          {"VERB", "ADV"},  {"VERB", "VERB"}, {"VERB", "ADP"},  {"NOUN", "ADJ"},
          {"NOUN", "DET"},  {"NOUN", "NOUN"}, {"NOUN", "NUM"},  {"ADP", "NOUN"},
          {"ADP", "PRON"},  {"ADJ", "ADV"}};
}

RuleSet parse_rules(std::istream& in) {
  RuleSet rules;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::vector<std::string> fields;
    for (std::string f; ss >> f;) fields.push_back(f);
    if (fields.empty()) continue;
    if (fields.size() != 2) throw ParseError("expected 'HEADTAG DEPTAG'", line_no);
    if (fields[1] == kRootTag) throw ParseError("ROOT cannot be a dependent", line_no);
    rules.add(fields[0], fields[1]);
  }
  return rules;
}

RuleSet load_rules(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return parse_rules(in);
}

void write_rules(const RuleSet& rules, std::ostream& out) {
  for (const auto& [head, dep] : rules.rules()) out << head << ' ' << dep << '\n';
}

std::uint64_t FeatureKey::packed() const {
  auto field = [](int v) { return static_cast<std::uint64_t>(v + 1); };
  return static_cast<std::uint64_t>(kind) | field(head) << 8 | field(dep) << 28 |
         field(dir) << 48 | field(bin) << 52;
}

int distance_bin(int distance) {
  if (distance <= 5) return distance - 1;
  return distance <= 10 ? 5 : 6;
}

std::vector<FeatureKey> arc_features(const std::vector<int>& tags, int root_id, int head,
                                     int dep) {
  const int td = tags[dep - 1];
  if (head == 0) {
    return {{FeatureKind::kBias},
            {FeatureKind::kDep, -1, td},
            {FeatureKind::kRootArc},
            {FeatureKind::kRootDep, root_id, td}};
  }
  const int th = tags[head - 1];
  const int dir = dep < head ? 0 : 1;
  const int bin = distance_bin(std::abs(head - dep));
  return {{FeatureKind::kBias},
          {FeatureKind::kHead, th},
          {FeatureKind::kDep, -1, td},
          {FeatureKind::kPair, th, td},
          {FeatureKind::kPairDir, th, td, dir},
          {FeatureKind::kPairDirDist, th, td, dir, bin},
          {FeatureKind::kDirDist, -1, -1, dir, bin}};
}

FeatureTemplate::FeatureTemplate() { add({FeatureKind::kBias}); }

int FeatureTemplate::add(const FeatureKey& key) {
  auto [it, inserted] = index_.emplace(key.packed(), dimension());
  if (inserted) keys_.push_back(key);
  return it->second;
}

std::optional<int> FeatureTemplate::find(const FeatureKey& key) const {
  auto it = index_.find(key.packed());
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<int> FeatureTemplate::sentence_tags(const Sentence& x) const {
  return tag_ids(x, tags_, unk_id());
}

FeatureTemplate FeatureTemplate::build(const Corpus& c) {
  FeatureTemplate t;
  t.tags_ = c.pos_vocab;
  for (const auto& s : c.sentences) {
    const auto tags = t.sentence_tags(s);
    for (int d = 1; d <= s.n(); ++d) {
      for (int h = 0; h <= s.n(); ++h) {
        if (h == d) continue;
        for (const auto& key : arc_features(tags, t.root_id(), h, d)) t.add(key);
      }
    }
  }
  return t;
}

FeatureTemplate FeatureTemplate::from_parts(const Vocab& tags, const std::vector<FeatureKey>& keys) {
  FeatureTemplate t;
  t.tags_ = tags;
  t.keys_.clear();
  t.index_.clear();
  for (const auto& key : keys) {
    if (t.add(key) != t.dimension() - 1) throw ParseError("duplicate feature in template list");
  }
  if (keys.empty() || !(keys.front() == FeatureKey{FeatureKind::kBias})) {
    throw ParseError("feature 0 must be the bias");
  }
  return t;
}

FeatureMatrix extract_features(const Sentence& x, const FeatureTemplate& t) {
  const int n = x.n();
  const auto tags = t.sentence_tags(x);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<size_t>(n) * n * 7);
  for (int d = 1; d <= n; ++d) {
    for (int h = 0; h <= n; ++h) {
      if (h == d) continue;
      const int row = arc_slot(n, h, d);
      for (const auto& key : arc_features(tags, t.root_id(), h, d)) {
        if (auto col = t.find(key)) triplets.emplace_back(row, *col, 1.0);
      }
    }
  }
  FeatureMatrix X(num_arc_slots(n), t.dimension());
  X.setFromTriplets(triplets.begin(), triplets.end());
  return X;
}

Eigen::VectorXd rule_vector(const Sentence& x, const RuleSet& r) {
  const int n = x.n();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(num_arc_slots(n));
  if (r.empty()) return v;
  for (int d = 1; d <= n; ++d) {
    for (int h = 0; h <= n; ++h) {
      if (h == d) continue;
      const std::string& head = h == 0 ? std::string(kRootTag) : x.tokens[h - 1].upos;
      if (r.contains(head, x.tokens[d - 1].upos)) v[arc_slot(n, h, d)] = 1.0;
    }
  }
  return v;
}

CmstModel CmstModel::create(const Corpus& c, RuleSet rules, double lambda, double mu) {
  if (lambda < 0.0 || mu < 0.0) throw ContractError("lambda and mu must be >= 0");
  CmstModel m;
  m.templates = FeatureTemplate::build(c);
  m.w = Eigen::VectorXd::Zero(m.templates.dimension());
  m.lambda = lambda;
  m.mu = mu;
  m.rules = std::move(rules);
  return m;
}

ArcProblem make_problem(const Sentence& x, const CmstModel& m) {
  if (x.n() < 1) throw ContractError("sentence must contain at least one token");
  return {x.n(), extract_features(x, m.templates), rule_vector(x, m.rules)};
}

std::vector<ArcProblem> make_problems(const Corpus& c, const CmstModel& m, int threads) {
  std::vector<ArcProblem> out(c.sentences.size());
  parallel_for(c.N(), threads, [&](int i) { out[i] = make_problem(c.sentences[i], m); });
  return out;
}

namespace {

void check_dims(const ArcProblem& p, Eigen::Index y_size, const CmstModel& m) {
  if (y_size != num_arc_slots(p.n)) throw ContractError("arc vector dimension mismatch");
  if (m.w.size() != p.X.cols()) throw ContractError("weight vector dimension mismatch");
}

}  // namespace

double sentence_objective(const ArcProblem& p, const Eigen::Ref<const Eigen::VectorXd>& y,
                          const CmstModel& m, int corpus_size) {
  check_dims(p, y.size(), m);
  if (corpus_size < 1) throw ContractError("corpus size must be >= 1");
  const Eigen::VectorXd residual = y - p.X * m.w;
  return residual.squaredNorm() / (2.0 * p.n) +
         m.lambda / (2.0 * corpus_size) * m.w.squaredNorm() - m.mu * p.v.dot(y);
}

double sentence_objective(const Sentence& x, const ArcVector& y, const CmstModel& m,
                          int corpus_size) {
  return sentence_objective(make_problem(x, m), y, m, corpus_size);
}

Eigen::VectorXd arc_costs(const ArcProblem& p, const CmstModel& m,
                          const Eigen::Ref<const Eigen::VectorXd>& prices) {
  check_dims(p, p.v.size(), m);
  Eigen::VectorXd cost = (1.0 - 2.0 * (p.X * m.w).array()).matrix() / (2.0 * p.n) - m.mu * p.v;
  if (prices.size() != 0) {
    if (prices.size() != cost.size()) throw ContractError("price vector dimension mismatch");
    cost -= prices;
  }
  return cost;
}

LmoResult lmo_decode(const ArcProblem& p, const CmstModel& m,
                     const Eigen::Ref<const Eigen::VectorXd>& prices) {
  auto best = eisner_min_cost(arc_costs(p, m, prices));
  return {std::move(best.tree), best.cost};
}

LmoResult lmo_decode(const Sentence& x, const CmstModel& m,
                     const Eigen::Ref<const Eigen::VectorXd>& prices) {
  return lmo_decode(make_problem(x, m), m, prices);
}

Eigen::VectorXd weight_gradient(const ArcProblem& p, const Eigen::Ref<const Eigen::VectorXd>& y,
                                const Eigen::Ref<const Eigen::VectorXd>& w, double lambda,
                                int corpus_size) {
  const Eigen::VectorXd residual = p.X * w - y;
  Eigen::VectorXd g = p.X.transpose() * residual;
  g /= p.n;
  g += (lambda / corpus_size) * w;
  return g;
}

CmstModel sgd_update(std::span<const ArcProblem> problems, const std::vector<ArcVector>& trees,
                     CmstModel m, double lr, int corpus_size, int batch_size) {
  if (problems.size() != trees.size()) throw ContractError("tree count does not match batch size");
  if (lr <= 0.0) throw ContractError("learning rate must be > 0");
  if (batch_size < 1) throw ContractError("batch size must be >= 1");
  const size_t count = problems.size();
  for (size_t start = 0; start < count; start += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(count, start + static_cast<size_t>(batch_size));
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(m.w.size());
    for (size_t i = start; i < end; ++i) {
      check_dims(problems[i], trees[i].size(), m);
      grad += weight_gradient(problems[i], trees[i], m.w, m.lambda, corpus_size);
    }
    m.w -= (lr / static_cast<double>(end - start)) * grad;
  }
  return m;
}

CmstModel sgd_update(const Corpus& batch, const std::vector<ArcVector>& trees, CmstModel m,
                     double lr, int corpus_size, int batch_size) {
  const auto problems = make_problems(batch, m);
  return sgd_update(problems, trees, std::move(m), lr, corpus_size, batch_size);
}

double corpus_objective(std::span<const ArcProblem> problems, const std::vector<ArcVector>& trees,
                        const CmstModel& m) {
  if (problems.size() != trees.size()) throw ContractError("tree count does not match corpus size");
  const int N = static_cast<int>(problems.size());
  double total = 0.0;
  for (size_t i = 0; i < problems.size(); ++i) total += sentence_objective(problems[i], trees[i], m, N);
  return total;
}

namespace {

constexpr const char* kKindNames[] = {"bias",          "head",     "dep",      "pair", "pair_dir",
                                      "pair_dir_dist", "dir_dist", "root_arc", "root_dep"};

FeatureKind kind_from_name(const std::string& s, long line) {
  for (int k = 0; k < 9; ++k) {
    if (s == kKindNames[k]) return static_cast<FeatureKind>(k);
  }
  throw ParseError("unknown feature kind '" + s + "'", line);
}

double parse_number(const std::string& s, long line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw ParseError("bad number '" + s + "'", line);
  return v;
}

int parse_int(const std::string& s, long line) {
  const double v = parse_number(s, line);
  if (v != static_cast<int>(v)) throw ParseError("expected an integer, got '" + s + "'", line);
  return static_cast<int>(v);
}

}  // namespace

void write_cmst(const CmstModel& m, std::ostream& out) {
  fmt::print(out, "jointdep-cmst 1\nlambda {:.16e}\nmu {:.16e}\n", m.lambda, m.mu);
  const auto& tags = m.templates.tags();
  fmt::print(out, "tags {}\n", tags.size());
  for (const auto& t : tags.tags()) fmt::print(out, "{}\n", t);
  fmt::print(out, "rules {}\n", m.rules.size());
  write_rules(m.rules, out);
  fmt::print(out, "features {}\n", m.templates.dimension());
  for (const auto& k : m.templates.keys()) {
    fmt::print(out, "{} {} {} {} {}\n", kKindNames[static_cast<int>(k.kind)], k.head, k.dep, k.dir,
               k.bin);
  }
  int nonzero = 0;
  for (Eigen::Index i = 0; i < m.w.size(); ++i) nonzero += m.w[i] != 0.0;
  fmt::print(out, "weights {}\n", nonzero);
  for (Eigen::Index i = 0; i < m.w.size(); ++i) {
    if (m.w[i] != 0.0) fmt::print(out, "{} {:.16e}\n", i, m.w[i]);
  }
  out << "end\n";
}

CmstModel read_cmst(std::istream& in) {
  long line_no = 0;
  auto next = [&]() {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("unexpected end of model file", line_no);
    ++line_no;
    std::istringstream ss(line);
    std::vector<std::string> fields;
    for (std::string f; ss >> f;) fields.push_back(f);
    return fields;
  };
  auto expect = [&](const char* key, size_t arity) {
    auto f = next();
    if (f.size() != arity + 1 || f[0] != key) {
      throw ParseError(fmt::format("expected '{}' line", key), line_no);
    }
    return f;
  };

  auto header = next();
  if (header.size() != 2 || header[0] != "jointdep-cmst") {
    throw ParseError("not a jointdep-cmst model file", line_no);
  }
  if (header[1] != "1") throw ParseError("unsupported cmst model version " + header[1], line_no);
  CmstModel m;
  m.lambda = parse_number(expect("lambda", 1)[1], line_no);
  m.mu = parse_number(expect("mu", 1)[1], line_no);

  const int num_tags = parse_int(expect("tags", 1)[1], line_no);
  Vocab tags;
  for (int t = 0; t < num_tags; ++t) {
    auto f = next();
    if (f.size() != 1) throw ParseError("expected one tag per line", line_no);
    tags.add(f[0]);
  }
  const int num_rules = parse_int(expect("rules", 1)[1], line_no);
  for (int r = 0; r < num_rules; ++r) {
    auto f = next();
    if (f.size() != 2) throw ParseError("expected 'HEADTAG DEPTAG'", line_no);
    m.rules.add(f[0], f[1]);
  }
  const int dim = parse_int(expect("features", 1)[1], line_no);
  std::vector<FeatureKey> keys;
  keys.reserve(static_cast<size_t>(dim));
  for (int i = 0; i < dim; ++i) {
    auto f = next();
    if (f.size() != 5) throw ParseError("expected 'kind head dep dir bin'", line_no);
    keys.push_back({kind_from_name(f[0], line_no), parse_int(f[1], line_no),
                    parse_int(f[2], line_no), parse_int(f[3], line_no), parse_int(f[4], line_no)});
  }
  m.templates = FeatureTemplate::from_parts(tags, keys);
  m.w = Eigen::VectorXd::Zero(dim);
  const int nonzero = parse_int(expect("weights", 1)[1], line_no);
  for (int i = 0; i < nonzero; ++i) {
    auto f = next();
    if (f.size() != 2) throw ParseError("expected 'index value'", line_no);
    const int index = parse_int(f[0], line_no);
    if (index < 0 || index >= dim) throw ParseError("weight index out of range", line_no);
    m.w[index] = parse_number(f[1], line_no);
  }
  if (auto f = next(); f.size() != 1 || f[0] != "end") throw ParseError("expected 'end'", line_no);
  return m;
}

void save_cmst(const CmstModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  write_cmst(m, out);
}

CmstModel load_cmst(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return read_cmst(in);
}

}  // namespace jointdep
