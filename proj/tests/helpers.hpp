#pragma once

// Synthetic sentences, corpora and model parameters for tests.

#include <string>
#include <vector>

#include <fmt/format.h>

#include "jointdep/cmst.hpp"
#include "jointdep/corpus.hpp"
#include "jointdep/dmv.hpp"
#include "jointdep/rng.hpp"

namespace testing {

inline const std::vector<std::string>& tag_pool() {
  static const std::vector<std::string> tags{"VERB", "NOUN", "PRON", "ADJ", "DET", "ADP", "ADV"};
  return tags;
}

inline jointdep::Sentence make_sentence(const std::vector<std::string>& tags,
                                        const std::vector<int>& heads = {}) {
  jointdep::Sentence s;
  for (size_t j = 0; j < tags.size(); ++j) {
    jointdep::Token t;
    t.form = fmt::format("w{}", j + 1);
    t.upos = tags[j];
    t.is_punct = tags[j] == "PUNCT";
    if (!heads.empty()) t.gold_head = heads[j];
    t.columns = {std::to_string(j + 1), t.form, "_", t.upos, "_", "_",
                 heads.empty() ? "_" : std::to_string(heads[j]), "dep", "_", "_"};
    s.tokens.push_back(t);
  }
  return s;
}

inline jointdep::Corpus make_corpus(const std::vector<jointdep::Sentence>& sentences) {
  jointdep::Corpus c;
  c.sentences = sentences;
  for (const auto& s : sentences) {
    for (const auto& t : s.tokens) c.pos_vocab.add(t.upos);
  }
  return c;
}

inline std::vector<std::string> random_tags(jointdep::Rng& rng, int n, int num_tags) {
  std::vector<std::string> tags;
  for (int j = 0; j < n; ++j) tags.push_back(tag_pool()[rng.uniform_int(0, num_tags - 1)]);
  return tags;
}

// Projective by construction: pick a head inside each span, then recurse on
// the two sides.
inline std::vector<int> random_projective_tree(jointdep::Rng& rng, int n) {
  std::vector<int> heads(static_cast<size_t>(n), 0);
  struct Span {
    int lo, hi, head;
  };
  std::vector<Span> stack{{1, n, 0}};
  while (!stack.empty()) {
    const Span sp = stack.back();
    stack.pop_back();
    if (sp.lo > sp.hi) continue;
    const int r = rng.uniform_int(sp.lo, sp.hi);
    heads[r - 1] = sp.head;
    stack.push_back({sp.lo, r - 1, r});
    stack.push_back({r + 1, sp.hi, r});
  }
  return heads;
}

inline jointdep::Corpus random_corpus(jointdep::Rng& rng, int count, int min_len, int max_len,
                                      int num_tags, bool with_gold = true) {
  std::vector<jointdep::Sentence> sentences;
  for (int i = 0; i < count; ++i) {
    const int n = rng.uniform_int(min_len, max_len);
    const auto tags = random_tags(rng, n, num_tags);
    sentences.push_back(make_sentence(tags, with_gold ? random_projective_tree(rng, n)
                                                      : std::vector<int>{}));
  }
  return make_corpus(sentences);
}

// Strictly positive random distributions.
inline jointdep::DmvParams random_params(const jointdep::Vocab& vocab, jointdep::Rng& rng) {
  jointdep::DmvParams p = jointdep::DmvParams::zeros(vocab);
  const int P = vocab.size();
  for (int t = 0; t < P; ++t) p.root[t] = rng.uniform(0.05, 1.0);
  p.root /= p.root.sum();
  for (auto& a : p.attach) {
    for (int h = 0; h < P; ++h) {
      for (int c = 0; c < P; ++c) a(h, c) = rng.uniform(0.05, 1.0);
      a.row(h) /= a.row(h).sum();
    }
  }
  for (auto& s : p.stop) {
    for (int h = 0; h < P; ++h) {
      s(h, 0) = rng.uniform(0.05, 0.95);
      s(h, 1) = rng.uniform(0.05, 0.95);
    }
  }
  return p;
}

inline jointdep::CmstModel random_cmst(const jointdep::Corpus& c, jointdep::Rng& rng,
                                       double scale = 0.5) {
  jointdep::CmstModel m = jointdep::CmstModel::create(c, jointdep::default_rules(),
                                                      rng.uniform(0.1, 2.0), rng.uniform(0.0, 1.0));
  for (Eigen::Index i = 0; i < m.w.size(); ++i) m.w[i] = rng.uniform(-scale, scale);
  return m;
}

inline Eigen::VectorXd random_vector(jointdep::Rng& rng, Eigen::Index size, double scale) {
  Eigen::VectorXd v(size);
  for (Eigen::Index i = 0; i < size; ++i) v[i] = rng.uniform(-scale, scale);
  return v;
}

}  // namespace testing
