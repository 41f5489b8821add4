#include <doctest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "jointdep/dmv.hpp"
#include "jointdep/errors.hpp"
#include "oracle.hpp"

using namespace jointdep;
using testing::make_corpus;
using testing::make_sentence;

namespace {

const ConstraintConfig kPlain = ConstraintConfig::unconstrained();

std::vector<int> ids(const Sentence& x, const DmvParams& p) { return tag_ids(x, p.vocab); }

// Posterior-weighted event counts by enumeration.
Eigen::VectorXd brute_expected_counts(const Sentence& x, const DmvParams& p,
                                      const ConstraintConfig& cfg) {
  const DmvEvents ev(p.num_tags());
  const auto tags = ids(x, p);
  const auto trees = oracle::all_projective_trees(x.n());
  std::vector<double> scores;
  for (const auto& h : trees) {
    scores.push_back(oracle::dmv_score(tags, h, p, cfg.max_ce_depth, cfg.dep_len_beta));
  }
  const double z = oracle::log_sum_exp(scores);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(ev.size());
  for (size_t k = 0; k < trees.size(); ++k) {
    if (scores[k] == oracle::kNegInf) continue;
    const double post = std::exp(scores[k] - z);
    const auto& heads = trees[k];
    for (int d = 1; d <= x.n(); ++d) {
      if (heads[d - 1] == 0) counts[ev.root(tags[d - 1])] += post;
    }
    for (int h = 1; h <= x.n(); ++h) {
      for (Dir dir : {Dir::kLeft, Dir::kRight}) {
        const auto kids = oracle::children(heads, h, dir == Dir::kRight);
        for (size_t i = 0; i < kids.size(); ++i) {
          const Adjacency a = i == 0 ? Adjacency::kNoChild : Adjacency::kHasChild;
          counts[ev.cont(tags[h - 1], dir, a)] += post;
          counts[ev.attach(tags[h - 1], dir, tags[kids[i] - 1])] += post;
        }
        const Adjacency fin = kids.empty() ? Adjacency::kNoChild : Adjacency::kHasChild;
        counts[ev.stop(tags[h - 1], dir, fin)] += post;
      }
    }
  }
  return counts;
}

}  // namespace

TEST_CASE("ce_depth examples") {
  CHECK(ce_depth(DepTree{{0, 1, 2, 3}}) == 0);
  CHECK(ce_depth(DepTree{{3, 3, 0}}) == 1);
  CHECK(ce_depth(DepTree{{0, 4, 4, 1, 1}}) == 2);
  CHECK(ce_depth(DepTree{{0}}) == 0);
  CHECK(ce_depth(DepTree{{2, 3, 4, 0}}) == 0);
}

TEST_CASE("ce_depth matches the sibling-order oracle on every tree up to length 6") {
  for (int n = 1; n <= 6; ++n) {
    for (const auto& h : oracle::all_projective_trees(n)) {
      CHECK(ce_depth(DepTree{h}) == oracle::ce_depth(h));
    }
  }
}

TEST_CASE("init_params") {
  SUBCASE("uniform") {
    const Corpus c = make_corpus({make_sentence({"A", "B"})});
    const DmvParams p = init_params(c, InitMode::kUniform);
    CHECK(p.attach[0](0, 0) == doctest::Approx(0.5));
    CHECK(p.attach[0](0, 1) == doctest::Approx(0.5));
    CHECK(p.root(1) == doctest::Approx(0.5));
    CHECK(p.stop[1](1, 1) == doctest::Approx(0.5));
    CHECK(max_normalization_error(p) <= 1e-12);
  }
  SUBCASE("harmonic weights attachments by inverse distance") {
    // C's left candidates: B at distance 1 (1/2), A at distance 2 (1/3).
    const Corpus c = make_corpus({make_sentence({"A", "B", "C"})});
    const DmvParams p = init_params(c, InitMode::kHarmonic);
    const int a = *p.vocab.find("A");
    const int b = *p.vocab.find("B");
    const int cc = *p.vocab.find("C");
    CHECK(p.attach[0](cc, b) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(p.attach[0](cc, a) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(p.attach[0](cc, b) > p.attach[0](cc, a));
    CHECK(max_normalization_error(p) <= 1e-12);
  }
  SUBCASE("deterministic given the seed") {
    Rng rng(5);
    const Corpus c = testing::random_corpus(rng, 20, 1, 8, 5);
    const DmvParams p1 = init_params(c, InitMode::kHarmonic, 9, 0.3);
    const DmvParams p2 = init_params(c, InitMode::kHarmonic, 9, 0.3);
    const DmvParams p3 = init_params(c, InitMode::kHarmonic, 10, 0.3);
    CHECK(p1.attach[1] == p2.attach[1]);
    CHECK(p1.attach[1] != p3.attach[1]);
    CHECK(max_normalization_error(p3) <= 1e-12);
  }
  SUBCASE("empty vocabulary") {
    CHECK_THROWS_AS(init_params(Corpus{}, InitMode::kUniform), ContractError);
  }
}

TEST_CASE("tree_logprob") {
  Rng rng(17);
  const Corpus c = make_corpus({make_sentence({"NOUN", "VERB", "ADJ", "DET"})});
  const DmvParams p = testing::random_params(c.pos_vocab, rng);

  SUBCASE("single token is the forced derivation") {
    const Sentence x = make_sentence({"VERB"});
    const int v = *p.vocab.find("VERB");
    const double expected = std::log(p.root(v)) + std::log(p.stop[0](v, 0)) + std::log(p.stop[1](v, 0));
    CHECK(tree_logprob(x, DepTree{{0}}, p, ConstraintConfig{}) == doctest::Approx(expected).epsilon(1e-14));
  }
  SUBCASE("matches the generative-story oracle on every tree") {
    for (int n = 1; n <= 5; ++n) {
      const Sentence x = make_sentence(testing::random_tags(rng, n, 4));
      for (const auto& h : oracle::all_projective_trees(n)) {
        for (const ConstraintConfig cfg : {kPlain, ConstraintConfig{}, ConstraintConfig{0, 0.3}}) {
          const double ref = oracle::dmv_score(ids(x, p), h, p, cfg.max_ce_depth, cfg.dep_len_beta);
          const double got = tree_logprob(x, DepTree{h}, p, cfg);
          if (ref == oracle::kNegInf) {
            CHECK(got == -std::numeric_limits<double>::infinity());
          } else {
            CHECK(got == doctest::Approx(ref).epsilon(1e-12));
          }
        }
      }
    }
  }
  SUBCASE("depth above the cap is impossible") {
    const Sentence x = make_sentence({"NOUN", "VERB", "ADJ", "DET", "NOUN"});
    CHECK(tree_logprob(x, DepTree{{0, 4, 4, 1, 1}}, p, ConstraintConfig{1, 0.1}) ==
          -std::numeric_limits<double>::infinity());
    CHECK(std::isfinite(tree_logprob(x, DepTree{{0, 4, 4, 1, 1}}, p, ConstraintConfig{2, 0.1})));
  }
  SUBCASE("errors") {
    const Sentence x = make_sentence({"NOUN", "VERB"});
    CHECK_THROWS_AS(tree_logprob(x, DepTree{{0}}, p, kPlain), ContractError);
    CHECK_THROWS_AS(tree_logprob(x, DepTree{{0, 0}}, p, kPlain), ContractError);
  }
}

TEST_CASE("inside_loglik matches brute-force sums") {
  Rng rng(23);
  const Corpus c = make_corpus({make_sentence({"NOUN", "VERB", "ADJ", "DET", "ADP"})});
  for (int trial = 0; trial < 40; ++trial) {
    const DmvParams p = testing::random_params(c.pos_vocab, rng);
    const int n = 1 + trial % 5;
    const Sentence x = make_sentence(testing::random_tags(rng, n, 5));
    for (const ConstraintConfig cfg :
         {kPlain, ConstraintConfig{}, ConstraintConfig{0, 0.2}, ConstraintConfig{2, 0.05}}) {
      std::vector<double> scores;
      for (const auto& h : oracle::all_projective_trees(n)) {
        scores.push_back(oracle::dmv_score(ids(x, p), h, p, cfg.max_ce_depth, cfg.dep_len_beta));
      }
      CHECK(inside_loglik(x, p, cfg) == doctest::Approx(oracle::log_sum_exp(scores)).epsilon(1e-10));
    }
  }
}

TEST_CASE("length penalty lowers the marginal when a long arc exists") {
  Rng rng(29);
  const Corpus c = make_corpus({make_sentence({"NOUN", "VERB", "ADJ"})});
  const DmvParams p = testing::random_params(c.pos_vocab, rng);
  const Sentence x = make_sentence({"NOUN", "VERB", "ADJ"});
  CHECK(inside_loglik(x, p, ConstraintConfig{kUnboundedDepth, 0.5}) < inside_loglik(x, p, kPlain));
  const Sentence two = make_sentence({"NOUN", "VERB"});
  CHECK(inside_loglik(two, p, ConstraintConfig{kUnboundedDepth, 0.5}) ==
        doctest::Approx(inside_loglik(two, p, kPlain)));
}

TEST_CASE("expected counts match posterior-weighted brute-force counts") {
  Rng rng(31);
  const Corpus c = make_corpus({make_sentence({"NOUN", "VERB", "ADJ", "DET"})});
  for (int trial = 0; trial < 20; ++trial) {
    const DmvParams p = testing::random_params(c.pos_vocab, rng);
    const int n = 1 + trial % 4;
    const Sentence x = make_sentence(testing::random_tags(rng, n, 4));
    for (const ConstraintConfig cfg : {kPlain, ConstraintConfig{}, ConstraintConfig{0, 0.3}}) {
      Eigen::VectorXd counts = Eigen::VectorXd::Zero(DmvEvents(p.num_tags()).size());
      expected_counts(x, p, cfg, counts);
      const Eigen::VectorXd ref = brute_expected_counts(x, p, cfg);
      CHECK((counts - ref).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("viterbi_decode") {
  Rng rng(37);
  const Corpus c = make_corpus({make_sentence({"NOUN", "VERB", "ADJ", "DET"})});
  const DmvParams p = testing::random_params(c.pos_vocab, rng);

  SUBCASE("single token") {
    const Sentence x = make_sentence({"DET"});
    const auto r = viterbi_decode(x, p, ConstraintConfig{});
    CHECK(r.tree == DepTree{{0}});
    CHECK(r.score == doctest::Approx(-tree_logprob(x, r.tree, p, ConstraintConfig{})));
  }
  SUBCASE("matches brute-force argmin with random prices") {
    for (int trial = 0; trial < 60; ++trial) {
      const DmvParams q = testing::random_params(c.pos_vocab, rng);
      const int n = 1 + trial % 5;
      const Sentence x = make_sentence(testing::random_tags(rng, n, 4));
      const Eigen::VectorXd u = testing::random_vector(rng, n * n, 2.0);
      const ConstraintConfig cfg{trial % 3, 0.1 * (trial % 4)};
      double best = std::numeric_limits<double>::infinity();
      for (const auto& h : oracle::all_projective_trees(n)) {
        const double s = oracle::dmv_score(ids(x, q), h, q, cfg.max_ce_depth, cfg.dep_len_beta);
        if (s == oracle::kNegInf) continue;
        best = std::min(best, -s + u.dot(oracle::indicator(h)));
      }
      const auto r = viterbi_decode(x, q, cfg, u);
      CHECK(r.score == doctest::Approx(best).epsilon(1e-12));
      CHECK(is_valid_projective_tree(r.tree));
      CHECK(ce_depth(r.tree) <= cfg.max_ce_depth);
      CHECK(-tree_logprob(x, r.tree, q, cfg) + u.dot(to_arc_vector(r.tree)) ==
            doctest::Approx(r.score).epsilon(1e-12));
    }
  }
  SUBCASE("zero prices equal no prices") {
    const Sentence x = make_sentence({"NOUN", "VERB", "ADJ", "DET", "NOUN", "VERB"});
    const auto a = viterbi_decode(x, p, ConstraintConfig{});
    const auto b = viterbi_decode(x, p, ConstraintConfig{}, Eigen::VectorXd::Zero(36));
    CHECK(a.tree == b.tree);
    CHECK(a.score == b.score);
  }
  SUBCASE("a constant price shift moves the score by n times the constant") {
    const Sentence x = make_sentence({"NOUN", "VERB", "ADJ", "DET", "NOUN"});
    const Eigen::VectorXd u = testing::random_vector(rng, 25, 1.0);
    const auto a = viterbi_decode(x, p, ConstraintConfig{}, u);
    const auto b = viterbi_decode(x, p, ConstraintConfig{}, (u.array() + 0.75).matrix());
    CHECK(a.tree == b.tree);
    CHECK(b.score == doctest::Approx(a.score + 5 * 0.75).epsilon(1e-12));
  }
  SUBCASE("impossible sentences raise") {
    DmvParams z = p;
    const int noun = *z.vocab.find("NOUN");
    z.root.setConstant(1.0 / 3.0);
    z.root(noun) = 0.0;
    CHECK_THROWS_AS(viterbi_decode(make_sentence({"NOUN"}), z, ConstraintConfig{}), InfeasibleError);
    CHECK(inside_loglik(make_sentence({"NOUN"}), z, ConstraintConfig{}) ==
          -std::numeric_limits<double>::infinity());
  }
  SUBCASE("price dimension is checked") {
    CHECK_THROWS_AS(viterbi_decode(make_sentence({"NOUN", "VERB"}), p, kPlain, Eigen::VectorXd::Zero(3)),
                    ContractError);
  }
}

TEST_CASE("em_step") {
  Rng rng(41);
  const Corpus c = testing::random_corpus(rng, 30, 1, 7, 5, false);

  SUBCASE("log likelihood never decreases") {
    DmvParams p = init_params(c, InitMode::kHarmonic);
    double prev = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < 10; ++k) {
      const auto r = em_step(c, p, kPlain, 0.0);
      CHECK(r.loglik >= prev - 1e-10);
      CHECK(max_normalization_error(r.params) <= 1e-12);
      prev = r.loglik;
      p = r.params;
    }
  }
  SUBCASE("result does not depend on the thread count") {
    const DmvParams p = init_params(c, InitMode::kHarmonic);
    const auto a = em_step(c, p, ConstraintConfig{}, 0.0, 1);
    const auto b = em_step(c, p, ConstraintConfig{}, 0.0, 4);
    CHECK(a.loglik == b.loglik);
    CHECK(a.params.attach[0] == b.params.attach[0]);
    CHECK(a.params.stop[1] == b.params.stop[1]);
  }
  SUBCASE("unique feasible tree is a fixpoint") {
    // One token: the only tree uses root(t) and both no-child stops, so the
    // estimate puts all mass there and stays put.
    const Corpus one = make_corpus({make_sentence({"NOUN"})});
    DmvParams p = init_params(one, InitMode::kUniform);
    const auto r1 = em_step(one, p, ConstraintConfig{}, 0.0);
    const auto r2 = em_step(one, r1.params, ConstraintConfig{}, 0.0);
    CHECK(r1.params.root == r2.params.root);
    CHECK(r1.params.stop[0] == r2.params.stop[0]);
    CHECK(r2.loglik == doctest::Approx(0.0));
  }
  SUBCASE("impossible sentences are skipped") {
    const Corpus one = make_corpus({make_sentence({"NOUN"}), make_sentence({"VERB"})});
    DmvParams p = init_params(one, InitMode::kUniform);
    p.root(*p.vocab.find("NOUN")) = 0.0;
    p.root(*p.vocab.find("VERB")) = 1.0;
    const auto r = em_step(one, p, kPlain, 0.0);
    CHECK(r.skipped == 1);
    CHECK(std::isfinite(r.loglik));
  }
}

TEST_CASE("mstep_from_trees") {
  const Corpus c = make_corpus({make_sentence({"NOUN", "VERB"})});
  const int noun = *c.pos_vocab.find("NOUN");
  const int verb = *c.pos_vocab.find("VERB");
  SUBCASE("hard counts") {
    const DmvParams p = mstep_from_trees(c, {DepTree{{2, 0}}}, 0.0);
    CHECK(p.root(verb) == 1.0);
    CHECK(p.attach[0](verb, noun) == 1.0);
    CHECK(p.stop[0](verb, 1) == 1.0);
    CHECK(max_normalization_error(p) <= 1e-12);
  }
  SUBCASE("add-one smoothing") {
    const DmvParams p = mstep_from_trees(c, {DepTree{{2, 0}}}, 1.0);
    CHECK(p.root(noun) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(p.root(verb) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  }
  SUBCASE("alignment") {
    CHECK_THROWS_AS(mstep_from_trees(c, {}, 0.1), ContractError);
    CHECK_THROWS_AS(mstep_from_trees(c, {DepTree{{0}}}, 0.1), ContractError);
  }
  SUBCASE("random corpora stay normalized") {
    Rng rng(43);
    const Corpus r = testing::random_corpus(rng, 25, 1, 9, 6);
    CHECK(max_normalization_error(mstep_from_trees(r, gold_trees(r), 0.1)) <= 1e-12);
    CHECK(max_normalization_error(mstep_from_trees(r, gold_trees(r), 0.0)) <= 1e-12);
  }
}

TEST_CASE("serialization round-trips bit exactly") {
  Rng rng(47);
  const Corpus c = testing::random_corpus(rng, 10, 1, 6, 6);
  const DmvParams p = testing::random_params(c.pos_vocab, rng);
  std::stringstream s;
  write_dmv(p, s);
  const DmvParams q = read_dmv(s);
  CHECK(q.vocab == p.vocab);
  CHECK(q.root == p.root);
  CHECK(q.attach[0] == p.attach[0]);
  CHECK(q.attach[1] == p.attach[1]);
  CHECK(q.stop[0] == p.stop[0]);
  CHECK(q.stop[1] == p.stop[1]);
  std::stringstream again;
  write_dmv(q, again);
  CHECK(again.str() == s.str());

  std::istringstream bad("jointdep-dmv 2\n");
  CHECK_THROWS_AS(read_dmv(bad), ParseError);
  std::string truncated = s.str().substr(0, s.str().size() / 2);
  std::istringstream cut(truncated);
  CHECK_THROWS_AS(read_dmv(cut), ParseError);
}

TEST_CASE("sampler produces valid trees within the length bound") {
  Rng rng(53);
  const Corpus c = make_corpus({make_sentence({"NOUN", "VERB", "ADJ", "DET"})});
  DmvParams p = testing::random_params(c.pos_vocab, rng);
  const Corpus s = sample_corpus(p, 50, 8, 3);
  CHECK(s.N() == 50);
  for (const auto& x : s.sentences) {
    CHECK(x.n() <= 8);
    CHECK(is_valid_projective_tree(gold_tree(x)));
  }
  const Corpus again = sample_corpus(p, 50, 8, 3);
  CHECK(gold_trees(again) == gold_trees(s));
}
