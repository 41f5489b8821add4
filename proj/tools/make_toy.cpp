// Samples a small synthetic treebank from a hand-written English-like DMV.
// Usage: jointdep_make_toy <num_sentences> <max_len> <seed> <output.conllu>

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>

#include "jointdep/corpus.hpp"
#include "jointdep/dmv.hpp"

using namespace jointdep;

namespace {

DmvParams toy_grammar() {
  const Vocab vocab({"VERB", "NOUN", "PRON", "ADJ", "DET", "ADP", "ADV", "NUM", "PUNCT"});
  auto id = [&](const char* t) { return *vocab.find(t); };
  const int P = vocab.size();
  DmvParams g = DmvParams::zeros(vocab);
  g.root.setConstant(0.01);
  g.root(id("VERB")) = 0.8;
  g.root(id("NOUN")) = 0.15;
  for (auto& a : g.attach) a.setConstant(0.005);

  const int L = static_cast<int>(Dir::kLeft);
  const int R = static_cast<int>(Dir::kRight);
  using Weights = std::map<std::string, double>;
  auto set = [&](const char* head, int dir, const Weights& w) {
    for (const auto& [child, p] : w) g.attach[dir](id(head), id(child.c_str())) = p;
  };
  set("VERB", L, {{"PRON", 0.45}, {"NOUN", 0.35}, {"ADV", 0.15}});
  set("VERB", R, {{"NOUN", 0.4}, {"ADP", 0.2}, {"ADV", 0.1}, {"VERB", 0.05}, {"PUNCT", 0.2}});
  set("NOUN", L, {{"DET", 0.5}, {"ADJ", 0.35}, {"NUM", 0.1}});
  set("NOUN", R, {{"ADP", 0.5}, {"NOUN", 0.2}, {"ADJ", 0.1}, {"NUM", 0.1}});
  set("ADP", R, {{"NOUN", 0.8}, {"PRON", 0.2}});
  set("ADJ", L, {{"ADV", 0.8}});
  for (auto& a : g.attach) {
    for (int h = 0; h < P; ++h) a.row(h) /= a.row(h).sum();
  }
  g.root /= g.root.sum();

  // stop(head, nochild), stop(head, haschild)
  for (auto& s : g.stop) {
    s.col(0).setConstant(0.95);
    s.col(1).setConstant(0.99);
  }
  auto stop = [&](const char* head, int dir, double first, double later) {
    g.stop[dir](id(head), 0) = first;
    g.stop[dir](id(head), 1) = later;
  };
  stop("VERB", L, 0.2, 0.7);
  stop("VERB", R, 0.1, 0.5);
  stop("NOUN", L, 0.3, 0.7);
  stop("NOUN", R, 0.75, 0.9);
  stop("ADP", R, 0.02, 0.98);
  stop("ADJ", L, 0.8, 0.99);
  return g;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 5) {
    std::cerr << "usage: jointdep_make_toy <num_sentences> <max_len> <seed> <output.conllu>\n";
    return 1;
  }
  const Corpus c = sample_corpus(toy_grammar(), std::atoi(argv[1]), std::atoi(argv[2]),
                                 std::strtoull(argv[3], nullptr, 10));
  write_conllu_file(c, gold_trees(c), argv[4]);
  return 0;
}
