#pragma once

#include <algorithm>
#include <cstdint>
#include <iterator>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "backgen/rng.hpp"
#include "backgen/tree.hpp"

namespace backgen {

/// Small probabilistic grammar whose trees are unambiguous given the words:
/// every word has one POS tag and prepositional phrases only attach to verbs.
///
///   S    -> NP VP [.]
///   NP   -> DT NN | DT JJ NN | PRP | NNP
///   VP   -> VBD NP | VBD NP PP | VBZ ADJP | VBD SBAR | VBD
///   ADJP -> JJ | RB JJ
///   PP   -> IN NP
///   SBAR -> IN(that) S
struct SyntheticGrammar {
  std::map<std::string, std::vector<std::string>> lexicon;
  std::string complementizer = "that";
  double p_period = 0.7;
  double np_weights[4] = {0.4, 0.25, 0.15, 0.2};
  double vp_weights[5] = {0.35, 0.25, 0.2, 0.1, 0.1};
  double p_adverb = 0.5;
  int max_depth = 2;

  std::set<std::string> vocabulary() const {
    std::set<std::string> out{complementizer, "."};
    for (const auto& [pos, words] : lexicon) out.insert(words.begin(), words.end());
    return out;
  }
};

/// 50-word grammar used for the end-to-end learning check.
inline SyntheticGrammar default_grammar() {
  SyntheticGrammar g;
  g.lexicon = {
      {"DT", {"the", "a", "this", "every"}},
      {"NN", {"dog", "cat", "park", "ball", "house", "tree", "car", "river", "book", "table", "city", "garden", "letter",
              "window"}},
      {"JJ", {"big", "small", "red", "old", "happy", "quiet"}},
      {"PRP", {"he", "she", "it", "they"}},
      {"NNP", {"alice", "bob", "paris", "london"}},
      {"VBD", {"saw", "liked", "found", "took", "said", "heard"}},
      {"VBZ", {"is", "seems", "looks", "stays"}},
      {"IN", {"in", "on", "with", "near"}},
      {"RB", {"very", "quite"}},
  };
  return g;
}

/// Target-domain variant: function words and verbs of the copula stay, every
/// open-class noun, adjective, proper name and past-tense verb is replaced,
/// and rule probabilities favour longer sentences.
inline SyntheticGrammar shifted_grammar() {
  SyntheticGrammar g = default_grammar();
  g.lexicon["NN"] = {"protein", "cell", "gene", "enzyme", "sample", "tissue", "membrane", "receptor", "assay", "culture",
                     "strain", "dose", "marker", "signal"};
  g.lexicon["JJ"] = {"mutant", "stable", "toxic", "cellular", "active", "novel"};
  g.lexicon["NNP"] = {"ecoli", "yeast", "hela", "drosophila"};
  g.lexicon["VBD"] = {"bound", "induced", "reduced", "showed", "reported", "expressed"};
  const double np[4] = {0.3, 0.45, 0.05, 0.2};
  const double vp[5] = {0.25, 0.4, 0.15, 0.15, 0.05};
  std::copy(std::begin(np), std::end(np), g.np_weights);
  std::copy(std::begin(vp), std::end(vp), g.vp_weights);
  g.p_period = 0.95;
  return g;
}

namespace detail {

template <std::size_t N>
inline std::size_t pick(Rng& rng, const double (&weights)[N]) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = rng.uniform() * total;
  for (std::size_t k = 0; k < N; ++k) {
    if (u < weights[k]) return k;
    u -= weights[k];
  }
  return N - 1;
}

inline Tree synth_word(const SyntheticGrammar& g, Rng& rng, const std::string& pos) {
  const std::vector<std::string>& ws = g.lexicon.at(pos);
  return Tree::leaf(pos, ws[rng.below(ws.size())]);
}

inline Tree synth_np(const SyntheticGrammar& g, Rng& rng) {
  switch (pick(rng, g.np_weights)) {
    case 0: return Tree::node("NP", {synth_word(g, rng, "DT"), synth_word(g, rng, "NN")});
    case 1: return Tree::node("NP", {synth_word(g, rng, "DT"), synth_word(g, rng, "JJ"), synth_word(g, rng, "NN")});
    case 2: return Tree::node("NP", {synth_word(g, rng, "PRP")});
    default: return Tree::node("NP", {synth_word(g, rng, "NNP")});
  }
}

inline Tree synth_s(const SyntheticGrammar& g, Rng& rng, int depth, bool top);

inline Tree synth_vp(const SyntheticGrammar& g, Rng& rng, int depth) {
  double weights[5];
  std::copy(std::begin(g.vp_weights), std::end(g.vp_weights), weights);
  if (depth >= g.max_depth) weights[3] = 0.0;
  switch (pick(rng, weights)) {
    case 0: return Tree::node("VP", {synth_word(g, rng, "VBD"), synth_np(g, rng)});
    case 1: {
      Tree pp = Tree::node("PP", {synth_word(g, rng, "IN"), synth_np(g, rng)});
      return Tree::node("VP", {synth_word(g, rng, "VBD"), synth_np(g, rng), std::move(pp)});
    }
    case 2: {
      Tree adjp = rng.uniform() < g.p_adverb
                      ? Tree::node("ADJP", {synth_word(g, rng, "RB"), synth_word(g, rng, "JJ")})
                      : Tree::node("ADJP", {synth_word(g, rng, "JJ")});
      return Tree::node("VP", {synth_word(g, rng, "VBZ"), std::move(adjp)});
    }
    case 3: {
      Tree sbar = Tree::node("SBAR", {Tree::leaf("IN", g.complementizer), synth_s(g, rng, depth + 1, false)});
      return Tree::node("VP", {synth_word(g, rng, "VBD"), std::move(sbar)});
    }
    default: return Tree::node("VP", {synth_word(g, rng, "VBD")});
  }
}

inline Tree synth_s(const SyntheticGrammar& g, Rng& rng, int depth, bool top) {
  std::vector<Tree> kids{synth_np(g, rng), synth_vp(g, rng, depth)};
  if (top && rng.uniform() < g.p_period) kids.push_back(Tree::leaf(".", "."));
  return Tree::node("S", std::move(kids));
}

}  // namespace detail

/// `count` independent sentences drawn from the grammar.
inline std::vector<Tree> generate_corpus(const SyntheticGrammar& g, std::size_t count, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x5EED));
  std::vector<Tree> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) out.push_back(detail::synth_s(g, rng, 0, true));
  return out;
}

}  // namespace backgen
