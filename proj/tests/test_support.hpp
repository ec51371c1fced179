#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <unistd.h>

#include "backgen/binary_tree.hpp"
#include "backgen/model.hpp"
#include "backgen/rng.hpp"
#include "backgen/scorer.hpp"
#include "backgen/tree.hpp"

namespace testing_support {

using namespace backgen;

inline const char* kProudTree = "(S (NP (PRP I)) (VP (VBD am) (ADJP (JJ proud) (PP (IN of) (NP (PRP myself))))))";

inline constexpr const char* kRandomPhrases[] = {"S", "NP", "VP", "PP", "ADJP", "SBAR"};
inline constexpr const char* kRandomTags[] = {"DT", "NN", "VBD", "IN", "JJ", "PRP"};

/// Random n-ary tree over `n` words: phrase labels from a small set, unary
/// chains and flat nodes both occur.
inline Tree random_tree(Rng& rng, int n, int depth = 0) {
  const auto& phrases = kRandomPhrases;
  const auto& tags = kRandomTags;
  auto leaf = [&](int index) {
    return Tree::leaf(tags[rng.below(6)], "w" + std::to_string(index) + "_" + std::to_string(rng.below(5)));
  };
  auto build = [&](auto&& self, int start, int len, int d) -> Tree {
    if (len == 1) {
      Tree l = leaf(start);
      if (d > 0 && rng.below(4) == 0) return Tree::node(phrases[rng.below(6)], {l});
      return l;
    }
    const int parts = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min(len, 4) - 1)));
    std::vector<int> sizes(parts, 1);
    for (int extra = len - parts; extra > 0; --extra) ++sizes[rng.below(static_cast<std::uint64_t>(parts))];
    std::vector<Tree> kids;
    int pos = start;
    for (int s : sizes) {
      kids.push_back(self(self, pos, s, d + 1));
      pos += s;
    }
    Tree node = Tree::node(phrases[rng.below(6)], std::move(kids));
    if (d > 0 && rng.below(6) == 0) node = Tree::node(phrases[rng.below(6)], {std::move(node)});
    return node;
  };
  return build(build, 1, n, depth);
}

/// Random strictly binary tree with labels drawn from label ids [0, L).
/// The root never gets label 0 when L > 1.
inline BinaryTree random_binary_tree(Rng& rng, int n, const LabelSet& labels) {
  const int L = labels.size();
  auto build = [&](auto&& self, int i, int j) -> BinaryTree {
    BinaryTree node;
    node.span = Span{i, j};
    int id = static_cast<int>(rng.below(static_cast<std::uint64_t>(L)));
    if (i == 1 && j == n && L > 1 && id == 0) id = 1;
    node.label = labels.name(id);
    if (i == j) {
      node.pos = "XX";
      node.word = "w" + std::to_string(i);
      return node;
    }
    const int k = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(j - i)));
    node.children.push_back(self(self, i, k));
    node.children.push_back(self(self, k + 1, j));
    return node;
  };
  return build(build, 1, n);
}

inline LabelSet make_labels(int count) {
  LabelSet labels;
  for (int k = 1; k < count; ++k) labels.add("L" + std::to_string(k));
  return labels;
}

inline ScoreChart random_chart(Rng& rng, int n, int L) {
  ScoreChart chart(n, L);
  for (int i = 1; i <= n; ++i) {
    for (int j = i; j <= n; ++j) {
      for (int l = 1; l < L; ++l) chart(i, j, l) = rng.uniform(-2.0, 2.0);
    }
  }
  return chart;
}

/// Every unlabeled binary bracketing of [i, j], as lists of spans.
inline std::vector<std::vector<Span>> all_bracketings(int i, int j) {
  if (i == j) return {{Span{i, i}}};
  std::vector<std::vector<Span>> out;
  for (int k = i; k < j; ++k) {
    for (const auto& left : all_bracketings(i, k)) {
      for (const auto& right : all_bracketings(k + 1, j)) {
        std::vector<Span> spans{Span{i, j}};
        spans.insert(spans.end(), left.begin(), left.end());
        spans.insert(spans.end(), right.begin(), right.end());
        out.push_back(std::move(spans));
      }
    }
  }
  return out;
}

inline ModelParams small_model(const std::vector<BinaryTree>& trees, std::uint64_t seed, ModelDims dims = {6, 5, 4, 7}) {
  Vocabulary vocab;
  LabelSet labels;
  build_inventories(trees, vocab, labels);
  return init_model(dims, vocab, labels, seed);
}

/// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() / ("backgen_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

/// Central difference of f with respect to x[k].
inline double central_difference(const std::function<double()>& f, double& x, double h) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * h);
}

}  // namespace testing_support
