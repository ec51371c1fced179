#pragma once

#include <cassert>
#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "backgen/tree.hpp"

namespace backgen {

/// Label of intermediate nodes introduced by binarization and of bare
/// preterminal spans.
inline constexpr std::string_view kEmptyLabel = "\xE2\x88\x85";  // U+2205
inline constexpr char kUnaryJoiner = '+';

/// Word interval, 1-based and inclusive on both ends.
struct Span {
  int i = 1;
  int j = 1;

  int width() const { return j - i + 1; }
  bool in_bounds(int n) const { return 1 <= i && i <= j && j <= n; }

  friend auto operator<=>(const Span&, const Span&) = default;
  friend bool operator==(const Span&, const Span&) = default;
};

struct LabeledSpan {
  Span span;
  std::string label;

  friend auto operator<=>(const LabeledSpan&, const LabeledSpan&) = default;
  friend bool operator==(const LabeledSpan&, const LabeledSpan&) = default;
};

/// Strictly binary tree: inner nodes have two children, leaves cover one word
/// and carry the POS tag plus the (possibly collapsed, possibly empty) label
/// of the unary chain above it.
struct BinaryTree {
  std::string label;
  Span span;
  std::vector<BinaryTree> children;
  std::string pos;
  std::string word;

  bool is_leaf() const { return children.empty(); }
  const BinaryTree& left() const { return children[0]; }
  const BinaryTree& right() const { return children[1]; }
  int length() const { return span.width(); }

  friend bool operator==(const BinaryTree&, const BinaryTree&) = default;
};

/// Upper-triangular table indexed by 1-based inclusive spans of an n-word
/// sentence.
template <typename T>
class SpanTable {
 public:
  SpanTable() = default;
  explicit SpanTable(int n, const T& fill = T{}) : n_(n), cells_(static_cast<std::size_t>(n) * n, fill) {}

  int size() const { return n_; }
  T& operator()(int i, int j) { return cells_[index(i, j)]; }
  const T& operator()(int i, int j) const { return cells_[index(i, j)]; }
  T& operator[](Span s) { return (*this)(s.i, s.j); }
  const T& operator[](Span s) const { return (*this)(s.i, s.j); }

 private:
  std::size_t index(int i, int j) const {
    assert(1 <= i && i <= j && j <= n_);
    return static_cast<std::size_t>(i - 1) * n_ + (j - 1);
  }

  int n_ = 0;
  std::vector<T> cells_;
};

namespace detail {

inline std::string join_labels(const std::vector<std::string>& labels) {
  std::string out;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (k) out += kUnaryJoiner;
    out += labels[k];
  }
  return out;
}

inline std::vector<std::string> split_labels(std::string_view joined) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t plus = joined.find(kUnaryJoiner, start);
    out.emplace_back(joined.substr(start, plus == std::string_view::npos ? std::string_view::npos : plus - start));
    if (plus == std::string_view::npos) break;
    start = plus + 1;
  }
  return out;
}

inline BinaryTree binarize_from(const Tree& t, int start);

inline BinaryTree binarize_children(std::string label, const std::vector<const Tree*>& kids, std::size_t from, int start) {
  BinaryTree node;
  node.label = std::move(label);
  BinaryTree left = binarize_from(*kids[from], start);
  const int mid = left.span.j;
  BinaryTree right = (kids.size() - from == 2)
                         ? binarize_from(*kids[from + 1], mid + 1)
                         : binarize_children(std::string(kEmptyLabel), kids, from + 1, mid + 1);
  node.span = Span{start, right.span.j};
  node.children.push_back(std::move(left));
  node.children.push_back(std::move(right));
  return node;
}

inline BinaryTree binarize_from(const Tree& t, int start) {
  if (t.is_leaf()) {
    BinaryTree leaf;
    leaf.label = std::string(kEmptyLabel);
    leaf.span = Span{start, start};
    leaf.pos = t.label;
    leaf.word = *t.word;
    return leaf;
  }
  std::vector<std::string> chain{t.label};
  const Tree* cur = &t;
  while (cur->children.size() == 1 && !cur->children.front().is_leaf()) {
    cur = &cur->children.front();
    chain.push_back(cur->label);
  }
  if (cur->children.size() == 1) {
    BinaryTree leaf = binarize_from(cur->children.front(), start);
    leaf.label = join_labels(chain);
    return leaf;
  }
  std::vector<const Tree*> kids;
  kids.reserve(cur->children.size());
  for (const Tree& c : cur->children) kids.push_back(&c);
  return binarize_children(join_labels(chain), kids, 0, start);
}

inline Tree wrap_chain(std::string_view joined, Tree inner) {
  const std::vector<std::string> chain = split_labels(joined);
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    std::vector<Tree> kids;
    kids.push_back(std::move(inner));
    inner = Tree::node(*it, std::move(kids));
  }
  return inner;
}

inline void debinarize_into(const BinaryTree& b, std::vector<Tree>& out);

inline Tree debinarize_node(const BinaryTree& b) {
  if (b.is_leaf()) {
    Tree leaf = Tree::leaf(b.pos, b.word);
    if (b.label == kEmptyLabel) return leaf;
    return wrap_chain(b.label, std::move(leaf));
  }
  std::vector<Tree> kids;
  debinarize_into(b.left(), kids);
  debinarize_into(b.right(), kids);
  const std::vector<std::string> chain = split_labels(b.label);
  Tree node = Tree::node(chain.back(), std::move(kids));
  for (auto it = chain.rbegin() + 1; it != chain.rend(); ++it) {
    std::vector<Tree> wrapped;
    wrapped.push_back(std::move(node));
    node = Tree::node(*it, std::move(wrapped));
  }
  return node;
}

inline void debinarize_into(const BinaryTree& b, std::vector<Tree>& out) {
  if (!b.is_leaf() && b.label == kEmptyLabel) {
    debinarize_into(b.left(), out);
    debinarize_into(b.right(), out);
    return;
  }
  out.push_back(debinarize_node(b));
}

inline void collect_spans(const BinaryTree& b, std::vector<LabeledSpan>& out) {
  out.push_back(LabeledSpan{b.span, b.label});
  for (const BinaryTree& c : b.children) collect_spans(c, out);
}

}  // namespace detail

/// Right-branching binarization. Nodes with more than two children get "∅"
/// intermediate nodes; unary chains are collapsed into "A+B" labels.
inline BinaryTree binarize(const Tree& t) { return detail::binarize_from(t, 1); }

/// Inverse of binarize: splices out "∅" nodes and expands "A+B" chains.
/// Labels containing '+' in the source tree do not survive a round trip.
inline Tree debinarize(const BinaryTree& b) { return detail::debinarize_node(b); }

/// One labeled span per node in pre-order, "∅" nodes and word spans
/// included; 2n-1 entries for n words.
inline std::vector<LabeledSpan> constituent_spans(const BinaryTree& b) {
  std::vector<LabeledSpan> out;
  out.reserve(static_cast<std::size_t>(2 * b.length() - 1));
  detail::collect_spans(b, out);
  return out;
}

/// Label at each node span, nullopt where the tree has no node.
inline SpanTable<std::optional<std::string>> span_labels(const BinaryTree& b) {
  SpanTable<std::optional<std::string>> table(b.length());
  for (LabeledSpan& ls : constituent_spans(b)) table[ls.span] = std::move(ls.label);
  return table;
}

inline std::vector<std::string> words(const BinaryTree& b) {
  std::vector<std::string> out;
  auto walk = [&](auto&& self, const BinaryTree& node) -> void {
    if (node.is_leaf()) {
      out.push_back(node.word);
      return;
    }
    self(self, node.left());
    self(self, node.right());
  };
  walk(walk, b);
  return out;
}

inline std::vector<std::string> pos_tags(const BinaryTree& b) {
  std::vector<std::string> out;
  auto walk = [&](auto&& self, const BinaryTree& node) -> void {
    if (node.is_leaf()) {
      out.push_back(node.pos);
      return;
    }
    self(self, node.left());
    self(self, node.right());
  };
  walk(walk, b);
  return out;
}

}  // namespace backgen
