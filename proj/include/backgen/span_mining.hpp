#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "backgen/binary_tree.hpp"
#include "backgen/error.hpp"
#include "backgen/rng.hpp"

namespace backgen {

enum class SubtreeSide { LeftSubtree, RightSubtree, Root };

/// Structural neighbourhood of an anchor span. split is the last word of the
/// left child (LC = (i, split), RC = (split + 1, j)); far is the parent's
/// boundary on the side away from the anchor.
struct AnchorContext {
  Span anchor;
  SubtreeSide side = SubtreeSide::Root;
  std::optional<int> split;
  std::optional<int> far;
};

struct SpanInstanceSet {
  Span anchor;
  std::vector<Span> positives;
  std::vector<Span> negatives;
};

namespace detail {

inline bool find_context(const BinaryTree& node, Span anchor, const BinaryTree* parent, AnchorContext& out) {
  if (node.span == anchor) {
    out.anchor = anchor;
    if (!node.is_leaf()) out.split = node.left().span.j;
    if (parent == nullptr) {
      out.side = SubtreeSide::Root;
    } else if (&parent->left() == &node) {
      out.side = SubtreeSide::LeftSubtree;
      out.far = parent->span.j;
    } else {
      out.side = SubtreeSide::RightSubtree;
      out.far = parent->span.i;
    }
    return true;
  }
  if (node.is_leaf() || anchor.i < node.span.i || anchor.j > node.span.j) return false;
  return find_context(node.left(), anchor, &node, out) || find_context(node.right(), anchor, &node, out);
}

}  // namespace detail

inline AnchorContext anchor_context(const BinaryTree& tree, Span anchor) {
  AnchorContext ctx;
  if (!detail::find_context(tree, anchor, nullptr, ctx)) {
    throw Error(ErrorKind::NotAConstituent,
                "(" + std::to_string(anchor.i) + "," + std::to_string(anchor.j) + ") is not a node span");
  }
  return ctx;
}

/// Left child, right child, parent, brother; absent relations are omitted.
inline std::vector<Span> positive_instances(const AnchorContext& ctx) {
  const auto [i, j] = ctx.anchor;
  std::vector<Span> out;
  if (ctx.split) {
    const int k = *ctx.split;
    out.push_back({i, k});
    out.push_back({k + 1, j});
  }
  if (ctx.far) {
    const int l = *ctx.far;
    if (ctx.side == SubtreeSide::LeftSubtree) {
      out.push_back({i, l});
      out.push_back({j + 1, l});
    } else {
      out.push_back({l, j});
      out.push_back({l, i - 1});
    }
  }
  return out;
}

inline std::vector<Span> positive_instances(const BinaryTree& tree, Span anchor) {
  return positive_instances(anchor_context(tree, anchor));
}

/// Boundary-adjacent candidates in fixed order: eight around the anchor, two
/// per child, two around the parent, one for the brother. Spans may be out of
/// bounds or inverted; filter_negatives removes those.
inline std::vector<Span> negative_candidates(const AnchorContext& ctx) {
  const auto [i, j] = ctx.anchor;
  std::vector<Span> out{
      {i, j - 1}, {i, j + 1}, {i - 1, j}, {i + 1, j},
      {i - 1, j - 1}, {i - 1, j + 1}, {i + 1, j - 1}, {i + 1, j + 1},
  };
  if (ctx.split) {
    const int k = *ctx.split;
    out.push_back({i, k - 1});
    out.push_back({i, k + 1});
    out.push_back({k, j});
    out.push_back({k + 2, j});
  }
  if (ctx.far) {
    const int l = *ctx.far;
    if (ctx.side == SubtreeSide::LeftSubtree) {
      out.push_back({i, l - 1});
      out.push_back({i, l + 1});
      out.push_back({j, l});
    } else {
      out.push_back({l - 1, j});
      out.push_back({l + 1, j});
      out.push_back({l, i});
    }
  }
  return out;
}

/// Drops out-of-bounds candidates and any span that is a node of the tree,
/// then removes duplicates keeping first occurrences.
inline std::vector<Span> filter_negatives(const std::vector<Span>& candidates, const BinaryTree& tree) {
  const int n = tree.length();
  std::set<Span> nodes;
  for (const LabeledSpan& ls : constituent_spans(tree)) nodes.insert(ls.span);
  std::set<Span> seen;
  std::vector<Span> out;
  for (const Span& s : candidates) {
    if (!s.in_bounds(n) || nodes.contains(s) || !seen.insert(s).second) continue;
    out.push_back(s);
  }
  return out;
}

/// Samples ceil(sample_rate * #anchors) anchors of width >= 2 without
/// replacement and returns their instance sets in tree pre-order.
inline std::vector<SpanInstanceSet> mine_tree(const BinaryTree& tree, double sample_rate, std::uint64_t seed) {
  if (!(sample_rate > 0.0 && sample_rate <= 1.0)) {
    throw Error(ErrorKind::BadConfig, "sample_rate must be in (0, 1]");
  }
  std::vector<Span> anchors;
  for (const LabeledSpan& ls : constituent_spans(tree)) {
    if (ls.span.width() >= 2) anchors.push_back(ls.span);
  }
  const std::size_t m = anchors.size();
  // The epsilon guards against products like 0.2 * 40 landing just above 8.
  std::size_t take = static_cast<std::size_t>(std::ceil(sample_rate * static_cast<double>(m) - 1e-9));
  take = std::min(take, m);

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t t = 0; t < take; ++t) {
    std::swap(order[t], order[t + rng.below(m - t)]);
  }
  std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take));
  std::sort(chosen.begin(), chosen.end());

  std::vector<SpanInstanceSet> out;
  out.reserve(take);
  for (std::size_t idx : chosen) {
    const AnchorContext ctx = anchor_context(tree, anchors[idx]);
    SpanInstanceSet set{ctx.anchor, positive_instances(ctx), filter_negatives(negative_candidates(ctx), tree)};
    if (set.positives.empty()) continue;
    out.push_back(std::move(set));
  }
  return out;
}

}  // namespace backgen
