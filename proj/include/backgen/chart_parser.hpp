#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "backgen/binary_tree.hpp"
#include "backgen/error.hpp"
#include "backgen/model.hpp"
#include "backgen/scorer.hpp"

namespace backgen {

struct DecodedTree {
  BinaryTree tree;
  double score = 0.0;
};

namespace detail {

struct CkyCell {
  double best = 0.0;
  int label = 0;
  int split = 0;
};

inline BinaryTree build_decoded(const SpanTable<CkyCell>& cells, const LabelSet& labels, const Sentence* sentence,
                                int i, int j) {
  BinaryTree node;
  node.span = Span{i, j};
  node.label = labels.name(cells(i, j).label);
  if (i == j) {
    if (sentence) {
      node.word = sentence->words[static_cast<std::size_t>(i - 1)];
      node.pos = sentence->pos.empty() ? "XX" : sentence->pos[static_cast<std::size_t>(i - 1)];
    } else {
      node.pos = "XX";
    }
    return node;
  }
  const int k = cells(i, j).split;
  node.children.push_back(build_decoded(cells, labels, sentence, i, k));
  node.children.push_back(build_decoded(cells, labels, sentence, k + 1, j));
  return node;
}

}  // namespace detail

/// Exact argmax over binary trees and labels. Each span takes its best
/// label (the root may not take the empty label) plus the best split; ties
/// go to the smallest split, then the smallest label index.
inline DecodedTree cky_decode(const ScoreChart& chart, const LabelSet& labels, const Sentence* sentence = nullptr) {
  const int n = chart.size();
  const int L = chart.num_labels();
  if (n < 1) throw Error(ErrorKind::EmptySentence, "cannot decode an empty chart");
  SpanTable<detail::CkyCell> cells(n);
  for (int width = 1; width <= n; ++width) {
    for (int i = 1; i + width - 1 <= n; ++i) {
      const int j = i + width - 1;
      detail::CkyCell& cell = cells(i, j);
      const bool root = (width == n) && L > 1;
      int best_label = root ? 1 : 0;
      for (int l = best_label + 1; l < L; ++l) {
        if (chart(i, j, l) > chart(i, j, best_label)) best_label = l;
      }
      cell.label = best_label;
      double split_score = 0.0;
      if (width > 1) {
        split_score = -std::numeric_limits<double>::infinity();
        for (int k = i; k < j; ++k) {
          const double s = cells(i, k).best + cells(k + 1, j).best;
          if (s > split_score) {
            split_score = s;
            cell.split = k;
          }
        }
      }
      cell.best = chart(i, j, best_label) + split_score;
    }
  }
  return DecodedTree{detail::build_decoded(cells, labels, sentence, 1, n), cells(1, n).best};
}

/// Sum of chart entries over the tree's nodes. Labels missing from the
/// inventory contribute nothing.
inline double tree_score(const ScoreChart& chart, const BinaryTree& tree, const LabelSet& labels) {
  double total = 0.0;
  for (const LabeledSpan& ls : constituent_spans(tree)) {
    const int id = labels.id(ls.label);
    if (id >= 0) total += chart(ls.span.i, ls.span.j, id);
  }
  return total;
}

/// Count of span positions whose labels differ, with absent spans read as
/// the empty label. Symmetric in its arguments.
inline int hamming(const BinaryTree& pred, const BinaryTree& gold) {
  if (pred.length() != gold.length()) {
    throw Error(ErrorKind::YieldMismatch, "trees cover " + std::to_string(pred.length()) + " and " +
                                              std::to_string(gold.length()) + " words");
  }
  const auto p = span_labels(pred);
  const auto g = span_labels(gold);
  std::set<Span> positions;
  for (const LabeledSpan& ls : constituent_spans(pred)) positions.insert(ls.span);
  for (const LabeledSpan& ls : constituent_spans(gold)) positions.insert(ls.span);
  int diff = 0;
  for (const Span& s : positions) {
    const std::string_view lp = p[s] ? std::string_view(*p[s]) : kEmptyLabel;
    const std::string_view lg = g[s] ? std::string_view(*g[s]) : kEmptyLabel;
    if (lp != lg) ++diff;
  }
  return diff;
}

/// argmax_T s(T) + hamming(T, gold). Every entry whose label differs from
/// gold's label at that span gets +1; at spans where gold has a non-empty
/// label every entry also gets -1, and the number of such spans is added
/// back as a constant. The second adjustment charges for gold constituents
/// the prediction misses, so the augmentation equals hamming exactly.
inline DecodedTree loss_augmented_decode(const ScoreChart& chart, const BinaryTree& gold, const LabelSet& labels,
                                         const Sentence* sentence = nullptr) {
  const int n = chart.size();
  if (gold.length() != n) {
    throw Error(ErrorKind::YieldMismatch, "chart covers " + std::to_string(n) + " words, gold " +
                                              std::to_string(gold.length()));
  }
  const auto gold_labels = span_labels(gold);
  ScoreChart augmented = chart;
  int labeled = 0;
  for (int i = 1; i <= n; ++i) {
    for (int j = i; j <= n; ++j) {
      const std::optional<std::string>& g = gold_labels(i, j);
      const int gid = g ? labels.id(*g) : 0;
      const bool gold_nonempty = g && *g != kEmptyLabel;
      if (gold_nonempty) ++labeled;
      for (int l = 0; l < chart.num_labels(); ++l) {
        augmented(i, j, l) += (l != gid ? 1.0 : 0.0) - (gold_nonempty ? 1.0 : 0.0);
      }
    }
  }
  DecodedTree out = cky_decode(augmented, labels, sentence);
  out.score += labeled;
  return out;
}

struct MarginResult {
  double loss = 0.0;
  DecodedTree predicted;   // loss-augmented argmax, score includes the augmentation
  double gold_score = 0.0;
  std::vector<ChartGradEntry> gradient;  // dLoss/ds(i,j,l)
};

/// Hinge max(0, s_aug(T^) - s(T*)); gradient +1 on the prediction's labeled
/// spans and -1 on gold's, empty when the loss is zero.
inline MarginResult max_margin_loss(const ScoreChart& chart, const BinaryTree& gold, const LabelSet& labels) {
  MarginResult out;
  out.predicted = loss_augmented_decode(chart, gold, labels);
  out.gold_score = tree_score(chart, gold, labels);
  out.loss = std::max(0.0, out.predicted.score - out.gold_score);
  if (out.loss > 0.0) {
    for (const LabeledSpan& ls : constituent_spans(out.predicted.tree)) {
      out.gradient.push_back({ls.span, labels.id(ls.label), 1.0});
    }
    for (const LabeledSpan& ls : constituent_spans(gold)) {
      const int id = labels.id(ls.label);
      if (id >= 0) out.gradient.push_back({ls.span, id, -1.0});
    }
  }
  return out;
}

}  // namespace backgen
