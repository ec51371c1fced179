#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "backgen/span_mining.hpp"
#include "test_support.hpp"

using namespace backgen;
using namespace testing_support;

namespace {

BinaryTree node(const std::string& label, BinaryTree l, BinaryTree r) {
  BinaryTree b;
  b.label = label;
  b.span = Span{l.span.i, r.span.j};
  b.children = {std::move(l), std::move(r)};
  return b;
}

BinaryTree word(int i) {
  BinaryTree b;
  b.label = std::string(kEmptyLabel);
  b.span = Span{i, i};
  b.pos = "XX";
  b.word = std::to_string(i);
  return b;
}

// Right-branching chain over [i, j].
BinaryTree chain(int i, int j) {
  if (i == j) return word(i);
  return node("X", word(i), chain(i + 1, j));
}

// 15 words: C = (2,9) with children (2,5) and (6,9) under (2,13), whose right
// child is (10,13).
BinaryTree worked_example() {
  BinaryTree c = node("C", chain(2, 5), chain(6, 9));
  BinaryTree parent = node("B", std::move(c), chain(10, 13));
  BinaryTree right = node("D", std::move(parent), chain(14, 15));
  return node("A", word(1), std::move(right));
}

struct Oracle {
  std::map<Span, const BinaryTree*> nodes;
  std::map<Span, const BinaryTree*> parent;

  explicit Oracle(const BinaryTree& t) { visit(t, nullptr); }

  void visit(const BinaryTree& t, const BinaryTree* p) {
    nodes[t.span] = &t;
    if (p) parent[t.span] = p;
    for (const BinaryTree& c : t.children) visit(c, &t);
  }

  std::vector<Span> positives(Span a) const {
    std::vector<Span> out;
    const BinaryTree* self = nodes.at(a);
    if (!self->is_leaf()) {
      out.push_back(self->left().span);
      out.push_back(self->right().span);
    }
    if (parent.contains(a)) {
      const BinaryTree* p = parent.at(a);
      const BinaryTree& sibling = p->left().span == a ? p->right() : p->left();
      out.push_back(p->span);
      out.push_back(sibling.span);
    }
    return out;
  }

  std::vector<Span> candidates(Span a) const {
    const int i = a.i, j = a.j;
    std::vector<Span> out;
    for (auto [di, dj] : std::vector<std::pair<int, int>>{{0, -1}, {0, 1}, {-1, 0}, {1, 0}, {-1, -1}, {-1, 1}, {1, -1}, {1, 1}}) {
      out.push_back({i + di, j + dj});
    }
    const BinaryTree* self = nodes.at(a);
    if (!self->is_leaf()) {
      const Span lc = self->left().span, rc = self->right().span;
      out.push_back({lc.i, lc.j - 1});
      out.push_back({lc.i, lc.j + 1});
      out.push_back({rc.i - 1, rc.j});
      out.push_back({rc.i + 1, rc.j});
    }
    if (parent.contains(a)) {
      const BinaryTree* p = parent.at(a);
      const Span pa = p->span;
      if (p->left().span == a) {
        const Span br = p->right().span;
        out.push_back({pa.i, pa.j - 1});
        out.push_back({pa.i, pa.j + 1});
        out.push_back({br.i - 1, br.j});
      } else {
        const Span br = p->left().span;
        out.push_back({pa.i - 1, pa.j});
        out.push_back({pa.i + 1, pa.j});
        out.push_back({br.i, br.j + 1});
      }
    }
    return out;
  }
};

std::set<Span> as_set(const std::vector<Span>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST(SpanMining, WorkedExamplePositives) {
  const BinaryTree t = worked_example();
  EXPECT_EQ(positive_instances(t, Span{2, 9}), (std::vector<Span>{{2, 5}, {6, 9}, {2, 13}, {10, 13}}));
  const AnchorContext ctx = anchor_context(t, Span{2, 9});
  EXPECT_EQ(ctx.side, SubtreeSide::LeftSubtree);
  EXPECT_EQ(ctx.split, 5);
  EXPECT_EQ(ctx.far, 13);
}

TEST(SpanMining, WorkedExampleNegatives) {
  const BinaryTree t = worked_example();
  const std::vector<Span> got = negative_candidates(anchor_context(t, Span{2, 9}));
  const std::vector<Span> listed{{1, 9},  {3, 9}, {2, 8}, {2, 10}, {1, 10}, {3, 8},  {1, 8}, {3, 10},
                                 {2, 4},  {2, 6}, {5, 9}, {7, 9},  {2, 12}, {2, 14}, {9, 13}};
  EXPECT_EQ(got.size(), 15u);
  EXPECT_EQ(as_set(got), as_set(listed));
}

TEST(SpanMining, RootAnchorHasOnlyChildren) {
  const BinaryTree t = worked_example();
  EXPECT_EQ(positive_instances(t, Span{1, 15}), (std::vector<Span>{{1, 1}, {2, 15}}));
  EXPECT_EQ(negative_candidates(anchor_context(t, Span{1, 15})).size(), 12u);
}

TEST(SpanMining, NonConstituentThrows) {
  const BinaryTree t = worked_example();
  try {
    positive_instances(t, Span{3, 9});
    FAIL() << "expected NotAConstituent";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotAConstituent);
  }
}

TEST(SpanMining, FilterRemovesOutOfBoundsAndNodes) {
  const BinaryTree t = worked_example();
  const std::vector<Span> out = filter_negatives({{0, 5}, {2, 5}, {3, 9}, {3, 9}, {10, 13}, {14, 16}, {4, 3}}, t);
  EXPECT_EQ(out, (std::vector<Span>{{3, 9}}));
}

TEST(SpanMining, MatchesBruteForceOracle) {
  Rng rng(2024);
  const LabelSet labels = make_labels(4);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(20));
    const BinaryTree t = random_binary_tree(rng, n, labels);
    const Oracle oracle(t);
    for (const LabeledSpan& ls : constituent_spans(t)) {
      const AnchorContext ctx = anchor_context(t, ls.span);
      EXPECT_EQ(positive_instances(ctx), oracle.positives(ls.span));
      const std::vector<Span> cands = negative_candidates(ctx);
      EXPECT_EQ(cands, oracle.candidates(ls.span));
      for (const Span& s : positive_instances(ctx)) EXPECT_TRUE(oracle.nodes.contains(s));
      for (const Span& s : filter_negatives(cands, t)) {
        EXPECT_TRUE(s.in_bounds(n));
        EXPECT_FALSE(oracle.nodes.contains(s));
      }
      if (ls.span.width() >= 2 && ctx.far) {
        EXPECT_EQ(cands.size(), 15u);
      }
    }
  }
}

TEST(SpanMining, SamplingCountsAndDeterminism) {
  // A right-branching chain over 41 words has 40 anchors of width >= 2.
  const BinaryTree t = chain(1, 41);
  const auto sets = mine_tree(t, 0.2, 99);
  EXPECT_EQ(sets.size(), 8u);
  const auto again = mine_tree(t, 0.2, 99);
  ASSERT_EQ(again.size(), sets.size());
  for (std::size_t k = 0; k < sets.size(); ++k) {
    EXPECT_EQ(sets[k].anchor, again[k].anchor);
    EXPECT_EQ(sets[k].negatives, again[k].negatives);
  }
  const auto full = mine_tree(t, 1.0, 5);
  std::set<Span> anchors;
  for (const auto& s : full) anchors.insert(s.anchor);
  EXPECT_EQ(full.size(), 40u);
  EXPECT_EQ(anchors.size(), 40u);
  EXPECT_THROW(mine_tree(t, 0.0, 1), Error);
  EXPECT_THROW(mine_tree(t, 1.5, 1), Error);
}
