#include <gtest/gtest.h>

#include "backgen/chart_parser.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace backgen;
using namespace testing_support;

TEST(Cky, MatchesEnumeration) {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(7));
    const int L = 1 + static_cast<int>(rng.below(5));
    const ScoreChart chart = random_chart(rng, n, L);
    const LabelSet labels = make_labels(L);
    const DecodedTree d = cky_decode(chart, labels);
    EXPECT_NEAR(d.score, enumerate_best(chart), 1e-9);
    EXPECT_NEAR(tree_score(chart, d.tree, labels), d.score, 1e-9);
    EXPECT_EQ(constituent_spans(d.tree).size(), static_cast<std::size_t>(2 * n - 1));
  }
}

TEST(Cky, MatchesExhaustiveLabelEnumeration) {
  Rng rng(32);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(4));
    const int L = 1 + static_cast<int>(rng.below(3));
    const ScoreChart chart = random_chart(rng, n, L);
    EXPECT_NEAR(cky_decode(chart, make_labels(L)).score, enumerate_best_exhaustive(chart), 1e-9);
  }
}

TEST(Cky, RootNeverEmptyAndWordsAttached) {
  const LabelSet labels = make_labels(3);
  ScoreChart chart(3, 3);  // all zeros: ties everywhere
  const Sentence s{{"a", "b", "c"}, {"DT", "NN", "VB"}};
  const DecodedTree d = cky_decode(chart, labels, &s);
  EXPECT_NE(d.tree.label, kEmptyLabel);
  EXPECT_EQ(words(d.tree), s.words);
  EXPECT_EQ(pos_tags(d.tree), s.pos);
  // ties go to the smallest split
  EXPECT_EQ(d.tree.left().span, (Span{1, 1}));
}

TEST(Hamming, SymmetricAndZeroOnSelf) {
  Rng rng(41);
  const LabelSet labels = make_labels(4);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(9));
    const BinaryTree a = random_binary_tree(rng, n, labels);
    const BinaryTree b = random_binary_tree(rng, n, labels);
    EXPECT_EQ(hamming(a, a), 0);
    EXPECT_EQ(hamming(a, b), hamming(b, a));
    EXPECT_GE(hamming(a, b), 0);
  }
  EXPECT_THROW(hamming(random_binary_tree(rng, 3, labels), random_binary_tree(rng, 4, labels)), Error);
}

TEST(LossAugmented, MatchesEnumerationAndHamming) {
  Rng rng(51);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(7));
    const int L = 2 + static_cast<int>(rng.below(4));
    const LabelSet labels = make_labels(L);
    const ScoreChart chart = random_chart(rng, n, L);
    const BinaryTree gold = random_binary_tree(rng, n, labels);
    const DecodedTree d = loss_augmented_decode(chart, gold, labels);
    EXPECT_NEAR(d.score, enumerate_augmented(chart, gold, labels), 1e-9);
    EXPECT_NEAR(d.score, tree_score(chart, d.tree, labels) + hamming(d.tree, gold), 1e-9);
  }
}

TEST(MaxMargin, NonNegativeAndZeroWhenGoldWinsByMargin) {
  Rng rng(61);
  const LabelSet labels = make_labels(4);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(7));
    const BinaryTree gold = random_binary_tree(rng, n, labels);
    const ScoreChart chart = random_chart(rng, n, 4);
    const MarginResult mm = max_margin_loss(chart, gold, labels);
    EXPECT_GE(mm.loss, 0.0);

    // A chart that rewards gold's labeled spans by 10 and nothing else.
    ScoreChart easy(n, 4);
    for (const LabeledSpan& ls : constituent_spans(gold)) {
      const int id = labels.id(ls.label);
      if (id > 0) easy(ls.span.i, ls.span.j, id) = 10.0;
    }
    for (int i = 1; i <= n; ++i) {
      for (int j = i; j <= n; ++j) {
        for (int l = 1; l < 4; ++l) {
          if (easy(i, j, l) == 0.0) easy(i, j, l) = -10.0;
        }
      }
    }
    const MarginResult zero = max_margin_loss(easy, gold, labels);
    EXPECT_EQ(zero.loss, 0.0);
    EXPECT_TRUE(zero.gradient.empty());
  }
}

TEST(MaxMargin, HandComputedTwoWordCase) {
  // Two words, labels {∅, A}. Gold: root A over two empty leaves.
  const LabelSet labels = make_labels(2);
  BinaryTree gold;
  gold.label = "L1";
  gold.span = {1, 2};
  BinaryTree l1, l2;
  l1.label = l2.label = std::string(kEmptyLabel);
  l1.span = {1, 1};
  l2.span = {2, 2};
  gold.children = {l1, l2};
  ScoreChart chart(2, 2);
  chart(1, 2, 1) = 0.5;
  chart(1, 1, 1) = 0.3;   // labelling word 1 scores 0.3 and costs 1 under hamming
  chart(2, 2, 1) = -2.0;  // labelling word 2 would net -1, so it stays empty
  const MarginResult mm = max_margin_loss(chart, gold, labels);
  // s_aug(pred) = 0.5 + (0.3 + 1) + 0 + 0; s(gold) = 0.5
  EXPECT_NEAR(mm.loss, 1.3, 1e-12);
  EXPECT_EQ(mm.predicted.tree.left().label, "L1");
}
