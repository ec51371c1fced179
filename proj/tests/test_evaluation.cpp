#include <gtest/gtest.h>

#include "backgen/evaluation.hpp"
#include "test_support.hpp"

using namespace backgen;
using namespace testing_support;

namespace {

// 5 gold brackets: S(1,6) NP(1,2) VP(3,6) NP(4,5) ADVP(6,6)
const char* kGold = "(S (NP (DT a) (NN b)) (VP (VBD c) (NP (DT d) (NN e)) (ADVP (RB f))))";
// 4 predicted brackets: S(1,6) NP(1,2) VP(3,6) NP(4,6); 3 match
const char* kPred = "(S (NP (DT a) (NN b)) (VP (VBD c) (NP (DT d) (NN e) (RB f))))";

}  // namespace

TEST(Brackets, HandBuiltPair) {
  const auto gold = bracket_set(parse_bracketed(kGold));
  const auto pred = bracket_set(parse_bracketed(kPred));
  EXPECT_EQ(gold.size(), 5u);
  EXPECT_EQ(pred.size(), 4u);
  EXPECT_EQ(matched_brackets(gold, pred), 3);
  EXPECT_EQ(matched_brackets(pred, gold), 3);
}

TEST(Brackets, PunctuationIsIgnoredAndReindexed) {
  const Tree plain = parse_bracketed("(S (NP (PRP it)) (VP (VBD rained)))");
  const Tree punct = parse_bracketed("(S (`` ``) (NP (PRP it)) (, ,) (VP (VBD rained)) (. .))");
  EXPECT_EQ(bracket_set(plain), bracket_set(punct));
}

TEST(Brackets, UnaryChainsEmitEveryLevel) {
  const auto b = bracket_set(parse_bracketed("(S (VP (VB go)))"));
  EXPECT_EQ(b, (std::vector<Bracket>{{"S", 1, 1}, {"VP", 1, 1}}));
}

TEST(LabeledF1, IdentityIsHundred) {
  const std::vector<Tree> golds{parse_bracketed(kGold), parse_bracketed(kProudTree)};
  const std::vector<Prediction> preds(golds.begin(), golds.end());
  const EvalReport r = labeled_f1(golds, preds);
  EXPECT_EQ(r.overall.precision(), 100.0);
  EXPECT_EQ(r.overall.recall(), 100.0);
  EXPECT_EQ(r.overall.f1(), 100.0);
}

TEST(LabeledF1, FiveFourThree) {
  const EvalReport r = labeled_f1({parse_bracketed(kGold)}, {parse_bracketed(kPred)});
  EXPECT_DOUBLE_EQ(r.overall.precision(), 75.0);
  EXPECT_DOUBLE_EQ(r.overall.recall(), 60.0);
  EXPECT_NEAR(r.overall.f1(), 2.0 * 75.0 * 60.0 / 135.0, 1e-12);
}

TEST(LabeledF1, FullAndValidModes) {
  const Tree g = parse_bracketed(kGold);
  const std::vector<Tree> golds{g, g};
  const std::vector<Prediction> preds{std::nullopt, g};
  EvalConfig cfg;
  const EvalReport full = labeled_f1(golds, preds, cfg);
  EXPECT_DOUBLE_EQ(full.overall.precision(), 100.0);
  EXPECT_DOUBLE_EQ(full.overall.recall(), 50.0);
  EXPECT_NEAR(full.overall.f1(), 200.0 / 3.0, 1e-9);
  EXPECT_EQ(full.overall.invalid, 1);
  cfg.mode = EvalMode::Valid;
  const EvalReport valid = labeled_f1(golds, preds, cfg);
  EXPECT_DOUBLE_EQ(valid.overall.f1(), 100.0);
  EXPECT_GE(valid.overall.f1(), full.overall.f1());
}

TEST(LabeledF1, ZeroOverZeroIsZero) {
  const EvalReport r = labeled_f1({parse_bracketed(kGold)}, {std::nullopt});
  EXPECT_EQ(r.overall.precision(), 0.0);
  EXPECT_EQ(r.overall.f1(), 0.0);
}

TEST(LabeledF1, LengthMismatchThrows) {
  try {
    labeled_f1({parse_bracketed(kGold)}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::LengthMismatch);
  }
}

TEST(LabeledF1, PerDomainAverage) {
  const Tree g = parse_bracketed(kGold);
  const std::vector<Tree> golds{g, g};
  const std::vector<Prediction> preds{g, parse_bracketed(kPred)};
  const std::vector<std::string> domains{"news", "web"};
  EvalConfig cfg;
  cfg.per_domain = true;
  const EvalReport r = labeled_f1(golds, preds, cfg, &domains);
  ASSERT_EQ(r.domains.size(), 2u);
  EXPECT_EQ(r.domains.at("news").f1(), 100.0);
  EXPECT_NEAR(r.domain_average_f1(), (100.0 + 2.0 * 75.0 * 60.0 / 135.0) / 2.0, 1e-9);
  EXPECT_NE(format_report(r).find("avg"), std::string::npos);
  EXPECT_EQ(report_json(r).at("domains").size(), 2u);
}

TEST(LabeledF1, PunctuationInsertionInvariance) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Tree g = random_tree(rng, 2 + static_cast<int>(rng.below(10)));
    const Tree p = random_tree(rng, static_cast<int>(leaves(g).size()));
    Tree g2 = g, p2 = p;
    if (g2.is_leaf() || p2.is_leaf()) continue;
    g2.children.push_back(Tree::leaf(".", "."));
    p2.children.insert(p2.children.begin(), Tree::leaf(",", ","));
    p2.children.push_back(Tree::leaf(".", "."));
    const double before = labeled_f1({g}, {p}).overall.f1();
    const double after = labeled_f1({g2}, {p2}).overall.f1();
    EXPECT_DOUBLE_EQ(before, after);
  }
}

TEST(Predictions, InvalidLinesAndUnparseableLines) {
  TempDir dir("eval");
  {
    std::ofstream out(dir.file("pred.txt"));
    out << kGold << "\n(())\n(S (NP broken\n";
  }
  const auto preds = read_predictions(dir.file("pred.txt"));
  ASSERT_EQ(preds.size(), 3u);
  EXPECT_TRUE(preds[0].has_value());
  EXPECT_FALSE(preds[1].has_value());
  EXPECT_FALSE(preds[2].has_value());
}
