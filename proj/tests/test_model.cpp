#include <gtest/gtest.h>

#include <cmath>

#include "backgen/checkpoint.hpp"
#include "backgen/encoder.hpp"
#include "backgen/model.hpp"
#include "backgen/optimizer.hpp"
#include "backgen/scorer.hpp"
#include "gradcheck.hpp"
#include "test_support.hpp"

using namespace backgen;
using namespace testing_support;

namespace {

std::vector<BinaryTree> sample_trees() {
  return {binarize(parse_bracketed(kProudTree)),
          binarize(parse_bracketed("(S (NP (DT the) (JJ old) (NN dog)) (VP (VBD saw) (NP (DT a) (NN cat))) (. .))"))};
}

}  // namespace

TEST(Vocabulary, ReservedIdsAndUnknownWords) {
  Vocabulary v;
  EXPECT_EQ(v.size(), 3);
  const int id = v.add("dog");
  EXPECT_EQ(id, 3);
  EXPECT_EQ(v.add("dog"), 3);
  EXPECT_EQ(v.id("dog"), 3);
  EXPECT_EQ(v.id("zebra"), Vocabulary::kUnk);
}

TEST(LabelSet, EmptyLabelIsZero) {
  LabelSet labels;
  EXPECT_EQ(labels.size(), 1);
  EXPECT_EQ(labels.name(0), kEmptyLabel);
  EXPECT_EQ(labels.add("NP"), 1);
  EXPECT_EQ(labels.id("NP"), 1);
  EXPECT_EQ(labels.id("VP"), -1);
}

TEST(Encoder, SpanRepresentationIsBoundaryDifference) {
  const auto trees = sample_trees();
  const ModelParams params = small_model(trees, 3);
  const Encoding enc = encode_traced(params, words(trees[1]));
  const int n = enc.length();
  const int S = params.dims.span_half;
  ASSERT_EQ(n, 7);
  EXPECT_EQ(enc.reps.count(), n * (n + 1) / 2);
  for (int i = 1; i <= n; ++i) {
    for (int j = i; j <= n; ++j) {
      auto r = enc.reps.at(i, j);
      ASSERT_EQ(static_cast<int>(r.size()), 2 * S);
      for (int k = 0; k < S; ++k) {
        EXPECT_DOUBLE_EQ(r[k], enc.proj_fwd[j][k] - enc.proj_fwd[i - 1][k]);
        EXPECT_DOUBLE_EQ(r[S + k], enc.proj_bwd[i][k] - enc.proj_bwd[j + 1][k]);
      }
    }
  }
}

TEST(Encoder, DeterministicAndRejectsEmpty) {
  const auto trees = sample_trees();
  const ModelParams a = small_model(trees, 5);
  const ModelParams b = small_model(trees, 5);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(encode(a, sentence_of(parse_bracketed(kProudTree))), encode(b, sentence_of(parse_bracketed(kProudTree))));
  EXPECT_THROW(encode(a, Sentence{}), Error);
}

TEST(Scorer, EmptyLabelScoresZero) {
  const auto trees = sample_trees();
  const ModelParams params = small_model(trees, 9);
  const ScoreChart chart = score_chart(params, encode(params, Sentence{words(trees[0]), {}}));
  ASSERT_EQ(chart.num_labels(), params.num_labels());
  for (int i = 1; i <= chart.size(); ++i) {
    for (int j = i; j <= chart.size(); ++j) EXPECT_EQ(chart(i, j, 0), 0.0);
  }
}

TEST(Gradients, MaxMarginMatchesFiniteDifferences) {
  const auto trees = sample_trees();
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    ModelParams params = small_model(trees, seed);
    const BinaryTree& gold = trees[seed % 2];
    ASSERT_GT(margin_loss_value(params, gold), 0.0);
    const ParamSet grads = margin_loss_grad(params, gold);
    Rng rng(seed);
    const GradCheck gc = check_gradients(
        params, grads, [&](const ModelParams& p) { return margin_loss_value(p, gold); }, rng, [](int) { return true; });
    EXPECT_GE(gc.checked, 5 * kNumParams);
    EXPECT_LT(gc.worst, 1e-4) << gc.where;
  }
}

TEST(Gradients, ContrastiveMatchesFiniteDifferences) {
  const auto trees = sample_trees();
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    ModelParams params = small_model(trees, seed);
    const BinaryTree& tree = trees[seed % 2];
    const auto sets = mine_tree(tree, 1.0, seed);
    const ParamSet grads = contrastive_grad(params, tree, sets, 0.05);
    for (int id = kFfW1; id < kNumParams; ++id) {
      for (double g : grads[id].data) EXPECT_EQ(g, 0.0);
    }
    Rng rng(seed);
    const GradCheck gc = check_gradients(
        params, grads, [&](const ModelParams& p) { return contrastive_value(p, tree, sets, 0.05); }, rng,
        is_encoder_param);
    EXPECT_LT(gc.worst, 1e-4) << gc.where;
  }
}

TEST(AdamW, MatchesHandComputedSteps) {
  ModelParams params;
  params.weights.tensors = {Tensor(1, 1)};
  params.weights[0].data[0] = 1.0;
  ParamSet grads = params.weights.zeros_like();
  OptimizerState state = make_optimizer(params, AdamWConfig{});

  grads[0].data[0] = 0.5;
  apply_gradients(params, grads, 0.1, state);
  const double p1 = 0.999 - 0.1 * 0.5 / (0.5 + 1e-8);
  EXPECT_NEAR(params.weights[0].data[0], p1, 1e-15);

  grads[0].data[0] = -0.25;
  apply_gradients(params, grads, 0.1, state);
  const double m = 0.9 * 0.05 + 0.1 * -0.25;
  const double v = 0.999 * 0.00025 + 0.001 * 0.0625;
  const double m_hat = m / (1.0 - 0.81);
  const double v_hat = v / (1.0 - 0.998001);
  const double p2 = p1 * (1.0 - 0.1 * 0.01) - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8);
  EXPECT_NEAR(params.weights[0].data[0], p2, 1e-12);
  EXPECT_EQ(state.step, 2);
}

TEST(AdamW, MaskedTensorsAreUntouched) {
  const auto trees = sample_trees();
  ModelParams params = small_model(trees, 1);
  const ModelParams before = params;
  ParamSet grads = params.weights.zeros_like();
  for (Tensor& t : grads.tensors) std::fill(t.data.begin(), t.data.end(), 0.1);
  OptimizerState state = make_optimizer(params);
  apply_gradients(params, grads, 0.01, state, is_encoder_param);
  for (int id = 0; id < kNumParams; ++id) {
    if (is_encoder_param(id)) {
      EXPECT_NE(params.weights[id], before.weights[id]);
    } else {
      EXPECT_EQ(params.weights[id], before.weights[id]);
    }
  }
}

TEST(AdamW, RejectsNonFiniteGradient) {
  const auto trees = sample_trees();
  ModelParams params = small_model(trees, 1);
  ParamSet grads = params.weights.zeros_like();
  grads[kFfB1].data[0] = std::nan("");
  OptimizerState state = make_optimizer(params);
  try {
    apply_gradients(params, grads, 0.01, state);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFiniteGradient);
  }
}

TEST(Checkpoint, RoundTripIsExact) {
  TempDir dir("ckpt");
  const auto trees = sample_trees();
  ModelParams params = small_model(trees, 4);
  ParamSet grads = margin_loss_grad(params, trees[0]);
  OptimizerState state = make_optimizer(params);
  apply_gradients(params, grads, 0.01, state);

  Checkpoint ckpt{params, state, {{"note", "unit"}}};
  save_checkpoint(dir.file("a.ckpt"), ckpt);
  const Checkpoint back = load_checkpoint(dir.file("a.ckpt"));
  EXPECT_EQ(back.params.dims, params.dims);
  EXPECT_EQ(back.params.vocab, params.vocab);
  EXPECT_EQ(back.params.labels, params.labels);
  EXPECT_EQ(back.params.weights, params.weights);
  ASSERT_TRUE(back.optimizer.has_value());
  EXPECT_EQ(*back.optimizer, state);
  EXPECT_EQ(back.metadata.at("note"), "unit");

  save_checkpoint(dir.file("b.ckpt"), back);
  EXPECT_EQ(slurp(dir.file("a.ckpt")), slurp(dir.file("b.ckpt")));
}

TEST(Checkpoint, RejectsGarbage) {
  TempDir dir("ckpt_bad");
  {
    std::ofstream out(dir.file("bad.ckpt"));
    out << "not a checkpoint";
  }
  try {
    load_checkpoint(dir.file("bad.ckpt"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BadCheckpoint);
  }
}
