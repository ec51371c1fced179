#include <gtest/gtest.h>

#include <set>

#include "backgen/synthetic.hpp"
#include "backgen/trainer.hpp"
#include "test_support.hpp"

using namespace backgen;
using namespace testing_support;

TEST(Synthetic, VocabularyAndDeterminism) {
  EXPECT_EQ(default_grammar().vocabulary().size(), 50u);
  const auto a = generate_corpus(default_grammar(), 30, 4);
  const auto b = generate_corpus(default_grammar(), 30, 4);
  EXPECT_EQ(a, b);
  for (const Tree& t : a) {
    EXPECT_EQ(t.label, "S");
    EXPECT_EQ(render_bracketed(parse_bracketed(render_bracketed(t))), render_bracketed(t));
  }
}

TEST(Synthetic, ShiftedDomainUsesNewWords) {
  const auto src = default_grammar().vocabulary();
  const auto tgt = shifted_grammar().vocabulary();
  const std::set<std::string> src_set(src.begin(), src.end());
  int fresh = 0;
  for (const std::string& w : tgt) fresh += src_set.contains(w) ? 0 : 1;
  EXPECT_GT(fresh, 10);
}

TEST(Trainer, LearnsTinyTreebank) {
  const auto trees = generate_corpus(default_grammar(), 40, 8);
  const std::vector<Tree> train_set(trees.begin(), trees.begin() + 30);
  const std::vector<Tree> dev(trees.begin() + 30, trees.end());
  std::vector<BinaryTree> bin;
  for (const Tree& t : train_set) bin.push_back(binarize(t));
  const ModelParams init = small_model(bin, 3, {16, 16, 16, 16});
  const double before = evaluate_parser(init, dev).overall.f1();

  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.warmup_steps = 5;
  cfg.learning_rate = 5e-3;
  cfg.max_epochs = 4;
  cfg.eval_every_steps = 10;
  const TrainResult res = train(init, {{"src", train_set, 1.0}}, dev, cfg);
  EXPECT_GT(res.log.best_dev_f1, before);
  EXPECT_EQ(res.log.epochs.size(), 4u);
  EXPECT_FALSE(res.log.steps.empty());
  EXPECT_NE(res.log.epoch_table().find("epoch\tstep"), std::string::npos);

  const TrainResult again = train(init, {{"src", train_set, 1.0}}, dev, cfg);
  EXPECT_EQ(again.params.weights, res.params.weights);
}

TEST(Trainer, ParseOutputMatchesSentence) {
  const auto trees = generate_corpus(default_grammar(), 5, 2);
  std::vector<BinaryTree> bin;
  for (const Tree& t : trees) bin.push_back(binarize(t));
  const ModelParams params = small_model(bin, 1);
  for (const Tree& t : trees) {
    const Tree p = parse(params, sentence_of(t));
    EXPECT_EQ(words(p), words(t));
    EXPECT_EQ(pos_tags(p), pos_tags(t));
  }
}

TEST(Trainer, RejectsEmptyInput) {
  const auto trees = generate_corpus(default_grammar(), 3, 2);
  std::vector<BinaryTree> bin;
  for (const Tree& t : trees) bin.push_back(binarize(t));
  const ModelParams params = small_model(bin, 1);
  EXPECT_THROW(train(params, {}, trees, TrainConfig{}), Error);
  EXPECT_THROW(train(params, {{"a", trees, 1.0}}, {}, TrainConfig{}), Error);
}
