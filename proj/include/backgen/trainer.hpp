#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "backgen/chart_parser.hpp"
#include "backgen/encoder.hpp"
#include "backgen/evaluation.hpp"
#include "backgen/model.hpp"
#include "backgen/optimizer.hpp"
#include "backgen/rng.hpp"
#include "backgen/scorer.hpp"

namespace backgen {

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 64;
  int warmup_steps = 400;
  int early_stop_patience_epochs = 4;
  std::uint64_t seed = 1;
  int max_epochs = 50;
  int eval_every_steps = 100;
  double weight_decay = 0.01;
};

/// One treebank in the fine-tuning mix. weight scales the loss of its trees;
/// trees are never resampled.
struct TreebankSource {
  std::string name;
  std::vector<Tree> trees;
  double weight = 1.0;
};

struct StepRecord {
  long step = 0;
  double dev_f1 = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  long step = 0;
  double mean_loss = 0.0;
  double dev_f1 = 0.0;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_dev_f1 = -1.0;

  /// Tab-separated "step<TAB>dev_f1" lines with a header.
  std::string step_table() const {
    std::ostringstream out;
    out << "step\tdev_f1\n";
    out.precision(17);
    for (const StepRecord& r : steps) out << r.step << '\t' << r.dev_f1 << '\n';
    return out.str();
  }

  std::string epoch_table() const {
    std::ostringstream out;
    out << "epoch\tstep\tmean_loss\tdev_f1\n";
    out.precision(17);
    for (const EpochRecord& r : epochs) out << r.epoch << '\t' << r.step << '\t' << r.mean_loss << '\t' << r.dev_f1 << '\n';
    return out.str();
  }
};

struct TrainResult {
  ModelParams params;  // parameters from the best dev epoch
  OptimizerState optimizer;
  TrainLog log;
};

/// Adds words and labels seen in `trees` but missing from the model; new
/// embedding rows and label-scorer rows are freshly initialized.
inline void extend_inventories(ModelParams& params, const std::vector<BinaryTree>& trees, std::uint64_t seed) {
  Vocabulary vocab = params.vocab;
  LabelSet labels = params.labels;
  build_inventories(trees, vocab, labels);
  Rng rng(mix_seed(seed, 0xE17E));
  Tensor& emb = params.weights[kEmbedding];
  for (int id = params.vocab.size(); id < vocab.size(); ++id) {
    emb.data.resize(emb.data.size() + static_cast<std::size_t>(emb.cols));
    ++emb.rows;
    for (double& x : emb.row(id)) x = rng.uniform(-0.1, 0.1);
  }
  Tensor& w2 = params.weights[kFfW2];
  Tensor& b2 = params.weights[kFfB2];
  const double bound = 1.0 / std::sqrt(static_cast<double>(w2.cols));
  for (int id = params.labels.size(); id < labels.size(); ++id) {
    w2.data.resize(w2.data.size() + static_cast<std::size_t>(w2.cols));
    ++w2.rows;
    for (double& x : w2.row(w2.rows - 1)) x = rng.uniform(-bound, bound);
    b2.data.push_back(0.0);
    ++b2.cols;
  }
  params.vocab = std::move(vocab);
  params.labels = std::move(labels);
}

/// Highest-scoring tree for the sentence, debinarized. Leaf POS tags come
/// from the sentence when present, "XX" otherwise.
inline Tree parse(const ModelParams& params, const Sentence& sentence) {
  if (sentence.words.empty()) throw Error(ErrorKind::EmptySentence, "cannot parse an empty sentence");
  const SpanRepTable reps = encode(params, sentence);
  const ScoreChart chart = score_chart(params, reps);
  return debinarize(cky_decode(chart, params.labels, &sentence).tree);
}

inline EvalReport evaluate_parser(const ModelParams& params, const std::vector<Tree>& gold, const EvalConfig& cfg = {}) {
  std::vector<Prediction> preds;
  preds.reserve(gold.size());
  for (const Tree& t : gold) preds.emplace_back(parse(params, sentence_of(t)));
  return labeled_f1(gold, preds, cfg);
}

/// Max-margin loss of one tree; gradients (times `weight`) are added to grads.
inline double accumulate_margin_gradient(const ModelParams& params, const BinaryTree& gold, double weight,
                                         ParamSet& grads) {
  const Encoding enc = encode_traced(params, words(gold));
  const ScoreChart chart = score_chart(params, enc.reps);
  MarginResult mm = max_margin_loss(chart, gold, params.labels);
  if (mm.loss > 0.0) {
    for (ChartGradEntry& e : mm.gradient) e.coef *= weight;
    SpanGradient span_grad(enc.length(), params.dims.span_half);
    backprop_scores(params, enc.reps, mm.gradient, grads, span_grad);
    backprop_encoder(params, enc, span_grad, grads);
  }
  return weight * mm.loss;
}

/// Fine-tunes with the max-margin objective on the shuffled concatenation of
/// all sources. Linear warmup then constant rate; dev F1 is logged every
/// eval_every_steps and after each epoch; training stops once dev F1 has not
/// improved for more than early_stop_patience_epochs epochs.
inline TrainResult train(ModelParams params, const std::vector<TreebankSource>& sources,
                         const std::vector<Tree>& dev, const TrainConfig& config,
                         const std::function<void(const std::string&)>& progress = {}) {
  struct Item {
    BinaryTree tree;
    double weight;
  };
  std::vector<Item> items;
  for (const TreebankSource& src : sources) {
    for (const Tree& t : src.trees) items.push_back({binarize(t), src.weight});
  }
  if (items.empty()) throw Error(ErrorKind::EmptyTreebank, "no training trees");
  if (dev.empty()) throw Error(ErrorKind::EmptyTreebank, "no development trees");
  if (config.batch_size <= 0 || config.learning_rate <= 0.0) {
    throw Error(ErrorKind::BadConfig, "batch_size and learning_rate must be positive");
  }
  {
    std::vector<BinaryTree> all;
    all.reserve(items.size());
    for (const Item& it : items) all.push_back(it.tree);
    extend_inventories(params, all, config.seed);
  }

  TrainResult result;
  result.optimizer = make_optimizer(params, AdamWConfig{.weight_decay = config.weight_decay});
  result.params = params;
  TrainLog& log = result.log;
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  ParamSet grads = params.weights.zeros_like();
  long step = 0;
  int bad_epochs = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      grads.set_zero();
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const Item& item = items[order[k]];
        batch_loss += accumulate_margin_gradient(params, item.tree, item.weight, grads);
      }
      if (!std::isfinite(batch_loss)) throw Error(ErrorKind::NonFiniteLoss, "epoch " + std::to_string(epoch));
      epoch_loss += batch_loss;
      grads.scale(1.0 / static_cast<double>(end - start));
      ++step;
      const double warm = config.warmup_steps > 0
                              ? std::min(1.0, static_cast<double>(step) / static_cast<double>(config.warmup_steps))
                              : 1.0;
      apply_gradients(params, grads, config.learning_rate * warm, result.optimizer);
      if (config.eval_every_steps > 0 && step % config.eval_every_steps == 0) {
        log.steps.push_back({step, evaluate_parser(params, dev).overall.f1()});
      }
    }
    const double dev_f1 = evaluate_parser(params, dev).overall.f1();
    log.epochs.push_back({epoch, step, epoch_loss / static_cast<double>(items.size()), dev_f1});
    if (progress) {
      std::ostringstream msg;
      msg << "epoch " << epoch << " step " << step << " loss " << log.epochs.back().mean_loss << " dev_f1 " << dev_f1;
      progress(msg.str());
    }
    if (dev_f1 > log.best_dev_f1) {
      log.best_dev_f1 = dev_f1;
      log.best_epoch = epoch;
      result.params = params;
      bad_epochs = 0;
    } else if (++bad_epochs > config.early_stop_patience_epochs) {
      break;
    }
  }
  return result;
}

}  // namespace backgen
