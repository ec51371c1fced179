#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "backgen/encoder.hpp"
#include "backgen/model.hpp"
#include "backgen/optimizer.hpp"
#include "backgen/rng.hpp"
#include "backgen/span_mining.hpp"

namespace backgen {

struct ContrastiveConfig {
  double temperature = 0.05;
  double sample_rate = 0.2;
  double learning_rate = 1e-3;
  int batch_size = 64;
  int epochs = 10;
  std::uint64_t seed = 1;
  double weight_decay = 0.01;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw Error(ErrorKind::ZeroNormVector, "cosine of a zero vector");
  return dot(a, b) / (na * nb);
}

namespace detail {

/// log(sum(exp(x))) over values sorted ascending, so the result does not
/// depend on input order.
inline double sorted_logsumexp(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const double top = values.back();
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - top);
  return top + std::log(sum);
}

/// d cos(a,b) / d a, scaled by coef, added to out.
inline void add_cosine_grad(std::span<const double> a, std::span<const double> b, double coef, std::span<double> out) {
  const double na = norm(a), nb = norm(b);
  const double c = dot(a, b) / (na * nb);
  for (std::size_t k = 0; k < a.size(); ++k) out[k] += coef * (b[k] / (na * nb) - c * a[k] / (na * na));
}

}  // namespace detail

/// Span-level contrastive loss for one anchor:
///   L = -sum_m log( e^{f(r,p_m)} / (e^{f(r,p_m)} + sum_n e^{f(r,q_n)}) )
/// with f = cosine / temperature. Terms are reduced in sorted order.
inline double contrastive_loss(std::span<const double> anchor, const std::vector<std::span<const double>>& positives,
                               const std::vector<std::span<const double>>& negatives, double temperature) {
  if (positives.empty()) throw Error(ErrorKind::NoPositives, "anchor has no positive instances");
  std::vector<double> neg_sims;
  neg_sims.reserve(negatives.size());
  for (const auto& q : negatives) neg_sims.push_back(cosine(anchor, q) / temperature);
  std::vector<double> terms;
  terms.reserve(positives.size());
  for (const auto& p : positives) {
    const double f = cosine(anchor, p) / temperature;
    std::vector<double> denom = neg_sims;
    denom.push_back(f);
    terms.push_back(detail::sorted_logsumexp(std::move(denom)) - f);
  }
  std::sort(terms.begin(), terms.end());
  return std::accumulate(terms.begin(), terms.end(), 0.0);
}

struct ContrastiveGrad {
  double loss = 0.0;
  std::vector<double> anchor;
  std::vector<std::vector<double>> positives;
  std::vector<std::vector<double>> negatives;
};

/// Loss and its gradient with respect to every input vector.
inline ContrastiveGrad contrastive_loss_grad(std::span<const double> anchor,
                                             const std::vector<std::span<const double>>& positives,
                                             const std::vector<std::span<const double>>& negatives,
                                             double temperature) {
  ContrastiveGrad out;
  out.loss = contrastive_loss(anchor, positives, negatives, temperature);
  const std::size_t dim = anchor.size();
  out.anchor.assign(dim, 0.0);
  out.positives.assign(positives.size(), std::vector<double>(dim, 0.0));
  out.negatives.assign(negatives.size(), std::vector<double>(dim, 0.0));

  std::vector<double> neg_sims;
  for (const auto& q : negatives) neg_sims.push_back(cosine(anchor, q) / temperature);
  std::vector<double> d_neg(negatives.size(), 0.0);
  for (std::size_t m = 0; m < positives.size(); ++m) {
    const double f = cosine(anchor, positives[m]) / temperature;
    std::vector<double> denom = neg_sims;
    denom.push_back(f);
    const double lse = detail::sorted_logsumexp(std::move(denom));
    // dL/df_m = p_m - 1, dL/dg_n += softmax weight of negative n.
    const double d_f = std::exp(f - lse) - 1.0;
    detail::add_cosine_grad(anchor, positives[m], d_f / temperature, out.anchor);
    detail::add_cosine_grad(positives[m], anchor, d_f / temperature, out.positives[m]);
    for (std::size_t n = 0; n < negatives.size(); ++n) d_neg[n] += std::exp(neg_sims[n] - lse);
  }
  for (std::size_t n = 0; n < negatives.size(); ++n) {
    detail::add_cosine_grad(anchor, negatives[n], d_neg[n] / temperature, out.anchor);
    detail::add_cosine_grad(negatives[n], anchor, d_neg[n] / temperature, out.negatives[n]);
  }
  return out;
}

/// Contrastive loss summed over the instance sets of one sentence; gradients
/// w.r.t. span representations go into span_grad. Sets without negatives
/// contribute nothing. Returns (loss, number of contributing sets).
inline std::pair<double, int> accumulate_contrastive(const SpanRepTable& reps, const std::vector<SpanInstanceSet>& sets,
                                                     double temperature, double coef, SpanGradient* span_grad) {
  double total = 0.0;
  int used = 0;
  for (const SpanInstanceSet& set : sets) {
    if (set.negatives.empty() || set.positives.empty()) continue;
    std::vector<std::span<const double>> pos, neg;
    for (const Span& s : set.positives) pos.push_back(reps.at(s));
    for (const Span& s : set.negatives) neg.push_back(reps.at(s));
    if (span_grad) {
      const ContrastiveGrad g = contrastive_loss_grad(reps.at(set.anchor), pos, neg, temperature);
      total += g.loss;
      span_grad->add(set.anchor, g.anchor, coef);
      for (std::size_t m = 0; m < pos.size(); ++m) span_grad->add(set.positives[m], g.positives[m], coef);
      for (std::size_t n = 0; n < neg.size(); ++n) span_grad->add(set.negatives[n], g.negatives[n], coef);
    } else {
      total += contrastive_loss(reps.at(set.anchor), pos, neg, temperature);
    }
    ++used;
  }
  return {total, used};
}

/// Mean cosine(anchor, positive) minus mean cosine(anchor, negative) over
/// every width >= 2 anchor of every tree.
inline double separation_margin(const ModelParams& params, const std::vector<BinaryTree>& trees) {
  double pos_sum = 0.0, neg_sum = 0.0;
  long pos_count = 0, neg_count = 0;
  for (const BinaryTree& t : trees) {
    const SpanRepTable reps = encode(params, Sentence{words(t), {}});
    for (const SpanInstanceSet& set : mine_tree(t, 1.0, 0)) {
      for (const Span& s : set.positives) {
        pos_sum += cosine(reps.at(set.anchor), reps.at(s));
        ++pos_count;
      }
      for (const Span& s : set.negatives) {
        neg_sum += cosine(reps.at(set.anchor), reps.at(s));
        ++neg_count;
      }
    }
  }
  const double pos_mean = pos_count ? pos_sum / static_cast<double>(pos_count) : 0.0;
  const double neg_mean = neg_count ? neg_sum / static_cast<double>(neg_count) : 0.0;
  return pos_mean - neg_mean;
}

struct PretrainEpoch {
  int epoch = 0;
  double mean_loss = 0.0;
  double margin = 0.0;
};

struct PretrainResult {
  ModelParams params;
  OptimizerState optimizer;
  std::vector<PretrainEpoch> log;
  double initial_margin = 0.0;

  std::string table() const {
    std::ostringstream out;
    out.precision(17);
    out << "epoch\tmean_loss\tmargin\n";
    for (const PretrainEpoch& e : log) out << e.epoch << '\t' << e.mean_loss << '\t' << e.margin << '\n';
    return out.str();
  }
};

/// Contrastive pre-training of the span encoder. The label-scoring head is
/// neither read nor updated. The loss of a batch is the mean over its
/// contributing instance sets.
inline PretrainResult pretrain(ModelParams params, const std::vector<Tree>& treebank, const ContrastiveConfig& config,
                               const std::function<void(const std::string&)>& progress = {}) {
  if (treebank.empty()) throw Error(ErrorKind::EmptyTreebank, "no pre-training trees");
  if (!(config.temperature > 0.0)) throw Error(ErrorKind::BadConfig, "temperature must be positive");
  if (!(config.sample_rate > 0.0 && config.sample_rate <= 1.0)) {
    throw Error(ErrorKind::BadConfig, "sample_rate must be in (0, 1]");
  }
  std::vector<BinaryTree> trees;
  trees.reserve(treebank.size());
  for (const Tree& t : treebank) trees.push_back(binarize(t));

  PretrainResult result;
  result.optimizer = make_optimizer(params, AdamWConfig{.weight_decay = config.weight_decay});
  result.initial_margin = separation_margin(params, trees);
  ParamSet grads = params.weights.zeros_like();
  std::vector<std::size_t> order(trees.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    long epoch_sets = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      struct Work {
        const BinaryTree* tree;
        std::vector<SpanInstanceSet> sets;
      };
      std::vector<Work> batch;
      int batch_sets = 0;
      for (std::size_t k = start; k < end; ++k) {
        const BinaryTree& t = trees[order[k]];
        const std::uint64_t tree_seed = mix_seed(config.seed, (static_cast<std::uint64_t>(epoch) << 32) ^ order[k]);
        Work w{&t, mine_tree(t, config.sample_rate, tree_seed)};
        for (const SpanInstanceSet& s : w.sets) {
          if (!s.negatives.empty()) ++batch_sets;
        }
        batch.push_back(std::move(w));
      }
      if (batch_sets == 0) continue;
      grads.set_zero();
      const double coef = 1.0 / static_cast<double>(batch_sets);
      double batch_loss = 0.0;
      for (const Work& w : batch) {
        const Encoding enc = encode_traced(params, words(*w.tree));
        SpanGradient span_grad(enc.length(), params.dims.span_half);
        batch_loss += accumulate_contrastive(enc.reps, w.sets, config.temperature, coef, &span_grad).first;
        backprop_encoder(params, enc, span_grad, grads);
      }
      if (!std::isfinite(batch_loss)) throw Error(ErrorKind::NonFiniteLoss, "epoch " + std::to_string(epoch));
      epoch_loss += batch_loss;
      epoch_sets += batch_sets;
      apply_gradients(params, grads, config.learning_rate, result.optimizer, is_encoder_param);
    }
    const double margin = separation_margin(params, trees);
    result.log.push_back({epoch, epoch_sets ? epoch_loss / static_cast<double>(epoch_sets) : 0.0, margin});
    if (progress) {
      std::ostringstream msg;
      msg << "epoch " << epoch << " loss " << result.log.back().mean_loss << " margin " << margin;
      progress(msg.str());
    }
  }
  result.params = std::move(params);
  return result;
}

}  // namespace backgen
