#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "backgen/encoder.hpp"
#include "backgen/model.hpp"

namespace backgen {

/// s(i,j,l) for every span and label; label 0 is the empty label and always
/// scores zero.
class ScoreChart {
 public:
  ScoreChart() = default;
  ScoreChart(int n, int num_labels)
      : n_(n), labels_(num_labels), data_(static_cast<std::size_t>(n) * n * num_labels, 0.0) {}

  int size() const { return n_; }
  int num_labels() const { return labels_; }

  double& operator()(int i, int j, int l) { return data_[offset(i, j) + l]; }
  double operator()(int i, int j, int l) const { return data_[offset(i, j) + l]; }
  std::span<double> at(int i, int j) { return {data_.data() + offset(i, j), static_cast<std::size_t>(labels_)}; }
  std::span<const double> at(int i, int j) const {
    return {data_.data() + offset(i, j), static_cast<std::size_t>(labels_)};
  }

  friend bool operator==(const ScoreChart&, const ScoreChart&) = default;

 private:
  std::size_t offset(int i, int j) const {
    return (static_cast<std::size_t>(i - 1) * n_ + static_cast<std::size_t>(j - 1)) * labels_;
  }

  int n_ = 0;
  int labels_ = 0;
  std::vector<double> data_;
};

/// Feedforward scores for one span representation; out has num_labels
/// entries, out[0] = 0. hidden, when given, receives tanh(W1 r + b1).
inline void score_span(const ModelParams& params, std::span<const double> rep, std::span<double> out,
                       std::vector<double>* hidden = nullptr) {
  const ParamSet& w = params.weights;
  const int F = params.dims.ff_hidden;
  std::vector<double> h(w[kFfB1].data.begin(), w[kFfB1].data.end());
  linalg::gemv_acc(w[kFfW1], rep, h);
  for (int k = 0; k < F; ++k) h[k] = std::tanh(h[k]);
  out[0] = 0.0;
  std::span<double> scored = out.subspan(1);
  std::copy(w[kFfB2].data.begin(), w[kFfB2].data.end(), scored.begin());
  linalg::gemv_acc(w[kFfW2], h, scored);
  if (hidden) *hidden = std::move(h);
}

inline ScoreChart score_chart(const ModelParams& params, const SpanRepTable& reps) {
  const int n = reps.size();
  ScoreChart chart(n, params.num_labels());
  for (int i = 1; i <= n; ++i) {
    for (int j = i; j <= n; ++j) score_span(params, reps.at(i, j), chart.at(i, j));
  }
  return chart;
}

/// Gradient of a scalar loss that is linear in chart entries:
/// dL/ds(i,j,l) = coef.
struct ChartGradEntry {
  Span span;
  int label;
  double coef;
};

/// Backpropagates chart-entry gradients through the label head; span-level
/// gradients are added to span_grad for the encoder.
inline void backprop_scores(const ModelParams& params, const SpanRepTable& reps,
                            const std::vector<ChartGradEntry>& entries, ParamSet& grads, SpanGradient& span_grad) {
  const ParamSet& w = params.weights;
  const int F = params.dims.ff_hidden;
  const int L = params.num_labels();
  std::vector<double> scores(L), hidden, dscore(L - 1), dh(F), rep_grad(params.dims.span_dim());
  // Entries for the same span are merged so the head runs once per span.
  std::vector<ChartGradEntry> sorted = entries;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ChartGradEntry& a, const ChartGradEntry& b) { return a.span < b.span; });
  std::size_t k = 0;
  while (k < sorted.size()) {
    const Span s = sorted[k].span;
    std::fill(dscore.begin(), dscore.end(), 0.0);
    bool any = false;
    for (; k < sorted.size() && sorted[k].span == s; ++k) {
      if (sorted[k].label == 0 || sorted[k].coef == 0.0) continue;
      dscore[sorted[k].label - 1] += sorted[k].coef;
      any = true;
    }
    if (!any) continue;
    score_span(params, reps.at(s), scores, &hidden);
    linalg::outer_acc(grads[kFfW2], dscore, hidden);
    for (int l = 0; l < L - 1; ++l) grads[kFfB2].data[l] += dscore[l];
    std::fill(dh.begin(), dh.end(), 0.0);
    linalg::gemv_t_acc(w[kFfW2], dscore, dh);
    for (int f = 0; f < F; ++f) dh[f] *= 1.0 - hidden[f] * hidden[f];
    linalg::outer_acc(grads[kFfW1], dh, reps.at(s));
    for (int f = 0; f < F; ++f) grads[kFfB1].data[f] += dh[f];
    std::fill(rep_grad.begin(), rep_grad.end(), 0.0);
    linalg::gemv_t_acc(w[kFfW1], dh, rep_grad);
    span_grad.add(s, rep_grad);
  }
}

}  // namespace backgen
