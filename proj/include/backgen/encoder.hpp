#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "backgen/model.hpp"
#include "backgen/tree.hpp"

namespace backgen {

/// Span representation r(i,j) for every 1 <= i <= j <= n, stored densely.
class SpanRepTable {
 public:
  SpanRepTable() = default;
  SpanRepTable(int n, int dim) : n_(n), dim_(dim), data_(static_cast<std::size_t>(n) * n * dim, 0.0) {}

  int size() const { return n_; }
  int dim() const { return dim_; }
  std::span<double> at(int i, int j) { return {data_.data() + offset(i, j), static_cast<std::size_t>(dim_)}; }
  std::span<const double> at(int i, int j) const {
    return {data_.data() + offset(i, j), static_cast<std::size_t>(dim_)};
  }
  std::span<const double> at(Span s) const { return at(s.i, s.j); }

  /// Number of spans with a representation.
  int count() const { return n_ * (n_ + 1) / 2; }

  friend bool operator==(const SpanRepTable&, const SpanRepTable&) = default;

 private:
  std::size_t offset(int i, int j) const {
    return (static_cast<std::size_t>(i - 1) * n_ + static_cast<std::size_t>(j - 1)) * dim_;
  }

  int n_ = 0;
  int dim_ = 0;
  std::vector<double> data_;
};

/// Activations kept for the backward pass of one recurrent direction.
struct LstmTrace {
  std::vector<std::vector<double>> gates;  // i, f, g, o after activation; 4H per step
  std::vector<std::vector<double>> cell;
  std::vector<std::vector<double>> hidden;
};

/// Forward state of one sentence. Positions 0 and n+1 hold the boundary
/// markers; word w sits at position w.
struct Encoding {
  std::vector<int> ids;
  LstmTrace fwd;
  LstmTrace bwd;
  std::vector<std::vector<double>> proj_fwd;  // Pf * fwd.hidden[t]
  std::vector<std::vector<double>> proj_bwd;  // Pb * bwd.hidden[t]
  SpanRepTable reps;

  int length() const { return reps.size(); }
};

namespace detail {

inline LstmTrace run_lstm(const ParamSet& w, int wx, int wh, int b, const std::vector<int>& ids, bool reverse,
                          int hidden) {
  const int T = static_cast<int>(ids.size());
  const int H = hidden;
  LstmTrace trace;
  trace.gates.assign(T, std::vector<double>(4 * H));
  trace.cell.assign(T, std::vector<double>(H));
  trace.hidden.assign(T, std::vector<double>(H));
  std::vector<double> h_prev(H, 0.0), c_prev(H, 0.0), z(4 * H);
  for (int step = 0; step < T; ++step) {
    const int t = reverse ? T - 1 - step : step;
    std::copy(w[b].data.begin(), w[b].data.end(), z.begin());
    linalg::gemv_acc(w[wx], w[kEmbedding].row(ids[t]), z);
    linalg::gemv_acc(w[wh], h_prev, z);
    std::vector<double>& g = trace.gates[t];
    std::vector<double>& c = trace.cell[t];
    std::vector<double>& h = trace.hidden[t];
    for (int k = 0; k < H; ++k) {
      g[k] = linalg::sigmoid(z[k]);
      g[H + k] = linalg::sigmoid(z[H + k]);
      g[2 * H + k] = std::tanh(z[2 * H + k]);
      g[3 * H + k] = linalg::sigmoid(z[3 * H + k]);
      c[k] = g[H + k] * c_prev[k] + g[k] * g[2 * H + k];
      h[k] = g[3 * H + k] * std::tanh(c[k]);
    }
    h_prev = h;
    c_prev = c;
  }
  return trace;
}

/// Backpropagates dL/dh[t] through one direction, accumulating parameter
/// gradients and dL/d(embedding row).
inline void backprop_lstm(const ParamSet& w, ParamSet& grads, int wx, int wh, int b, const std::vector<int>& ids,
                          const LstmTrace& trace, std::vector<std::vector<double>> dh_ext, bool reverse, int hidden) {
  const int T = static_cast<int>(ids.size());
  const int H = hidden;
  std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0), dz(4 * H), dh(H), zero(H, 0.0);
  for (int step = T - 1; step >= 0; --step) {
    const int t = reverse ? T - 1 - step : step;
    const int prev = reverse ? t + 1 : t - 1;
    const bool has_prev = reverse ? (t + 1 < T) : (t > 0);
    const std::vector<double>& g = trace.gates[t];
    const std::vector<double>& c = trace.cell[t];
    const std::vector<double>& c_prev = has_prev ? trace.cell[prev] : zero;
    const std::vector<double>& h_prev = has_prev ? trace.hidden[prev] : zero;
    for (int k = 0; k < H; ++k) dh[k] = dh_ext[t][k] + dh_next[k];
    std::vector<double> dc(H);
    for (int k = 0; k < H; ++k) {
      const double tc = std::tanh(c[k]);
      const double i = g[k], f = g[H + k], gg = g[2 * H + k], o = g[3 * H + k];
      dc[k] = dc_next[k] + dh[k] * o * (1.0 - tc * tc);
      dz[k] = dc[k] * gg * i * (1.0 - i);
      dz[H + k] = dc[k] * c_prev[k] * f * (1.0 - f);
      dz[2 * H + k] = dc[k] * i * (1.0 - gg * gg);
      dz[3 * H + k] = dh[k] * tc * o * (1.0 - o);
      dc_next[k] = dc[k] * f;
    }
    for (int k = 0; k < 4 * H; ++k) grads[b].data[k] += dz[k];
    linalg::outer_acc(grads[wx], dz, w[kEmbedding].row(ids[t]));
    linalg::outer_acc(grads[wh], dz, h_prev);
    linalg::gemv_t_acc(w[wx], dz, grads[kEmbedding].row(ids[t]));
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    linalg::gemv_t_acc(w[wh], dz, dh_next);
  }
}

}  // namespace detail

inline std::vector<int> word_ids(const ModelParams& params, const std::vector<std::string>& words) {
  std::vector<int> ids;
  ids.reserve(words.size() + 2);
  ids.push_back(Vocabulary::kBos);
  for (const std::string& w : words) ids.push_back(params.vocab.id(w));
  ids.push_back(Vocabulary::kEos);
  return ids;
}

/// Full forward pass with the activations needed for backpropagation.
inline Encoding encode_traced(const ModelParams& params, const std::vector<std::string>& words) {
  if (words.empty()) throw Error(ErrorKind::EmptySentence, "cannot encode an empty sentence");
  const ModelDims& d = params.dims;
  const ParamSet& w = params.weights;
  Encoding enc;
  enc.ids = word_ids(params, words);
  enc.fwd = detail::run_lstm(w, kFwdWx, kFwdWh, kFwdB, enc.ids, false, d.recurrent);
  enc.bwd = detail::run_lstm(w, kBwdWx, kBwdWh, kBwdB, enc.ids, true, d.recurrent);
  const int T = static_cast<int>(enc.ids.size());
  const int S = d.span_half;
  enc.proj_fwd.assign(T, std::vector<double>(S, 0.0));
  enc.proj_bwd.assign(T, std::vector<double>(S, 0.0));
  for (int t = 0; t < T; ++t) {
    linalg::gemv_acc(w[kProjF], enc.fwd.hidden[t], enc.proj_fwd[t]);
    linalg::gemv_acc(w[kProjB], enc.bwd.hidden[t], enc.proj_bwd[t]);
  }
  const int n = static_cast<int>(words.size());
  enc.reps = SpanRepTable(n, d.span_dim());
  for (int i = 1; i <= n; ++i) {
    for (int j = i; j <= n; ++j) {
      std::span<double> r = enc.reps.at(i, j);
      for (int k = 0; k < S; ++k) {
        r[k] = enc.proj_fwd[j][k] - enc.proj_fwd[i - 1][k];
        r[S + k] = enc.proj_bwd[i][k] - enc.proj_bwd[j + 1][k];
      }
    }
  }
  return enc;
}

/// r(i,j) = [Pf (f_j - f_{i-1}); Pb (b_i - b_{j+1})] from a bidirectional LSTM
/// over the sentence framed by boundary markers.
inline SpanRepTable encode(const ModelParams& params, const Sentence& sentence) {
  return encode_traced(params, sentence.words).reps;
}

/// Collects dL/dr(i,j) for any subset of spans and folds it onto the
/// projected boundary states.
class SpanGradient {
 public:
  SpanGradient(int n, int span_half)
      : half_(span_half),
        d_fwd_(n + 2, std::vector<double>(span_half, 0.0)),
        d_bwd_(n + 2, std::vector<double>(span_half, 0.0)) {}

  void add(Span s, std::span<const double> grad, double coef = 1.0) {
    for (int k = 0; k < half_; ++k) {
      const double gf = coef * grad[k];
      const double gb = coef * grad[half_ + k];
      d_fwd_[s.j][k] += gf;
      d_fwd_[s.i - 1][k] -= gf;
      d_bwd_[s.i][k] += gb;
      d_bwd_[s.j + 1][k] -= gb;
    }
  }

  const std::vector<std::vector<double>>& d_fwd() const { return d_fwd_; }
  const std::vector<std::vector<double>>& d_bwd() const { return d_bwd_; }

 private:
  int half_;
  std::vector<std::vector<double>> d_fwd_;
  std::vector<std::vector<double>> d_bwd_;
};

/// Accumulates encoder parameter gradients (embeddings, both LSTM directions,
/// projections) given span-level gradients.
inline void backprop_encoder(const ModelParams& params, const Encoding& enc, const SpanGradient& span_grad,
                             ParamSet& grads) {
  const ModelDims& d = params.dims;
  const ParamSet& w = params.weights;
  const int T = static_cast<int>(enc.ids.size());
  std::vector<std::vector<double>> dh_fwd(T, std::vector<double>(d.recurrent, 0.0));
  std::vector<std::vector<double>> dh_bwd(T, std::vector<double>(d.recurrent, 0.0));
  for (int t = 0; t < T; ++t) {
    linalg::outer_acc(grads[kProjF], span_grad.d_fwd()[t], enc.fwd.hidden[t]);
    linalg::outer_acc(grads[kProjB], span_grad.d_bwd()[t], enc.bwd.hidden[t]);
    linalg::gemv_t_acc(w[kProjF], span_grad.d_fwd()[t], dh_fwd[t]);
    linalg::gemv_t_acc(w[kProjB], span_grad.d_bwd()[t], dh_bwd[t]);
  }
  detail::backprop_lstm(w, grads, kFwdWx, kFwdWh, kFwdB, enc.ids, enc.fwd, std::move(dh_fwd), false, d.recurrent);
  detail::backprop_lstm(w, grads, kBwdWx, kBwdWh, kBwdB, enc.ids, enc.bwd, std::move(dh_bwd), true, d.recurrent);
}

}  // namespace backgen
