#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "backgen/binary_tree.hpp"
#include "backgen/error.hpp"
#include "backgen/rng.hpp"

namespace backgen {

struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::span<double> row(int r) { return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }
  std::span<const double> row(int r) const {
    return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }
  std::size_t size() const { return data.size(); }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Indices into ParamSet::tensors. Everything before kFfW1 belongs to the
/// span encoder; kFfW1 onwards is the label-scoring head.
enum ParamId : int {
  kEmbedding = 0,
  kFwdWx,
  kFwdWh,
  kFwdB,
  kBwdWx,
  kBwdWh,
  kBwdB,
  kProjF,
  kProjB,
  kFfW1,
  kFfB1,
  kFfW2,
  kFfB2,
  kNumParams,
};

inline constexpr std::string_view kParamNames[kNumParams] = {
    "embedding", "fwd.wx", "fwd.wh", "fwd.b", "bwd.wx", "bwd.wh", "bwd.b",
    "proj.fwd", "proj.bwd", "ff.w1", "ff.b1", "ff.w2", "ff.b2",
};

inline bool is_encoder_param(int id) { return id < kFfW1; }

struct ParamSet {
  std::vector<Tensor> tensors;

  Tensor& operator[](int id) { return tensors[static_cast<std::size_t>(id)]; }
  const Tensor& operator[](int id) const { return tensors[static_cast<std::size_t>(id)]; }

  ParamSet zeros_like() const {
    ParamSet out;
    for (const Tensor& t : tensors) out.tensors.emplace_back(t.rows, t.cols);
    return out;
  }

  void set_zero() {
    for (Tensor& t : tensors) std::fill(t.data.begin(), t.data.end(), 0.0);
  }

  void scale(double factor) {
    for (Tensor& t : tensors) {
      for (double& x : t.data) x *= factor;
    }
  }

  friend bool operator==(const ParamSet&, const ParamSet&) = default;
};

/// Word ids: 0 is UNK, 1 and 2 are the sentence boundary markers.
class Vocabulary {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;

  Vocabulary() : words_{"<unk>", "<s>", "</s>"} { rebuild_index(); }

  explicit Vocabulary(std::vector<std::string> words) : words_(std::move(words)) { rebuild_index(); }

  int add(const std::string& w) {
    auto it = index_.find(w);
    if (it != index_.end()) return it->second;
    const int id = static_cast<int>(words_.size());
    words_.push_back(w);
    index_.emplace(w, id);
    return id;
  }

  int id(const std::string& w) const {
    auto it = index_.find(w);
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& w) const { return index_.contains(w); }
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.words_ == b.words_; }

 private:
  void rebuild_index() {
    index_.clear();
    for (std::size_t k = 0; k < words_.size(); ++k) index_.emplace(words_[k], static_cast<int>(k));
  }

  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

/// Label inventory; index 0 is always the empty label, whose score is fixed
/// at zero.
class LabelSet {
 public:
  LabelSet() : labels_{std::string(kEmptyLabel)} { rebuild_index(); }
  explicit LabelSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
    if (labels_.empty() || labels_.front() != kEmptyLabel) {
      throw Error(ErrorKind::BadCheckpoint, "label inventory must start with the empty label");
    }
    rebuild_index();
  }

  int add(const std::string& l) {
    auto it = index_.find(l);
    if (it != index_.end()) return it->second;
    const int id = static_cast<int>(labels_.size());
    labels_.push_back(l);
    index_.emplace(l, id);
    return id;
  }

  /// -1 when the label is unknown.
  int id(const std::string& l) const {
    auto it = index_.find(l);
    return it == index_.end() ? -1 : it->second;
  }

  const std::string& name(int id) const { return labels_[static_cast<std::size_t>(id)]; }
  int size() const { return static_cast<int>(labels_.size()); }
  const std::vector<std::string>& labels() const { return labels_; }

  friend bool operator==(const LabelSet& a, const LabelSet& b) { return a.labels_ == b.labels_; }

 private:
  void rebuild_index() {
    index_.clear();
    for (std::size_t k = 0; k < labels_.size(); ++k) index_.emplace(labels_[k], static_cast<int>(k));
  }

  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> index_;
};

struct ModelDims {
  int embedding = 64;
  int recurrent = 64;    // per direction
  int span_half = 128;   // span vector is two halves
  int ff_hidden = 128;

  int span_dim() const { return 2 * span_half; }

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct ModelParams {
  ModelDims dims;
  Vocabulary vocab;
  LabelSet labels;
  ParamSet weights;

  int num_labels() const { return labels.size(); }
};

inline void build_inventories(const std::vector<BinaryTree>& trees, Vocabulary& vocab, LabelSet& labels) {
  for (const BinaryTree& t : trees) {
    for (const LabeledSpan& ls : constituent_spans(t)) labels.add(ls.label);
    for (const std::string& w : words(t)) vocab.add(w);
  }
}

/// Embeddings uniform(-0.1, 0.1); matrices uniform(+-1/sqrt(fan_in)); biases 0.
inline ModelParams init_model(const ModelDims& dims, Vocabulary vocab, LabelSet labels, std::uint64_t seed) {
  ModelParams p;
  p.dims = dims;
  p.vocab = std::move(vocab);
  p.labels = std::move(labels);
  const int E = dims.embedding, H = dims.recurrent, S = dims.span_half, F = dims.ff_hidden;
  const int scored = p.labels.size() - 1;
  std::vector<Tensor>& t = p.weights.tensors;
  t.resize(kNumParams);
  t[kEmbedding] = Tensor(p.vocab.size(), E);
  t[kFwdWx] = Tensor(4 * H, E);
  t[kFwdWh] = Tensor(4 * H, H);
  t[kFwdB] = Tensor(1, 4 * H);
  t[kBwdWx] = Tensor(4 * H, E);
  t[kBwdWh] = Tensor(4 * H, H);
  t[kBwdB] = Tensor(1, 4 * H);
  t[kProjF] = Tensor(S, H);
  t[kProjB] = Tensor(S, H);
  t[kFfW1] = Tensor(F, 2 * S);
  t[kFfB1] = Tensor(1, F);
  t[kFfW2] = Tensor(scored, F);
  t[kFfB2] = Tensor(1, scored);

  Rng rng(seed);
  for (double& x : t[kEmbedding].data) x = rng.uniform(-0.1, 0.1);
  for (int id : {kFwdWx, kFwdWh, kBwdWx, kBwdWh, kProjF, kProjB, kFfW1, kFfW2}) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(t[id].cols));
    for (double& x : t[id].data) x = rng.uniform(-bound, bound);
  }
  return p;
}

inline bool all_finite(const ParamSet& set) {
  for (const Tensor& t : set.tensors) {
    for (double x : t.data) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

namespace linalg {

/// y += W x
inline void gemv_acc(const Tensor& w, std::span<const double> x, std::span<double> y) {
  for (int r = 0; r < w.rows; ++r) {
    const double* row = w.data.data() + static_cast<std::size_t>(r) * w.cols;
    double acc = 0.0;
    for (int c = 0; c < w.cols; ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
}

/// y += W^T x
inline void gemv_t_acc(const Tensor& w, std::span<const double> x, std::span<double> y) {
  for (int r = 0; r < w.rows; ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    const double* row = w.data.data() + static_cast<std::size_t>(r) * w.cols;
    for (int c = 0; c < w.cols; ++c) y[c] += row[c] * xr;
  }
}

/// G += a b^T
inline void outer_acc(Tensor& g, std::span<const double> a, std::span<const double> b) {
  for (int r = 0; r < g.rows; ++r) {
    const double ar = a[r];
    if (ar == 0.0) continue;
    double* row = g.data.data() + static_cast<std::size_t>(r) * g.cols;
    for (int c = 0; c < g.cols; ++c) row[c] += ar * b[c];
  }
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace linalg

}  // namespace backgen
