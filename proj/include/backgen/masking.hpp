#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "backgen/error.hpp"
#include "backgen/model.hpp"
#include "backgen/rng.hpp"
#include "backgen/tree.hpp"

namespace backgen {

/// POS tags whose leaves are never masked and never count as keywords.
inline const std::set<std::string>& punctuation_tags() {
  static const std::set<std::string> tags{".", ",", ":", "``", "''", "-LRB-", "-RRB-", "-NONE-"};
  return tags;
}

inline bool is_punctuation(const std::string& pos) { return punctuation_tags().contains(pos); }

/// Source of word vectors for keyword scoring.
class WordEmbedder {
 public:
  virtual ~WordEmbedder() = default;
  virtual std::vector<double> embed(const std::string& word) const = 0;
};

/// Deterministic pseudo-random vector per word form (FNV-1a seeded).
class HashEmbedder : public WordEmbedder {
 public:
  explicit HashEmbedder(int dim = 64, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {}

  std::vector<double> embed(const std::string& word) const override {
    std::uint64_t h = 1469598103934665603ULL ^ seed_;
    for (unsigned char c : word) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    Rng rng(h);
    std::vector<double> v(static_cast<std::size_t>(dim_));
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
  }

 private:
  int dim_;
  std::uint64_t seed_;
};

/// Looks words up in a table; unknown words fall back to another embedder.
class TableEmbedder : public WordEmbedder {
 public:
  TableEmbedder(std::unordered_map<std::string, std::vector<double>> table, std::shared_ptr<const WordEmbedder> fallback)
      : table_(std::move(table)), fallback_(std::move(fallback)) {}

  /// Uses the word-embedding rows of a trained model.
  static TableEmbedder from_model(const ModelParams& params) {
    std::unordered_map<std::string, std::vector<double>> table;
    const Tensor& emb = params.weights[kEmbedding];
    for (int id = 3; id < params.vocab.size(); ++id) {
      auto row = emb.row(id);
      table.emplace(params.vocab.words()[static_cast<std::size_t>(id)], std::vector<double>(row.begin(), row.end()));
    }
    return TableEmbedder(std::move(table), std::make_shared<HashEmbedder>(emb.cols));
  }

  /// Reads "word v1 v2 ..." lines (word2vec/GloVe text format). A first line
  /// holding only two integers is treated as a header.
  static TableEmbedder from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open embeddings '" + path + "'");
    std::unordered_map<std::string, std::vector<double>> table;
    std::string line;
    int dim = 0;
    bool first = true;
    while (std::getline(in, line)) {
      std::istringstream fields(line);
      std::string word;
      if (!(fields >> word)) continue;
      std::vector<double> v;
      double x;
      while (fields >> x) v.push_back(x);
      if (first && v.size() == 1) {
        first = false;
        continue;
      }
      first = false;
      if (dim == 0) dim = static_cast<int>(v.size());
      if (static_cast<int>(v.size()) != dim) {
        throw Error(ErrorKind::BadConfig, "embedding for '" + word + "' has dimension " + std::to_string(v.size()));
      }
      table.emplace(std::move(word), std::move(v));
    }
    if (dim == 0) throw Error(ErrorKind::BadConfig, "no vectors in '" + path + "'");
    return TableEmbedder(std::move(table), std::make_shared<HashEmbedder>(dim));
  }

  std::vector<double> embed(const std::string& word) const override {
    auto it = table_.find(word);
    if (it != table_.end()) return it->second;
    return fallback_->embed(word);
  }

 private:
  std::unordered_map<std::string, std::vector<double>> table_;
  std::shared_ptr<const WordEmbedder> fallback_;
};

struct KeywordScore {
  int index = 0;  // 1-based word position
  double score = 0.0;
};

/// Cosine of each non-punctuation word with the mean of the sentence's
/// non-punctuation word vectors.
inline std::vector<KeywordScore> keyword_scores(const Sentence& sentence, const WordEmbedder& embedder) {
  if (sentence.words.empty()) throw Error(ErrorKind::EmptySentence, "keyword extraction on an empty sentence");
  std::vector<int> content;
  std::vector<std::vector<double>> vecs;
  for (int k = 0; k < sentence.size(); ++k) {
    const bool punct = !sentence.pos.empty() && is_punctuation(sentence.pos[static_cast<std::size_t>(k)]);
    if (punct) continue;
    content.push_back(k + 1);
    vecs.push_back(embedder.embed(sentence.words[static_cast<std::size_t>(k)]));
  }
  std::vector<KeywordScore> out;
  if (content.empty()) return out;
  std::vector<double> mean(vecs.front().size(), 0.0);
  for (const auto& v : vecs) {
    for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += v[d] / static_cast<double>(vecs.size());
  }
  auto norm_of = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };
  const double mean_norm = norm_of(mean);
  for (std::size_t k = 0; k < content.size(); ++k) {
    const double vn = norm_of(vecs[k]);
    double score = 0.0;
    if (vn > 0.0 && mean_norm > 0.0) {
      double d = 0.0;
      for (std::size_t x = 0; x < mean.size(); ++x) d += vecs[k][x] * mean[x];
      score = d / (vn * mean_norm);
    }
    out.push_back({content[k], score});
  }
  return out;
}

/// Number of keywords kept for m content words: ceil(keep_rate * m), at least
/// one when keep_rate > 0.
inline int keyword_budget(int content_words, double keep_rate) {
  if (content_words <= 0 || keep_rate <= 0.0) return 0;
  const int k = static_cast<int>(std::ceil(keep_rate * content_words - 1e-9));
  return std::clamp(k, 1, content_words);
}

/// Top-scoring content-word positions (1-based, ascending). Ties go to the
/// earlier position.
inline std::vector<int> extract_keywords(const Sentence& sentence, double keep_rate, const WordEmbedder& embedder) {
  if (keep_rate < 0.0 || keep_rate > 1.0) throw Error(ErrorKind::BadConfig, "keep_rate must be in [0, 1]");
  std::vector<KeywordScore> scores = keyword_scores(sentence, embedder);
  std::stable_sort(scores.begin(), scores.end(), [](const KeywordScore& a, const KeywordScore& b) {
    return a.score > b.score || (a.score == b.score && a.index < b.index);
  });
  const int k = keyword_budget(static_cast<int>(scores.size()), keep_rate);
  std::vector<int> out;
  for (int x = 0; x < k; ++x) out.push_back(scores[static_cast<std::size_t>(x)].index);
  std::sort(out.begin(), out.end());
  return out;
}

/// Tree with non-keyword words blanked. kept_indices lists every position
/// whose word survives, punctuation included.
struct MaskedTree {
  Tree structure;
  std::vector<int> kept_indices;
};

/// Blanks every leaf not in `kept` unless it is punctuation. Labels, POS tags
/// and arities are untouched.
inline MaskedTree mask_tree(const Tree& tree, const std::vector<int>& kept) {
  const int n = static_cast<int>(leaves(tree).size());
  std::set<int> keep;
  for (int k : kept) {
    if (k < 1 || k > n) {
      throw Error(ErrorKind::IndexOutOfRange, "index " + std::to_string(k) + " outside 1.." + std::to_string(n));
    }
    keep.insert(k);
  }
  MaskedTree out;
  out.structure = tree;
  int position = 0;
  auto walk = [&](auto&& self, Tree& t) -> void {
    if (t.is_leaf()) {
      ++position;
      if (keep.contains(position) || is_punctuation(t.label)) {
        out.kept_indices.push_back(position);
      } else {
        t.word = "";
      }
      return;
    }
    for (Tree& c : t.children) self(self, c);
  };
  walk(walk, out.structure);
  return out;
}

/// Bracketed form with blank slots written as "(POS )".
inline std::string render_masked(const MaskedTree& masked) { return render_bracketed(masked.structure); }

/// Parses a rendered masked tree; positions with a word become kept_indices.
inline MaskedTree parse_masked(std::string_view text) {
  MaskedTree out;
  out.structure = parse_masked_bracketed(text);
  int position = 0;
  for (const Tree* leaf : leaves(out.structure)) {
    ++position;
    if (!leaf->word->empty()) out.kept_indices.push_back(position);
  }
  return out;
}

/// One line of the masked-record file.
struct MaskedRecord {
  std::string id;
  std::string masked_render;
  std::string original_render;
  std::vector<int> kept_indices;
  std::string domain;
};

inline nlohmann::json to_json(const MaskedRecord& r) {
  nlohmann::json j{{"id", r.id},
                   {"masked_render", r.masked_render},
                   {"original_render", r.original_render},
                   {"kept_indices", r.kept_indices}};
  if (!r.domain.empty()) j["domain"] = r.domain;
  return j;
}

inline MaskedRecord masked_record_from_json(const nlohmann::json& j) {
  MaskedRecord r;
  r.id = j.at("id").get<std::string>();
  r.masked_render = j.at("masked_render").get<std::string>();
  r.original_render = j.value("original_render", std::string());
  r.kept_indices = j.at("kept_indices").get<std::vector<int>>();
  r.domain = j.value("domain", std::string());
  return r;
}

inline void write_masked_records(const std::string& path, const std::vector<MaskedRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  for (const MaskedRecord& r : records) out << to_json(r).dump() << '\n';
}

inline std::vector<MaskedRecord> read_masked_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  std::vector<MaskedRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(masked_record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::BadConfig, path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

/// Masks every tree at the given keep rate. Ids are "<prefix><index>".
inline std::vector<MaskedRecord> mask_treebank(const std::vector<Tree>& trees, double keep_rate,
                                               const WordEmbedder& embedder, const std::string& id_prefix = "",
                                               const std::string& domain = "") {
  std::vector<MaskedRecord> out;
  out.reserve(trees.size());
  for (std::size_t k = 0; k < trees.size(); ++k) {
    const Tree& t = trees[k];
    const MaskedTree masked = mask_tree(t, extract_keywords(sentence_of(t), keep_rate, embedder));
    out.push_back({id_prefix + std::to_string(k), render_masked(masked), render_bracketed(t), masked.kept_indices, domain});
  }
  return out;
}

}  // namespace backgen
