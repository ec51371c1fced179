#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"

#include "backgen/contrastive.hpp"
#include "backgen/error.hpp"
#include "backgen/evaluation.hpp"
#include "backgen/trainer.hpp"

namespace backgen {

struct LlmSettings {
  std::string endpoint = "http://127.0.0.1:8000/v1/chat/completions";
  std::string model = "gpt-4";
  std::string token_env = "BACKGEN_API_TOKEN";
  std::string mock;  // "", "echo" or "lexicon"
  double mock_corruption = 0.0;
  double temperature = 1.0;
  int retries = 2;
  int concurrency = 1;
  int demos = 2;
  int parse_demos = 10;
};

struct PathSettings {
  std::vector<std::string> train;
  std::vector<double> train_weights;
  std::string dev;
  std::string test;
  std::string demos;
  std::string checkpoint;
  std::string init_checkpoint;
  std::string embeddings;
  std::string output_dir = "out";
};

struct PipelineConfig {
  std::uint64_t seed = 1;
  double mask_rate = 0.75;
  std::string keyword_scorer = "hash";  // "hash", "model" (uses init_checkpoint) or "file" (uses embeddings)
  PathSettings paths;
  LlmSettings llm;
  ModelDims model;
  TrainConfig train;
  ContrastiveConfig contrastive;
  EvalConfig eval;
};

namespace detail {

/// Reads typed fields out of a JSON object, remembering which keys were seen
/// so unknown fields can be reported with their full path.
class FieldReader {
 public:
  FieldReader(const nlohmann::json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw std::invalid_argument("expected true or false");
      } else if constexpr (std::is_same_v<T, std::uint64_t>) {
        if (!it->is_number_integer() || it->template get<std::int64_t>() < 0) {
          throw std::invalid_argument("expected a non-negative integer");
        }
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw std::invalid_argument("expected an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw std::invalid_argument("expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw std::invalid_argument("expected a string");
      }
      out = it->get<T>();
    } catch (const std::exception& e) {
      fail(qualified(key), e.what());
    }
  }

  FieldReader child(const std::string& key) {
    seen_.insert(key);
    static const nlohmann::json empty = nlohmann::json::object();
    auto it = obj_.find(key);
    return FieldReader(it == obj_.end() ? empty : *it, qualified(key));
  }

  void reject_unknown() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.contains(it.key())) fail(qualified(it.key()), "unknown field");
    }
  }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  [[noreturn]] static void fail(const std::string& field, const std::string& why) {
    throw Error(ErrorKind::BadConfig, "config field '" + field + "': " + why);
  }

 private:
  const nlohmann::json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

inline std::string mode_name(EvalMode m) { return m == EvalMode::Full ? "full" : "valid"; }

}  // namespace detail

inline EvalMode parse_eval_mode(const std::string& s) {
  if (s == "full") return EvalMode::Full;
  if (s == "valid") return EvalMode::Valid;
  throw Error(ErrorKind::BadConfig, "config field 'eval.mode': expected 'full' or 'valid', got '" + s + "'");
}

/// Checks ranges that the type system does not.
inline void validate_config(const PipelineConfig& c) {
  using detail::FieldReader;
  if (!(c.mask_rate >= 0.0 && c.mask_rate <= 1.0)) FieldReader::fail("mask_rate", "must be in [0, 1]");
  if (c.keyword_scorer != "hash" && c.keyword_scorer != "model" && c.keyword_scorer != "file") {
    FieldReader::fail("keyword_scorer", "expected 'hash', 'model' or 'file'");
  }
  if (c.llm.mock != "" && c.llm.mock != "echo" && c.llm.mock != "lexicon") {
    FieldReader::fail("llm.mock", "expected '', 'echo' or 'lexicon'");
  }
  if (!(c.llm.mock_corruption >= 0.0 && c.llm.mock_corruption <= 1.0)) {
    FieldReader::fail("llm.mock_corruption", "must be in [0, 1]");
  }
  if (c.llm.retries < 0) FieldReader::fail("llm.retries", "must be >= 0");
  if (c.llm.concurrency < 1) FieldReader::fail("llm.concurrency", "must be >= 1");
  if (c.llm.demos < 0) FieldReader::fail("llm.demos", "must be >= 0");
  if (c.llm.parse_demos < 0) FieldReader::fail("llm.parse_demos", "must be >= 0");
  if (!c.paths.train_weights.empty() && c.paths.train_weights.size() != c.paths.train.size()) {
    FieldReader::fail("paths.train_weights", "needs one weight per paths.train entry");
  }
  if (c.model.embedding < 1 || c.model.recurrent < 1 || c.model.span_half < 1 || c.model.ff_hidden < 1) {
    FieldReader::fail("model", "every dimension must be >= 1");
  }
  if (!(c.train.learning_rate > 0.0)) FieldReader::fail("train.learning_rate", "must be positive");
  if (c.train.batch_size < 1) FieldReader::fail("train.batch_size", "must be >= 1");
  if (c.train.warmup_steps < 0) FieldReader::fail("train.warmup_steps", "must be >= 0");
  if (c.train.max_epochs < 1) FieldReader::fail("train.max_epochs", "must be >= 1");
  if (c.train.early_stop_patience_epochs < 0) FieldReader::fail("train.early_stop_patience_epochs", "must be >= 0");
  if (!(c.contrastive.temperature > 0.0)) FieldReader::fail("contrastive.temperature", "must be positive");
  if (!(c.contrastive.sample_rate > 0.0 && c.contrastive.sample_rate <= 1.0)) {
    FieldReader::fail("contrastive.sample_rate", "must be in (0, 1]");
  }
  if (!(c.contrastive.learning_rate > 0.0)) FieldReader::fail("contrastive.learning_rate", "must be positive");
  if (c.contrastive.batch_size < 1) FieldReader::fail("contrastive.batch_size", "must be >= 1");
  if (c.contrastive.epochs < 0) FieldReader::fail("contrastive.epochs", "must be >= 0");
}

/// Overlays the fields present in `j` onto `base`.
inline PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig base = {}) {
  using detail::FieldReader;
  PipelineConfig c = std::move(base);
  FieldReader root(j, "");
  root.read("seed", c.seed);
  root.read("mask_rate", c.mask_rate);
  root.read("keyword_scorer", c.keyword_scorer);

  FieldReader paths = root.child("paths");
  paths.read("train", c.paths.train);
  paths.read("train_weights", c.paths.train_weights);
  paths.read("dev", c.paths.dev);
  paths.read("test", c.paths.test);
  paths.read("demos", c.paths.demos);
  paths.read("checkpoint", c.paths.checkpoint);
  paths.read("init_checkpoint", c.paths.init_checkpoint);
  paths.read("embeddings", c.paths.embeddings);
  paths.read("output_dir", c.paths.output_dir);
  paths.reject_unknown();

  FieldReader llm = root.child("llm");
  llm.read("endpoint", c.llm.endpoint);
  llm.read("model", c.llm.model);
  llm.read("token_env", c.llm.token_env);
  llm.read("mock", c.llm.mock);
  llm.read("mock_corruption", c.llm.mock_corruption);
  llm.read("temperature", c.llm.temperature);
  llm.read("retries", c.llm.retries);
  llm.read("concurrency", c.llm.concurrency);
  llm.read("demos", c.llm.demos);
  llm.read("parse_demos", c.llm.parse_demos);
  llm.reject_unknown();

  FieldReader model = root.child("model");
  model.read("embedding", c.model.embedding);
  model.read("recurrent", c.model.recurrent);
  model.read("span_half", c.model.span_half);
  model.read("ff_hidden", c.model.ff_hidden);
  model.reject_unknown();

  FieldReader train = root.child("train");
  train.read("learning_rate", c.train.learning_rate);
  train.read("batch_size", c.train.batch_size);
  train.read("warmup_steps", c.train.warmup_steps);
  train.read("early_stop_patience_epochs", c.train.early_stop_patience_epochs);
  train.read("max_epochs", c.train.max_epochs);
  train.read("eval_every_steps", c.train.eval_every_steps);
  train.read("weight_decay", c.train.weight_decay);
  train.reject_unknown();

  FieldReader ct = root.child("contrastive");
  ct.read("temperature", c.contrastive.temperature);
  ct.read("sample_rate", c.contrastive.sample_rate);
  ct.read("learning_rate", c.contrastive.learning_rate);
  ct.read("batch_size", c.contrastive.batch_size);
  ct.read("epochs", c.contrastive.epochs);
  ct.read("weight_decay", c.contrastive.weight_decay);
  ct.reject_unknown();

  FieldReader ev = root.child("eval");
  std::string mode = detail::mode_name(c.eval.mode);
  ev.read("mode", mode);
  c.eval.mode = parse_eval_mode(mode);
  ev.read("ignore_pos", c.eval.ignore_pos);
  ev.read("per_domain", c.eval.per_domain);
  ev.reject_unknown();

  root.reject_unknown();
  c.train.seed = c.seed;
  c.contrastive.seed = c.seed;
  validate_config(c);
  return c;
}

inline nlohmann::json config_to_json(const PipelineConfig& c) {
  return {
      {"seed", c.seed},
      {"mask_rate", c.mask_rate},
      {"keyword_scorer", c.keyword_scorer},
      {"paths",
       {{"train", c.paths.train},
        {"train_weights", c.paths.train_weights},
        {"dev", c.paths.dev},
        {"test", c.paths.test},
        {"demos", c.paths.demos},
        {"checkpoint", c.paths.checkpoint},
        {"init_checkpoint", c.paths.init_checkpoint},
        {"embeddings", c.paths.embeddings},
        {"output_dir", c.paths.output_dir}}},
      {"llm",
       {{"endpoint", c.llm.endpoint},
        {"model", c.llm.model},
        {"token_env", c.llm.token_env},
        {"mock", c.llm.mock},
        {"mock_corruption", c.llm.mock_corruption},
        {"temperature", c.llm.temperature},
        {"retries", c.llm.retries},
        {"concurrency", c.llm.concurrency},
        {"demos", c.llm.demos},
        {"parse_demos", c.llm.parse_demos}}},
      {"model",
       {{"embedding", c.model.embedding},
        {"recurrent", c.model.recurrent},
        {"span_half", c.model.span_half},
        {"ff_hidden", c.model.ff_hidden}}},
      {"train",
       {{"learning_rate", c.train.learning_rate},
        {"batch_size", c.train.batch_size},
        {"warmup_steps", c.train.warmup_steps},
        {"early_stop_patience_epochs", c.train.early_stop_patience_epochs},
        {"max_epochs", c.train.max_epochs},
        {"eval_every_steps", c.train.eval_every_steps},
        {"weight_decay", c.train.weight_decay}}},
      {"contrastive",
       {{"temperature", c.contrastive.temperature},
        {"sample_rate", c.contrastive.sample_rate},
        {"learning_rate", c.contrastive.learning_rate},
        {"batch_size", c.contrastive.batch_size},
        {"epochs", c.contrastive.epochs},
        {"weight_decay", c.contrastive.weight_decay}}},
      {"eval",
       {{"mode", detail::mode_name(c.eval.mode)}, {"ignore_pos", c.eval.ignore_pos}, {"per_domain", c.eval.per_domain}}},
  };
}

inline PipelineConfig load_config(const std::string& path, PipelineConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::BadConfig, path + ": " + e.what());
  }
  return config_from_json(j, std::move(base));
}

/// Hex SHA-256 of a file's bytes.
inline std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot hash '" + path + "'");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char byte[3];
  for (unsigned int k = 0; k < len; ++k) {
    std::snprintf(byte, sizeof byte, "%02x", digest[k]);
    hex += byte;
  }
  return hex;
}

/// Run record: command, configuration snapshot, seed and artifact hashes.
/// Nothing time-dependent is stored, so identical runs give identical files.
struct Manifest {
  std::string command;
  PipelineConfig config;
  std::map<std::string, std::string> artifacts;  // name -> sha256
  nlohmann::json extra = nlohmann::json::object();

  void add_artifact(const std::string& name, const std::string& path) { artifacts[name] = sha256_file(path); }

  nlohmann::json to_json() const {
    return {{"command", command},
            {"seed", config.seed},
            {"config", config_to_json(config)},
            {"artifacts", artifacts},
            {"extra", extra}};
  }

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
    out << to_json().dump(2) << '\n';
  }
};

}  // namespace backgen
