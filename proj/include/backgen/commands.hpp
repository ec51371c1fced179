#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "backgen/backgen_pipeline.hpp"
#include "backgen/checkpoint.hpp"
#include "backgen/config.hpp"
#include "backgen/contrastive.hpp"
#include "backgen/evaluation.hpp"
#include "backgen/llm.hpp"
#include "backgen/llm_client.hpp"
#include "backgen/masking.hpp"
#include "backgen/synthetic.hpp"
#include "backgen/trainer.hpp"

// Pipeline steps behind the command-line tool. Each run_* reads its inputs,
// writes its artifacts into config.paths.output_dir together with a
// "<command>_manifest.json", and returns a short JSON summary.

namespace backgen {

using Logger = std::function<void(const std::string&)>;

namespace detail {

inline std::string output_file(const PipelineConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.paths.output_dir);
  return (std::filesystem::path(cfg.paths.output_dir) / name).string();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  out << text;
}

inline void log_to(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

inline void finish_manifest(Manifest& m, const PipelineConfig& cfg) {
  m.write(output_file(cfg, m.command + "_manifest.json"));
}

}  // namespace detail

inline std::shared_ptr<const WordEmbedder> make_embedder(const PipelineConfig& cfg) {
  if (cfg.keyword_scorer == "hash") return std::make_shared<HashEmbedder>();
  if (cfg.keyword_scorer == "file") {
    if (cfg.paths.embeddings.empty()) throw Error(ErrorKind::BadConfig, "keyword_scorer 'file' needs paths.embeddings");
    return std::make_shared<TableEmbedder>(TableEmbedder::from_file(cfg.paths.embeddings));
  }
  if (cfg.paths.init_checkpoint.empty()) {
    throw Error(ErrorKind::BadConfig, "keyword_scorer 'model' needs paths.init_checkpoint");
  }
  return std::make_shared<TableEmbedder>(TableEmbedder::from_model(load_checkpoint(cfg.paths.init_checkpoint).params));
}

inline double keep_rate(const PipelineConfig& cfg) { return 1.0 - cfg.mask_rate; }

/// Real endpoint unless llm.mock names an offline backend. The token is read
/// from the environment variable named by llm.token_env.
inline std::shared_ptr<const ChatBackend> make_http_backend(const PipelineConfig& cfg) {
  HttpClientOptions opts;
  opts.endpoint = cfg.llm.endpoint;
  if (const char* token = std::getenv(cfg.llm.token_env.c_str())) opts.auth_token = token;
  return std::make_shared<HttpChatClient>(opts);
}

/// Echo mode answers each record with its original tree; lexicon mode fills
/// slots from the lexicon trees (or from the originals when none are given).
inline std::shared_ptr<const ChatBackend> make_backgen_backend(const PipelineConfig& cfg,
                                                               const std::vector<MaskedRecord>& records,
                                                               const std::vector<Tree>& lexicon_trees) {
  if (cfg.llm.mock.empty()) return make_http_backend(cfg);
  auto mode = cfg.llm.mock == "echo" ? MockBackGenLlm::Mode::Echo : MockBackGenLlm::Mode::Lexicon;
  auto mock = std::make_shared<MockBackGenLlm>(mode, cfg.seed);
  if (mode == MockBackGenLlm::Mode::Echo) {
    for (const MaskedRecord& r : records) {
      if (!r.original_render.empty()) mock->remember(r.masked_render, r.original_render);
    }
  } else if (!lexicon_trees.empty()) {
    mock->add_lexicon(lexicon_trees);
  } else {
    std::vector<Tree> originals;
    for (const MaskedRecord& r : records) {
      if (!r.original_render.empty()) originals.push_back(parse_bracketed(r.original_render));
    }
    mock->add_lexicon(originals);
  }
  if (cfg.llm.mock_corruption > 0.0) {
    return std::make_shared<CorruptingLlm>(mock, cfg.llm.mock_corruption, mix_seed(cfg.seed, 0xC0));
  }
  return mock;
}

inline std::vector<DemonstrationPair> demo_pool(const PipelineConfig& cfg, const std::vector<Tree>& demo_trees) {
  std::vector<DemonstrationPair> pool;
  if (demo_trees.empty()) return pool;
  const auto embedder = make_embedder(cfg);
  for (const Tree& t : demo_trees) pool.push_back(make_demonstration(t, keep_rate(cfg), *embedder));
  return pool;
}

inline BackGenOptions backgen_options(const PipelineConfig& cfg) {
  BackGenOptions o;
  o.retries = cfg.llm.retries;
  o.concurrency = cfg.llm.concurrency;
  o.demos_per_prompt = static_cast<std::size_t>(cfg.llm.demos);
  o.model = cfg.llm.model;
  o.temperature = cfg.llm.temperature;
  return o;
}

/// Fresh model whose inventories cover `trees`.
inline ModelParams fresh_model(const PipelineConfig& cfg, const std::vector<Tree>& trees) {
  std::vector<BinaryTree> bin;
  bin.reserve(trees.size());
  for (const Tree& t : trees) bin.push_back(binarize(t));
  Vocabulary vocab;
  LabelSet labels;
  build_inventories(bin, vocab, labels);
  return init_model(cfg.model, std::move(vocab), std::move(labels), cfg.seed);
}

inline ModelParams initial_model(const PipelineConfig& cfg, const std::vector<Tree>& trees) {
  if (!cfg.paths.init_checkpoint.empty()) return load_checkpoint(cfg.paths.init_checkpoint).params;
  return fresh_model(cfg, trees);
}

inline nlohmann::json run_mask(const PipelineConfig& cfg, const std::string& input, const std::string& domain = "",
                               const Logger& log = {}) {
  const std::vector<Tree> trees = read_treebank(input);
  const auto embedder = make_embedder(cfg);
  const auto records = mask_treebank(trees, keep_rate(cfg), *embedder, "r", domain);
  const std::string out = detail::output_file(cfg, "masked.jsonl");
  write_masked_records(out, records);
  detail::log_to(log, "masked " + std::to_string(records.size()) + " trees -> " + out);

  Manifest m{"mask", cfg, {}, {{"records", records.size()}, {"domain", domain}}};
  m.add_artifact("input", input);
  m.add_artifact("masked.jsonl", out);
  detail::finish_manifest(m, cfg);
  return m.extra;
}

inline nlohmann::json run_backgen(const PipelineConfig& cfg, const std::string& masked_path, const Logger& log = {}) {
  const auto records = read_masked_records(masked_path);
  const std::vector<Tree> demo_trees = cfg.paths.demos.empty() ? std::vector<Tree>{} : read_treebank(cfg.paths.demos);
  const auto backend = make_backgen_backend(cfg, records, demo_trees);
  const BackGenResult result = backgen_batch(records, *backend, demo_pool(cfg, demo_trees), backgen_options(cfg));

  const std::string treebank = detail::output_file(cfg, "backgen_treebank.txt");
  const std::string audit = detail::output_file(cfg, "backgen_audit.jsonl");
  const std::string summary = detail::output_file(cfg, "backgen_summary.json");
  write_treebank(treebank, result.accepted_trees());
  write_audit_log(audit, result.records);
  detail::write_text(summary, result.summary.to_json().dump(2) + "\n");
  detail::log_to(log, "accepted " + std::to_string(result.summary.accepted()) + " of " +
                          std::to_string(result.summary.records) + " -> " + treebank);

  Manifest m{"backgen", cfg, {}, result.summary.to_json()};
  m.add_artifact("input", masked_path);
  if (!cfg.paths.demos.empty()) m.add_artifact("demos", cfg.paths.demos);
  m.add_artifact("backgen_treebank.txt", treebank);
  m.add_artifact("backgen_audit.jsonl", audit);
  m.add_artifact("backgen_summary.json", summary);
  detail::finish_manifest(m, cfg);
  return m.extra;
}

inline nlohmann::json run_pretrain(const PipelineConfig& cfg, const std::string& treebank_path, const Logger& log = {}) {
  const std::vector<Tree> trees = read_treebank(treebank_path);
  PretrainResult res = pretrain(initial_model(cfg, trees), trees, cfg.contrastive, log);
  const std::string ckpt = detail::output_file(cfg, "pretrained.ckpt");
  const std::string table = detail::output_file(cfg, "pretrain_log.tsv");
  save_checkpoint(ckpt, Checkpoint{res.params, res.optimizer, {{"command", "pretrain"}, {"seed", cfg.seed}}});
  detail::write_text(table, res.table());

  Manifest m{"pretrain", cfg, {}, {{"initial_margin", res.initial_margin},
                                   {"final_margin", res.log.empty() ? res.initial_margin : res.log.back().margin}}};
  m.add_artifact("input", treebank_path);
  if (!cfg.paths.init_checkpoint.empty()) m.add_artifact("init_checkpoint", cfg.paths.init_checkpoint);
  m.add_artifact("pretrained.ckpt", ckpt);
  m.add_artifact("pretrain_log.tsv", table);
  detail::finish_manifest(m, cfg);
  return m.extra;
}

inline std::vector<TreebankSource> training_sources(const PipelineConfig& cfg) {
  if (cfg.paths.train.empty()) throw Error(ErrorKind::BadConfig, "config field 'paths.train': no training treebank");
  std::vector<TreebankSource> sources;
  for (std::size_t k = 0; k < cfg.paths.train.size(); ++k) {
    const double w = cfg.paths.train_weights.empty() ? 1.0 : cfg.paths.train_weights[k];
    sources.push_back({cfg.paths.train[k], read_treebank(cfg.paths.train[k]), w});
  }
  return sources;
}

inline void write_report(const PipelineConfig& cfg, const std::string& stem, const EvalReport& report) {
  detail::write_text(detail::output_file(cfg, stem + ".json"), report_json(report).dump(2) + "\n");
  detail::write_text(detail::output_file(cfg, stem + ".txt"), format_report(report));
}

inline nlohmann::json run_train(const PipelineConfig& cfg, const Logger& log = {}) {
  const auto sources = training_sources(cfg);
  if (cfg.paths.dev.empty()) throw Error(ErrorKind::BadConfig, "config field 'paths.dev': no development treebank");
  const std::vector<Tree> dev = read_treebank(cfg.paths.dev);
  std::vector<Tree> all;
  for (const TreebankSource& s : sources) all.insert(all.end(), s.trees.begin(), s.trees.end());

  TrainResult res = train(initial_model(cfg, all), sources, dev, cfg.train, log);
  const std::string ckpt = detail::output_file(cfg, "model.ckpt");
  save_checkpoint(ckpt, Checkpoint{res.params, res.optimizer, {{"command", "train"}, {"seed", cfg.seed},
                                                               {"best_epoch", res.log.best_epoch}}});
  detail::write_text(detail::output_file(cfg, "train_steps.tsv"), res.log.step_table());
  detail::write_text(detail::output_file(cfg, "train_epochs.tsv"), res.log.epoch_table());

  Manifest m{"train", cfg, {}, {{"best_epoch", res.log.best_epoch}, {"best_dev_f1", res.log.best_dev_f1}}};
  for (const std::string& p : cfg.paths.train) m.add_artifact("train:" + p, p);
  m.add_artifact("dev", cfg.paths.dev);
  if (!cfg.paths.init_checkpoint.empty()) m.add_artifact("init_checkpoint", cfg.paths.init_checkpoint);
  m.add_artifact("model.ckpt", ckpt);
  m.add_artifact("train_steps.tsv", detail::output_file(cfg, "train_steps.tsv"));
  m.add_artifact("train_epochs.tsv", detail::output_file(cfg, "train_epochs.tsv"));
  if (!cfg.paths.test.empty()) {
    const EvalReport report = evaluate_parser(res.params, read_treebank(cfg.paths.test), cfg.eval);
    write_report(cfg, "test_report", report);
    m.extra["test_f1"] = report.overall.f1();
    m.add_artifact("test_report.json", detail::output_file(cfg, "test_report.json"));
  }
  detail::finish_manifest(m, cfg);
  return m.extra;
}

/// Input lines are either bracketed trees (words and POS are taken from the
/// leaves) or whitespace-separated tokens.
inline std::vector<Sentence> read_sentences(const std::string& path) {
  std::vector<Sentence> out;
  for (const std::string& line : read_lines(path)) {
    const std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line[first] == '(') {
      out.push_back(sentence_of(normalize(parse_bracketed(line))));
      continue;
    }
    Sentence s;
    std::istringstream in(line);
    for (std::string tok; in >> tok;) s.words.push_back(tok);
    out.push_back(std::move(s));
  }
  return out;
}

inline nlohmann::json run_parse(const PipelineConfig& cfg, const std::string& checkpoint, const std::string& input,
                                const Logger& log = {}) {
  const ModelParams params = load_checkpoint(checkpoint).params;
  const auto sentences = read_sentences(input);
  std::vector<Tree> parsed;
  parsed.reserve(sentences.size());
  for (const Sentence& s : sentences) parsed.push_back(parse(params, s));
  const std::string out = detail::output_file(cfg, "predictions.txt");
  write_treebank(out, parsed);
  detail::log_to(log, "parsed " + std::to_string(parsed.size()) + " sentences -> " + out);

  Manifest m{"parse", cfg, {}, {{"sentences", parsed.size()}}};
  m.add_artifact("checkpoint", checkpoint);
  m.add_artifact("input", input);
  m.add_artifact("predictions.txt", out);
  detail::finish_manifest(m, cfg);
  return m.extra;
}

/// Direct LLM parsing baseline. Rejected replies are written as the invalid
/// marker line so evaluation can count them in full mode.
inline nlohmann::json run_llm_parse(const PipelineConfig& cfg, const std::string& input, const Logger& log = {}) {
  const auto sentences = read_sentences(input);
  std::vector<Tree> demos;
  if (!cfg.paths.demos.empty()) {
    demos = read_treebank(cfg.paths.demos);
    if (demos.size() > static_cast<std::size_t>(cfg.llm.parse_demos)) demos.resize(static_cast<std::size_t>(cfg.llm.parse_demos));
  }
  std::shared_ptr<const ChatBackend> backend;
  if (cfg.llm.mock.empty()) {
    backend = make_http_backend(cfg);
  } else {
    backend = std::make_shared<MockParseLlm>();
  }
  const std::string out = detail::output_file(cfg, "llm_predictions.txt");
  const std::string audit = detail::output_file(cfg, "llm_parse_audit.jsonl");
  std::ofstream pred(out, std::ios::binary), aud(audit, std::ios::binary);
  long invalid = 0;
  for (std::size_t k = 0; k < sentences.size(); ++k) {
    const ChatRequest req = build_parse_prompt(sentences[k], demos, cfg.llm.model, cfg.llm.temperature);
    const std::string id = "p" + std::to_string(k);
    ValidationReport report;
    std::string raw;
    int attempts = 0;
    for (int attempt = 0; attempt <= cfg.llm.retries; ++attempt) {
      raw = backend->complete(req, RequestContext{id, attempt});
      report = parse_llm_parse_output(sentences[k], raw);
      attempts = attempt + 1;
      if (report.accepted()) break;
    }
    if (report.accepted()) {
      pred << render_bracketed(*report.tree) << '\n';
    } else {
      pred << kInvalidTreeLine << '\n';
      ++invalid;
    }
    aud << nlohmann::json{{"id", id}, {"status", std::string(to_string(report.status))}, {"detail", report.detail},
                          {"attempts", attempts}, {"raw", raw}}.dump()
        << '\n';
  }
  pred.close();
  aud.close();
  detail::log_to(log, std::to_string(invalid) + " of " + std::to_string(sentences.size()) + " replies invalid -> " + out);

  Manifest m{"llm-parse", cfg, {}, {{"sentences", sentences.size()}, {"invalid", invalid}}};
  m.add_artifact("input", input);
  m.add_artifact("llm_predictions.txt", out);
  m.add_artifact("llm_parse_audit.jsonl", audit);
  detail::finish_manifest(m, cfg);
  return m.extra;
}

inline nlohmann::json run_eval(const PipelineConfig& cfg, const std::string& gold_path, const std::string& pred_path,
                               const std::string& domains_path = "", const Logger& log = {}) {
  const std::vector<Tree> gold = read_treebank(gold_path);
  const std::vector<Prediction> preds = read_predictions(pred_path);
  std::vector<std::string> domains;
  EvalConfig ecfg = cfg.eval;
  if (!domains_path.empty()) {
    domains = read_lines(domains_path);
    if (domains.size() != gold.size()) {
      throw Error(ErrorKind::LengthMismatch, "domains file has " + std::to_string(domains.size()) + " lines for " +
                                                 std::to_string(gold.size()) + " trees");
    }
    ecfg.per_domain = true;
  }
  const EvalReport report = labeled_f1(gold, preds, ecfg, domains.empty() ? nullptr : &domains);
  write_report(cfg, "report", report);
  detail::log_to(log, format_report(report));

  Manifest m{"eval", cfg, {}, report_json(report)};
  m.add_artifact("gold", gold_path);
  m.add_artifact("pred", pred_path);
  if (!domains_path.empty()) m.add_artifact("domains", domains_path);
  m.add_artifact("report.json", detail::output_file(cfg, "report.json"));
  detail::finish_manifest(m, cfg);
  return m.extra;
}

/// One sweep point: mask the raw target trees, back-generate, optionally
/// pre-train on the generated trees, fine-tune on the source treebanks plus
/// the generated ones, and score on paths.test.
struct SweepPoint {
  double value = 0.0;
  long generated = 0;
  double f1 = 0.0;
};

inline SweepPoint sweep_point(const PipelineConfig& cfg, const std::vector<Tree>& raw, const std::vector<Tree>& demo_trees,
                              const std::vector<TreebankSource>& sources, const std::vector<Tree>& dev,
                              const std::vector<Tree>& test, double value) {
  const auto embedder = make_embedder(cfg);
  const auto records = mask_treebank(raw, keep_rate(cfg), *embedder, "r");
  const auto backend = make_backgen_backend(cfg, records, demo_trees);
  const BackGenResult bg = backgen_batch(records, *backend, demo_pool(cfg, demo_trees), backgen_options(cfg));
  const std::vector<Tree> generated = bg.accepted_trees();

  std::vector<TreebankSource> mix = sources;
  if (!generated.empty()) mix.push_back({"backgen", generated, 1.0});
  std::vector<Tree> all;
  for (const TreebankSource& s : mix) all.insert(all.end(), s.trees.begin(), s.trees.end());
  ModelParams params = initial_model(cfg, all);
  if (cfg.contrastive.epochs > 0 && !generated.empty()) params = pretrain(std::move(params), generated, cfg.contrastive).params;
  const TrainResult res = train(std::move(params), mix, dev, cfg.train);
  return {value, static_cast<long>(generated.size()), evaluate_parser(res.params, test, cfg.eval).overall.f1()};
}

/// axis "mask-rate": mask_rate over {0, 0.25, 0.5, 0.75, 1}. axis
/// "treebank-size": prefixes of 20%..100% of the raw target trees.
inline nlohmann::json run_sweep(const PipelineConfig& cfg, const std::string& axis, const std::string& raw_path,
                                const Logger& log = {}) {
  if (axis != "mask-rate" && axis != "treebank-size") {
    throw Error(ErrorKind::BadConfig, "sweep axis must be 'mask-rate' or 'treebank-size', got '" + axis + "'");
  }
  if (cfg.paths.dev.empty() || cfg.paths.test.empty()) {
    throw Error(ErrorKind::BadConfig, "sweep needs paths.dev and paths.test");
  }
  const std::vector<Tree> raw = read_treebank(raw_path);
  const std::vector<Tree> demo_trees = cfg.paths.demos.empty() ? std::vector<Tree>{} : read_treebank(cfg.paths.demos);
  const auto sources = training_sources(cfg);
  const std::vector<Tree> dev = read_treebank(cfg.paths.dev);
  const std::vector<Tree> test = read_treebank(cfg.paths.test);

  std::vector<SweepPoint> points;
  const bool by_rate = axis == "mask-rate";
  const std::vector<double> values = by_rate ? std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}
                                             : std::vector<double>{0.2, 0.4, 0.6, 0.8, 1.0};
  for (double v : values) {
    PipelineConfig point_cfg = cfg;
    std::vector<Tree> subset = raw;
    if (by_rate) {
      point_cfg.mask_rate = v;
    } else {
      subset.resize(static_cast<std::size_t>(std::llround(v * static_cast<double>(raw.size()))));
    }
    points.push_back(sweep_point(point_cfg, subset, demo_trees, sources, dev, test, v));
    detail::log_to(log, axis + " " + std::to_string(v) + " generated " + std::to_string(points.back().generated) +
                            " f1 " + std::to_string(points.back().f1));
  }

  std::ostringstream table;
  table.precision(17);
  table << (by_rate ? "mask_rate" : "fraction") << "\tgenerated\tf1\n";
  for (const SweepPoint& p : points) table << p.value << '\t' << p.generated << '\t' << p.f1 << '\n';
  const std::string out = detail::output_file(cfg, "sweep_" + axis + ".tsv");
  detail::write_text(out, table.str());

  nlohmann::json rows = nlohmann::json::array();
  for (const SweepPoint& p : points) rows.push_back({{"value", p.value}, {"generated", p.generated}, {"f1", p.f1}});
  Manifest m{"sweep", cfg, {}, {{"axis", axis}, {"rows", rows}}};
  m.add_artifact("raw", raw_path);
  m.add_artifact("sweep.tsv", out);
  detail::finish_manifest(m, cfg);
  return m.extra;
}

inline nlohmann::json run_synth(const PipelineConfig& cfg, const std::string& grammar, std::size_t count,
                                const std::string& name) {
  SyntheticGrammar g;
  if (grammar == "default") {
    g = default_grammar();
  } else if (grammar == "shifted") {
    g = shifted_grammar();
  } else {
    throw Error(ErrorKind::BadConfig, "grammar must be 'default' or 'shifted', got '" + grammar + "'");
  }
  const std::string out = detail::output_file(cfg, name);
  write_treebank(out, generate_corpus(g, count, cfg.seed));
  Manifest m{"synth", cfg, {}, {{"grammar", grammar}, {"count", count}}};
  m.add_artifact(name, out);
  detail::finish_manifest(m, cfg);
  return m.extra;
}

}  // namespace backgen
