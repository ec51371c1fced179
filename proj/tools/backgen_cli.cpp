#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "backgen/commands.hpp"

using namespace backgen;

namespace {

// Flags that were given on the command line, as a config overlay.
struct Overlay {
  nlohmann::json j = nlohmann::json::object();

  template <typename T>
  void put(const std::string& dotted, const std::optional<T>& v) {
    if (!v) return;
    nlohmann::json* node = &j;
    std::size_t start = 0;
    for (std::size_t dot = dotted.find('.'); dot != std::string::npos; dot = dotted.find('.', start)) {
      node = &(*node)[dotted.substr(start, dot - start)];
      start = dot + 1;
    }
    (*node)[dotted.substr(start)] = *v;
  }

  // key=value, where value is parsed as JSON when it can be and kept as a
  // string otherwise.
  void put_raw(const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::BadConfig, "--set expects key=value, got '" + assignment + "'");
    const std::string value = assignment.substr(eq + 1);
    nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
    if (parsed.is_discarded()) parsed = value;
    put(assignment.substr(0, eq), std::optional<nlohmann::json>(parsed));
  }
};

template <typename T>
CLI::Option* opt(CLI::App* app, const std::string& name, std::optional<T>& v, const std::string& help) {
  return app->add_option(name, v, help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constituency treebank back-generation and cross-domain parsing toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> sets;
  bool quiet = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--set", sets, "override any config field, e.g. --set llm.retries=3");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--out", out_dir, "output directory");
  app.add_flag("-q,--quiet", quiet, "no progress output");

  // shared across subcommands; each subcommand registers the ones it uses
  std::optional<double> mask_rate, mock_corruption, lr, temperature, sample_rate;
  std::optional<std::string> keyword_scorer, embeddings, demos, mock, endpoint, model, init, dev, test, mode;
  std::optional<int> retries, concurrency, num_demos, epochs, batch_size;
  std::optional<std::vector<std::string>> train_paths;
  std::optional<std::vector<double>> train_weights;
  std::string input, domain, checkpoint, gold, pred, domains, axis = "mask-rate", grammar = "default",
                                                              name = "synthetic.txt";
  std::size_t count = 200;

  auto add_llm = [&](CLI::App* sub) {
    opt(sub, "--demos", demos, "treebank of demonstration trees");
    opt(sub, "--mock", mock, "offline backend: echo or lexicon");
    opt(sub, "--endpoint", endpoint, "chat-completions URL");
    opt(sub, "--model", model, "model name sent to the endpoint");
    opt(sub, "--retries", retries, "re-asks per rejected reply");
  };
  auto add_train = [&](CLI::App* sub) {
    opt(sub, "--train", train_paths, "training treebank(s)");
    opt(sub, "--weights", train_weights, "loss weight per training treebank");
    opt(sub, "--dev", dev, "development treebank");
    opt(sub, "--test", test, "test treebank");
    opt(sub, "--init", init, "initial checkpoint");
    opt(sub, "--epochs", epochs, "maximum fine-tuning epochs");
    opt(sub, "--lr", lr, "learning rate");
    opt(sub, "--batch-size", batch_size, "batch size");
  };

  CLI::App* mask_cmd = app.add_subcommand("mask", "keep domain keywords, blank every other word");
  mask_cmd->add_option("--input", input, "treebank file")->required();
  mask_cmd->add_option("--domain", domain, "domain tag stored with each record");
  opt(mask_cmd, "--mask-rate", mask_rate, "fraction of words to blank");
  opt(mask_cmd, "--keyword-scorer", keyword_scorer, "hash, model or file");
  opt(mask_cmd, "--embeddings", embeddings, "word-vector text file for --keyword-scorer file");
  opt(mask_cmd, "--init", init, "checkpoint for --keyword-scorer model");

  CLI::App* backgen_cmd = app.add_subcommand("backgen", "fill masked trees with an LLM and keep the valid ones");
  backgen_cmd->add_option("--input", input, "masked-record file")->required();
  add_llm(backgen_cmd);
  opt(backgen_cmd, "--mock-corruption", mock_corruption, "fraction of mock replies to corrupt");
  opt(backgen_cmd, "--concurrency", concurrency, "parallel requests");
  opt(backgen_cmd, "--num-demos", num_demos, "demonstrations per prompt");
  opt(backgen_cmd, "--mask-rate", mask_rate, "mask rate used for demonstrations");

  CLI::App* pretrain_cmd = app.add_subcommand("pretrain", "span-level contrastive pre-training");
  pretrain_cmd->add_option("--input", input, "treebank file")->required();
  opt(pretrain_cmd, "--init", init, "initial checkpoint");
  opt(pretrain_cmd, "--epochs", epochs, "epochs");
  opt(pretrain_cmd, "--lr", lr, "learning rate");
  opt(pretrain_cmd, "--temperature", temperature, "similarity temperature");
  opt(pretrain_cmd, "--sample-rate", sample_rate, "fraction of anchors per tree");

  CLI::App* train_cmd = app.add_subcommand("train", "max-margin fine-tuning of the chart parser");
  add_train(train_cmd);

  CLI::App* parse_cmd = app.add_subcommand("parse", "parse sentences or re-parse a treebank");
  parse_cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  parse_cmd->add_option("--input", input, "treebank or one tokenized sentence per line")->required();

  CLI::App* llm_parse_cmd = app.add_subcommand("llm-parse", "direct LLM parsing baseline");
  llm_parse_cmd->add_option("--input", input, "treebank or one tokenized sentence per line")->required();
  add_llm(llm_parse_cmd);
  opt(llm_parse_cmd, "--num-demos", num_demos, "demonstration trees in the prompt");

  CLI::App* eval_cmd = app.add_subcommand("eval", "labeled bracket precision, recall and F1");
  eval_cmd->add_option("--gold", gold, "gold treebank")->required();
  eval_cmd->add_option("--pred", pred, "predicted trees, (()) for invalid")->required();
  eval_cmd->add_option("--domains", domains, "one domain tag per gold tree");
  opt(eval_cmd, "--mode", mode, "full or valid");

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "F1 over mask rates or generated treebank sizes");
  sweep_cmd->add_option("--axis", axis, "mask-rate or treebank-size");
  sweep_cmd->add_option("--raw", input, "target-domain trees to mask and back-generate")->required();
  add_llm(sweep_cmd);
  add_train(sweep_cmd);
  opt(sweep_cmd, "--mask-rate", mask_rate, "mask rate for the treebank-size axis");

  CLI::App* synth_cmd = app.add_subcommand("synth", "write a synthetic treebank");
  synth_cmd->add_option("--grammar", grammar, "default or shifted");
  synth_cmd->add_option("--count", count, "number of trees");
  synth_cmd->add_option("--name", name, "output file name inside --out");

  CLI11_PARSE(app, argc, argv);

  const Logger log = [&](const std::string& msg) {
    if (!quiet) std::cerr << msg << '\n';
  };

  try {
    PipelineConfig cfg = config_path.empty() ? PipelineConfig{} : load_config(config_path);
    Overlay o;
    o.put("seed", seed);
    o.put("paths.output_dir", out_dir);
    o.put("mask_rate", mask_rate);
    o.put("keyword_scorer", keyword_scorer);
    o.put("paths.embeddings", embeddings);
    o.put("paths.demos", demos);
    o.put("paths.init_checkpoint", init);
    o.put("paths.train", train_paths);
    o.put("paths.train_weights", train_weights);
    o.put("paths.dev", dev);
    o.put("paths.test", test);
    o.put("llm.mock", mock);
    o.put("llm.mock_corruption", mock_corruption);
    o.put("llm.endpoint", endpoint);
    o.put("llm.model", model);
    o.put("llm.retries", retries);
    o.put("llm.concurrency", concurrency);
    o.put("eval.mode", mode);
    if (app.got_subcommand(llm_parse_cmd)) {
      o.put("llm.parse_demos", num_demos);
    } else {
      o.put("llm.demos", num_demos);
    }
    if (app.got_subcommand(pretrain_cmd)) {
      o.put("contrastive.epochs", epochs);
      o.put("contrastive.learning_rate", lr);
      o.put("contrastive.temperature", temperature);
      o.put("contrastive.sample_rate", sample_rate);
    } else {
      o.put("train.max_epochs", epochs);
      o.put("train.learning_rate", lr);
      o.put("train.batch_size", batch_size);
    }
    for (const std::string& s : sets) o.put_raw(s);
    cfg = config_from_json(o.j, cfg);

    nlohmann::json summary;
    if (app.got_subcommand(mask_cmd)) {
      summary = run_mask(cfg, input, domain, log);
    } else if (app.got_subcommand(backgen_cmd)) {
      summary = run_backgen(cfg, input, log);
    } else if (app.got_subcommand(pretrain_cmd)) {
      summary = run_pretrain(cfg, input, log);
    } else if (app.got_subcommand(train_cmd)) {
      summary = run_train(cfg, log);
    } else if (app.got_subcommand(parse_cmd)) {
      summary = run_parse(cfg, checkpoint, input, log);
    } else if (app.got_subcommand(llm_parse_cmd)) {
      summary = run_llm_parse(cfg, input, log);
    } else if (app.got_subcommand(eval_cmd)) {
      summary = run_eval(cfg, gold, pred, domains, log);
    } else if (app.got_subcommand(sweep_cmd)) {
      summary = run_sweep(cfg, axis, input, log);
    } else if (app.got_subcommand(synth_cmd)) {
      summary = run_synth(cfg, grammar, count, name);
    }
    std::cout << summary.dump() << '\n';
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::BadConfig ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
