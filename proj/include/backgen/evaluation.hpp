#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "backgen/error.hpp"
#include "backgen/tree.hpp"

namespace backgen {

enum class EvalMode { Full, Valid };

/// Reserved prediction-file line for an output that is not a valid tree.
inline constexpr std::string_view kInvalidTreeLine = "(())";

struct EvalConfig {
  std::set<std::string> ignore_pos{".", ",", ":", "``", "''", "-NONE-"};
  EvalMode mode = EvalMode::Full;
  bool per_domain = false;
};

struct Bracket {
  std::string label;
  int i = 0;
  int j = 0;

  friend auto operator<=>(const Bracket&, const Bracket&) = default;
  friend bool operator==(const Bracket&, const Bracket&) = default;
};

namespace detail {

/// Returns the (first, last) retained word index under t, or nullopt when t
/// covers only ignored leaves.
inline std::optional<std::pair<int, int>> collect_brackets(const Tree& t, const EvalConfig& cfg, int& next,
                                                          std::vector<Bracket>& out) {
  if (t.is_leaf()) {
    if (cfg.ignore_pos.contains(t.label)) return std::nullopt;
    const int idx = ++next;
    return std::pair{idx, idx};
  }
  std::optional<std::pair<int, int>> range;
  for (const Tree& c : t.children) {
    auto r = collect_brackets(c, cfg, next, out);
    if (!r) continue;
    if (!range) {
      range = r;
    } else {
      range->second = r->second;
    }
  }
  if (range) out.push_back(Bracket{t.label, range->first, range->second});
  return range;
}

}  // namespace detail

/// Labeled brackets of all phrasal nodes after deleting ignored leaves and
/// renumbering the rest; preterminals are not scored. Sorted multiset.
inline std::vector<Bracket> bracket_set(const Tree& t, const EvalConfig& cfg = {}) {
  std::vector<Bracket> out;
  int next = 0;
  detail::collect_brackets(t, cfg, next, out);
  std::sort(out.begin(), out.end());
  return out;
}

inline int retained_length(const Tree& t, const EvalConfig& cfg) {
  int n = 0;
  for (const Tree* leaf : leaves(t)) {
    if (!cfg.ignore_pos.contains(leaf->label)) ++n;
  }
  return n;
}

/// Size of the multiset intersection; symmetric.
inline int matched_brackets(const std::vector<Bracket>& a, const std::vector<Bracket>& b) {
  int matched = 0;
  std::size_t x = 0, y = 0;
  while (x < a.size() && y < b.size()) {
    if (a[x] == b[y]) {
      ++matched;
      ++x;
      ++y;
    } else if (a[x] < b[y]) {
      ++x;
    } else {
      ++y;
    }
  }
  return matched;
}

struct EvalCounts {
  long gold = 0;
  long predicted = 0;
  long matched = 0;
  long sentences = 0;
  long invalid = 0;

  double precision() const { return predicted == 0 ? 0.0 : 100.0 * matched / predicted; }
  double recall() const { return gold == 0 ? 0.0 : 100.0 * matched / gold; }
  double f1() const {
    const double p = precision(), r = recall();
    return (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
};

struct EvalReport {
  EvalMode mode = EvalMode::Full;
  EvalCounts overall;
  std::map<std::string, EvalCounts> domains;

  /// Arithmetic mean of per-domain F1 (0 when no domains).
  double domain_average_f1() const {
    if (domains.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [_, c] : domains) sum += c.f1();
    return sum / static_cast<double>(domains.size());
  }
};

/// A prediction is either a tree or invalid (nullopt).
using Prediction = std::optional<Tree>;

/// Corpus-level micro-averaged labeled bracket scores. Full mode gives an
/// invalid prediction zero matched and zero predicted brackets while its gold
/// brackets still count; Valid mode drops the sentence pair entirely. A
/// prediction whose retained length differs from gold is counted as invalid.
inline EvalReport labeled_f1(const std::vector<Tree>& golds, const std::vector<Prediction>& preds,
                             const EvalConfig& cfg = {}, const std::vector<std::string>* domains = nullptr) {
  if (golds.size() != preds.size()) {
    throw Error(ErrorKind::LengthMismatch, std::to_string(golds.size()) + " gold trees vs " +
                                               std::to_string(preds.size()) + " predictions");
  }
  if (domains && domains->size() != golds.size()) {
    throw Error(ErrorKind::LengthMismatch, "domain tags do not align with gold trees");
  }
  EvalReport report;
  report.mode = cfg.mode;
  for (std::size_t k = 0; k < golds.size(); ++k) {
    const std::vector<Bracket> gold = bracket_set(golds[k], cfg);
    const bool valid = preds[k].has_value() && retained_length(*preds[k], cfg) == retained_length(golds[k], cfg);
    EvalCounts delta;
    delta.sentences = 1;
    if (!valid) {
      delta.invalid = 1;
      if (cfg.mode == EvalMode::Valid) {
        delta.sentences = 0;
      } else {
        delta.gold = static_cast<long>(gold.size());
      }
    } else {
      const std::vector<Bracket> pred = bracket_set(*preds[k], cfg);
      delta.gold = static_cast<long>(gold.size());
      delta.predicted = static_cast<long>(pred.size());
      delta.matched = matched_brackets(gold, pred);
    }
    auto add = [&](EvalCounts& c) {
      c.gold += delta.gold;
      c.predicted += delta.predicted;
      c.matched += delta.matched;
      c.sentences += delta.sentences;
      c.invalid += delta.invalid;
    };
    add(report.overall);
    if (domains && cfg.per_domain) add(report.domains[(*domains)[k]]);
  }
  return report;
}

inline std::vector<Prediction> read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open predictions '" + path + "'");
  std::vector<Prediction> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line.find(kInvalidTreeLine) != std::string::npos && line.find_first_not_of(" \t\r()") == std::string::npos) {
      out.emplace_back(std::nullopt);
      continue;
    }
    try {
      out.emplace_back(normalize(parse_bracketed(line)));
    } catch (const Error&) {
      out.emplace_back(std::nullopt);
    }
  }
  return out;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out.push_back(line);
  }
  return out;
}

inline std::string_view to_string(EvalMode mode) { return mode == EvalMode::Full ? "full" : "valid"; }

inline std::string format_report(const EvalReport& r) {
  std::ostringstream out;
  out << "# labeled bracket scores, mode=" << to_string(r.mode)
      << (r.mode == EvalMode::Full ? " (invalid predictions: 0 matched, 0 predicted, gold counted)\n"
                                   : " (sentences with invalid predictions excluded)\n");
  char line[160];
  std::snprintf(line, sizeof(line), "%-12s %6s %6s %8s %8s %8s %8s %8s %8s\n", "domain", "sents", "invalid", "gold",
                "pred", "match", "P", "R", "F1");
  out << line;
  auto row = [&](const std::string& name, const EvalCounts& c) {
    std::snprintf(line, sizeof(line), "%-12s %6ld %6ld %8ld %8ld %8ld %8.2f %8.2f %8.2f\n", name.c_str(), c.sentences,
                  c.invalid, c.gold, c.predicted, c.matched, c.precision(), c.recall(), c.f1());
    out << line;
  };
  for (const auto& [name, c] : r.domains) row(name, c);
  row("overall", r.overall);
  if (!r.domains.empty()) {
    std::snprintf(line, sizeof(line), "%-12s %68.2f\n", "avg", r.domain_average_f1());
    out << line;
  }
  return out.str();
}

inline nlohmann::json report_json(const EvalReport& r) {
  auto counts = [](const EvalCounts& c) {
    return nlohmann::json{{"sentences", c.sentences}, {"invalid", c.invalid}, {"gold", c.gold},
                          {"predicted", c.predicted}, {"matched", c.matched}, {"precision", c.precision()},
                          {"recall", c.recall()},     {"f1", c.f1()}};
  };
  nlohmann::json j;
  j["mode"] = to_string(r.mode);
  j["overall"] = counts(r.overall);
  nlohmann::json doms = nlohmann::json::object();
  for (const auto& [name, c] : r.domains) doms[name] = counts(c);
  j["domains"] = doms;
  if (!r.domains.empty()) j["domain_average_f1"] = r.domain_average_f1();
  return j;
}

}  // namespace backgen
