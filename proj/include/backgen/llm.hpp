#pragma once

#include <algorithm>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "backgen/error.hpp"
#include "backgen/masking.hpp"
#include "backgen/tree.hpp"

namespace backgen {

inline constexpr std::string_view kSystemPrompt = "You are a professional linguist.";
inline constexpr std::string_view kDemoHeader = "Demonstration:\n";

struct ChatMessage {
  std::string role;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

/// Minimal chat-completions request body.
struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 1.0;

  friend bool operator==(const ChatRequest&, const ChatRequest&) = default;
};

inline nlohmann::json to_json(const ChatRequest& req) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const ChatMessage& m : req.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  return {{"model", req.model}, {"messages", msgs}, {"temperature", req.temperature}};
}

inline ChatRequest chat_request_from_json(const nlohmann::json& j) {
  ChatRequest req;
  req.model = j.at("model").get<std::string>();
  req.temperature = j.value("temperature", 1.0);
  for (const auto& m : j.at("messages")) {
    req.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
  }
  return req;
}

/// First choice's message content of a chat-completions response body.
inline std::string chat_response_content(const nlohmann::json& body) {
  const auto& choices = body.at("choices");
  if (choices.empty()) throw Error(ErrorKind::EndpointUnreachable, "response has no choices");
  return choices.at(0).at("message").at("content").get<std::string>();
}

inline nlohmann::json make_chat_response(const std::string& content, const std::string& model = "mock") {
  return {{"object", "chat.completion"},
          {"model", model},
          {"choices", nlohmann::json::array({{{"index", 0},
                                              {"message", {{"role", "assistant"}, {"content", content}}},
                                              {"finish_reason", "stop"}}})}};
}

/// A masked tree and its filled original; both renders are bracketed text.
struct DemonstrationPair {
  std::string masked_render;
  std::string full_render;
};

inline DemonstrationPair make_demonstration(const Tree& tree, double keep_rate, const WordEmbedder& embedder) {
  const MaskedTree masked = mask_tree(tree, extract_keywords(sentence_of(tree), keep_rate, embedder));
  return {render_masked(masked), render_bracketed(tree)};
}

/// Demonstrations whose sentence length is closest to target_length; ties
/// keep pool order. Pool entries whose full render equals `exclude` are
/// skipped so a query never sees its own answer.
inline std::vector<DemonstrationPair> select_demonstrations(const std::vector<DemonstrationPair>& pool,
                                                            int target_length, std::size_t count,
                                                            std::string_view exclude = {}) {
  struct Ranked {
    int distance;
    std::size_t index;
  };
  std::vector<Ranked> ranked;
  for (std::size_t k = 0; k < pool.size(); ++k) {
    if (!exclude.empty() && pool[k].full_render == exclude) continue;
    const int len = static_cast<int>(leaves(parse_bracketed(pool[k].full_render)).size());
    ranked.push_back({std::abs(len - target_length), k});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) { return a.distance < b.distance; });
  std::vector<DemonstrationPair> out;
  for (std::size_t k = 0; k < ranked.size() && out.size() < count; ++k) out.push_back(pool[ranked[k].index]);
  return out;
}

/// System turn: the linguist line followed by one "Demonstration:" block per
/// pair (masked tree line, then full tree line), blocks separated by blank
/// lines. User turn: the masked tree to fill, nothing else.
inline ChatRequest build_backgen_prompt(const MaskedTree& masked, const std::vector<DemonstrationPair>& demos,
                                        const std::string& model = "mock", double temperature = 1.0) {
  std::string system(kSystemPrompt);
  for (const DemonstrationPair& d : demos) {
    system += "\n\n";
    system += kDemoHeader;
    system += d.masked_render;
    system += '\n';
    system += d.full_render;
  }
  return ChatRequest{model, {{"system", system}, {"user", render_masked(masked)}}, temperature};
}

/// Direct-parsing baseline: each demonstration is a sentence line followed by
/// its bracketed tree; the user turn is the space-joined sentence.
inline ChatRequest build_parse_prompt(const Sentence& sentence, const std::vector<Tree>& demos,
                                      const std::string& model = "mock", double temperature = 1.0) {
  auto join = [](const std::vector<std::string>& ws) {
    std::string out;
    for (std::size_t k = 0; k < ws.size(); ++k) {
      if (k) out += ' ';
      out += ws[k];
    }
    return out;
  };
  std::string system(kSystemPrompt);
  for (const Tree& d : demos) {
    system += "\n\n";
    system += kDemoHeader;
    system += join(words(d));
    system += '\n';
    system += render_bracketed(d);
  }
  return ChatRequest{model, {{"system", system}, {"user", join(sentence.words)}}, temperature};
}

enum class ValidationStatus { Accepted, UnmatchedBrackets, StructureMismatch, KeywordAltered, SlotUnfilled, MultiTokenSlot };

inline constexpr ValidationStatus kAllStatuses[] = {
    ValidationStatus::Accepted,       ValidationStatus::UnmatchedBrackets, ValidationStatus::StructureMismatch,
    ValidationStatus::KeywordAltered, ValidationStatus::SlotUnfilled,      ValidationStatus::MultiTokenSlot,
};

inline std::string_view to_string(ValidationStatus s) {
  switch (s) {
    case ValidationStatus::Accepted: return "Accepted";
    case ValidationStatus::UnmatchedBrackets: return "UnmatchedBrackets";
    case ValidationStatus::StructureMismatch: return "StructureMismatch";
    case ValidationStatus::KeywordAltered: return "KeywordAltered";
    case ValidationStatus::SlotUnfilled: return "SlotUnfilled";
    case ValidationStatus::MultiTokenSlot: return "MultiTokenSlot";
  }
  return "Unknown";
}

struct ValidationReport {
  ValidationStatus status = ValidationStatus::Accepted;
  std::string detail;
  std::optional<Tree> tree;

  bool accepted() const { return status == ValidationStatus::Accepted; }
};

namespace detail {

/// Cuts the first bracketed expression out of a model reply. Surrounding
/// prose is tolerated; stray brackets after the expression are not.
inline std::optional<std::string_view> extract_bracketed(std::string_view raw, std::string& why) {
  const std::size_t open = raw.find('(');
  if (open == std::string_view::npos) {
    why = "no bracketed tree in output";
    return std::nullopt;
  }
  int depth = 0;
  for (std::size_t k = open; k < raw.size(); ++k) {
    if (raw[k] == '(') ++depth;
    if (raw[k] == ')' && --depth == 0) {
      const std::string_view rest = raw.substr(k + 1);
      if (rest.find_first_of("()") != std::string_view::npos) {
        why = "unbalanced brackets after the tree";
        return std::nullopt;
      }
      return raw.substr(open, k + 1 - open);
    }
  }
  why = std::to_string(depth) + " unclosed '('";
  return std::nullopt;
}

inline RawNode unwrap_root(RawNode raw) {
  if (raw.label.empty() && raw.tokens.empty() && raw.children.size() == 1) {
    RawNode inner = std::move(raw.children.front());
    return inner;
  }
  return raw;
}

inline bool same_skeleton(const Tree& expected, const RawNode& got, std::string& where) {
  if (expected.label != got.label) {
    where = "label '" + got.label + "' where '" + expected.label + "' expected";
    return false;
  }
  if (expected.is_leaf()) {
    if (!got.children.empty()) {
      where = "preterminal '" + expected.label + "' has subtrees";
      return false;
    }
    return true;
  }
  if (got.children.size() != expected.children.size()) {
    where = "node '" + expected.label + "' has " + std::to_string(got.children.size()) + " children, expected " +
            std::to_string(expected.children.size());
    return false;
  }
  for (std::size_t k = 0; k < got.children.size(); ++k) {
    if (!same_skeleton(expected.children[k], got.children[k], where)) return false;
  }
  return true;
}

inline void raw_leaves(const RawNode& n, std::vector<const RawNode*>& out) {
  if (n.children.empty()) {
    out.push_back(&n);
    return;
  }
  for (const RawNode& c : n.children) raw_leaves(c, out);
}

}  // namespace detail

/// Checks, in order: balanced and parseable brackets; identical skeleton
/// (labels, arities, POS tags); every kept keyword unchanged in place; every
/// slot filled with exactly one token. Never throws.
inline ValidationReport validate_backgen_output(const MaskedTree& masked, std::string_view llm_raw) {
  ValidationReport report;
  std::string why;
  const auto body = detail::extract_bracketed(llm_raw, why);
  if (!body) return {ValidationStatus::UnmatchedBrackets, why, std::nullopt};
  RawNode raw;
  try {
    raw = detail::unwrap_root(parse_raw(*body));
  } catch (const Error& e) {
    const auto status =
        e.kind() == ErrorKind::UnmatchedBrackets ? ValidationStatus::UnmatchedBrackets : ValidationStatus::StructureMismatch;
    return {status, e.what(), std::nullopt};
  }
  if (!detail::same_skeleton(masked.structure, raw, why)) return {ValidationStatus::StructureMismatch, why, std::nullopt};

  std::vector<const RawNode*> got;
  detail::raw_leaves(raw, got);
  const std::vector<const Tree*> want = leaves(masked.structure);
  for (std::size_t k = 0; k < want.size(); ++k) {
    const std::string& keyword = *want[k]->word;
    if (keyword.empty()) continue;
    if (got[k]->tokens.size() != 1 || got[k]->tokens.front() != keyword) {
      return {ValidationStatus::KeywordAltered, "word " + std::to_string(k + 1) + " should be '" + keyword + "'",
              std::nullopt};
    }
  }
  for (std::size_t k = 0; k < want.size(); ++k) {
    if (!want[k]->word->empty()) continue;
    if (got[k]->tokens.empty()) {
      return {ValidationStatus::SlotUnfilled, "slot " + std::to_string(k + 1) + " (" + want[k]->label + ") is empty",
              std::nullopt};
    }
    if (got[k]->tokens.size() > 1) {
      return {ValidationStatus::MultiTokenSlot,
              "slot " + std::to_string(k + 1) + " has " + std::to_string(got[k]->tokens.size()) + " tokens", std::nullopt};
    }
  }
  try {
    report.tree = tree_from_raw(std::move(raw), false);
  } catch (const Error& e) {
    return {ValidationStatus::StructureMismatch, e.what(), std::nullopt};
  }
  report.status = ValidationStatus::Accepted;
  return report;
}

/// Direct-parsing output check: balanced brackets, a well-formed tree, and a
/// yield equal to the input words in order.
inline ValidationReport parse_llm_parse_output(const Sentence& sentence, std::string_view llm_raw) {
  std::string why;
  const auto body = detail::extract_bracketed(llm_raw, why);
  if (!body) return {ValidationStatus::UnmatchedBrackets, why, std::nullopt};
  Tree tree;
  try {
    tree = tree_from_raw(parse_raw(*body), false);
  } catch (const Error& e) {
    const auto status =
        e.kind() == ErrorKind::UnmatchedBrackets ? ValidationStatus::UnmatchedBrackets : ValidationStatus::StructureMismatch;
    return {status, e.what(), std::nullopt};
  }
  const std::vector<std::string> yield = words(tree);
  if (yield != sentence.words) {
    return {ValidationStatus::StructureMismatch,
            "yield has " + std::to_string(yield.size()) + " words, input has " + std::to_string(sentence.words.size()),
            std::nullopt};
  }
  return {ValidationStatus::Accepted, "", std::move(tree)};
}

}  // namespace backgen
