#pragma once

#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "backgen/error.hpp"

namespace backgen {

/// Tokenized input; pos is either empty or one tag per word.
struct Sentence {
  std::vector<std::string> words;
  std::vector<std::string> pos;

  int size() const { return static_cast<int>(words.size()); }
};

/// N-ary constituency tree. A preterminal (leaf) node has a word and no
/// children; its label is the part-of-speech tag. A masked slot is a
/// preterminal whose word is the empty string.
struct Tree {
  std::string label;
  std::vector<Tree> children;
  std::optional<std::string> word;

  bool is_leaf() const { return word.has_value(); }

  static Tree leaf(std::string pos, std::string w) {
    Tree t;
    t.label = std::move(pos);
    t.word = std::move(w);
    return t;
  }

  static Tree node(std::string label, std::vector<Tree> kids) {
    Tree t;
    t.label = std::move(label);
    t.children = std::move(kids);
    return t;
  }

  friend bool operator==(const Tree&, const Tree&) = default;
};

namespace detail {

inline std::string decode_token(std::string_view tok) {
  if (tok == "-LRB-") return "(";
  if (tok == "-RRB-") return ")";
  return std::string(tok);
}

inline std::string encode_token(std::string_view word) {
  if (word == "(") return "-LRB-";
  if (word == ")") return "-RRB-";
  std::string out;
  out.reserve(word.size());
  for (std::size_t i = 0; i < word.size(); ++i) {
    if (word[i] == '(') {
      out += "-LRB-";
    } else if (word[i] == ')') {
      out += "-RRB-";
    } else {
      out += word[i];
    }
  }
  return out;
}

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

}  // namespace detail

/// Bracketed node before leaf-shape checks: leaves keep all their tokens so
/// callers can diagnose empty or multi-token slots.
struct RawNode {
  std::string label;
  std::vector<std::string> tokens;
  std::vector<RawNode> children;
};

/// Reads a single S-expression. Throws UnmatchedBrackets on any bracket
/// imbalance, BadToken on stray tokens outside a node or tokens mixed with
/// subtrees.
inline RawNode parse_raw(std::string_view text) {
  std::vector<RawNode> stack;
  std::optional<RawNode> done;
  std::size_t pos = 0;
  bool expect_label = false;

  auto read_token = [&]() {
    std::size_t start = pos;
    while (pos < text.size() && !detail::is_space(text[pos]) && text[pos] != '(' && text[pos] != ')') {
      ++pos;
    }
    return text.substr(start, pos - start);
  };

  while (pos < text.size()) {
    const char c = text[pos];
    if (detail::is_space(c)) {
      ++pos;
      continue;
    }
    if (c == '(') {
      if (done) throw Error(ErrorKind::BadToken, "trailing content after tree at offset " + std::to_string(pos));
      if (!stack.empty() && !stack.back().tokens.empty()) {
        throw Error(ErrorKind::BadToken, "node '" + stack.back().label + "' mixes words and subtrees");
      }
      stack.emplace_back();
      expect_label = true;
      ++pos;
      continue;
    }
    if (c == ')') {
      if (stack.empty()) throw Error(ErrorKind::UnmatchedBrackets, "unexpected ')' at offset " + std::to_string(pos));
      RawNode node = std::move(stack.back());
      stack.pop_back();
      expect_label = false;
      ++pos;
      if (stack.empty()) {
        done = std::move(node);
      } else {
        if (!stack.back().tokens.empty()) {
          throw Error(ErrorKind::BadToken, "node '" + stack.back().label + "' mixes words and subtrees");
        }
        stack.back().children.push_back(std::move(node));
      }
      continue;
    }
    const std::string_view tok = read_token();
    if (stack.empty()) {
      throw Error(ErrorKind::BadToken, "token '" + std::string(tok) + "' outside brackets");
    }
    if (expect_label) {
      stack.back().label = std::string(tok);
      expect_label = false;
    } else {
      if (!stack.back().children.empty()) {
        throw Error(ErrorKind::BadToken, "node '" + stack.back().label + "' mixes words and subtrees");
      }
      stack.back().tokens.push_back(detail::decode_token(tok));
    }
  }
  if (!stack.empty()) throw Error(ErrorKind::UnmatchedBrackets, std::to_string(stack.size()) + " unclosed '('");
  if (!done) throw Error(ErrorKind::UnmatchedBrackets, "no bracketed tree in input");
  return std::move(*done);
}

namespace detail {

inline Tree from_raw(RawNode&& raw, bool allow_slots, bool is_root) {
  if (raw.label.empty() && !is_root) throw Error(ErrorKind::BadToken, "unlabeled inner node");
  if (raw.children.empty()) {
    if (raw.tokens.size() > 1) {
      throw Error(ErrorKind::BadToken, "leaf '" + raw.label + "' has " + std::to_string(raw.tokens.size()) + " tokens");
    }
    if (raw.tokens.empty()) {
      if (!allow_slots) throw Error(ErrorKind::EmptyNode, "node '" + raw.label + "' has no children");
      return Tree::leaf(std::move(raw.label), "");
    }
    return Tree::leaf(std::move(raw.label), std::move(raw.tokens.front()));
  }
  Tree t;
  t.label = std::move(raw.label);
  t.children.reserve(raw.children.size());
  for (RawNode& child : raw.children) t.children.push_back(from_raw(std::move(child), allow_slots, false));
  return t;
}

}  // namespace detail

/// Converts a raw node to a Tree. An unlabeled root "( (S ...))" wrapper is
/// removed; with allow_slots, "(POS )" becomes a leaf with an empty word.
inline Tree tree_from_raw(RawNode raw, bool allow_slots = false) {
  if (raw.label.empty() && raw.tokens.empty() && raw.children.size() == 1) {
    RawNode inner = std::move(raw.children.front());
    raw = std::move(inner);
  }
  if (raw.label.empty()) raw.label = "ROOT";
  return detail::from_raw(std::move(raw), allow_slots, true);
}

inline Tree parse_bracketed(std::string_view text) { return tree_from_raw(parse_raw(text), false); }

/// Like parse_bracketed but accepts empty "(POS )" slots.
inline Tree parse_masked_bracketed(std::string_view text) { return tree_from_raw(parse_raw(text), true); }

namespace detail {

inline void render_into(const Tree& t, std::string& out) {
  out += '(';
  out += t.label;
  if (t.is_leaf()) {
    out += ' ';
    out += encode_token(*t.word);
  } else {
    for (const Tree& child : t.children) {
      out += ' ';
      render_into(child, out);
    }
  }
  out += ')';
}

}  // namespace detail

inline std::string render_bracketed(const Tree& t) {
  std::string out;
  detail::render_into(t, out);
  return out;
}

inline void collect_leaves(const Tree& t, std::vector<const Tree*>& out) {
  if (t.is_leaf()) {
    out.push_back(&t);
    return;
  }
  for (const Tree& c : t.children) collect_leaves(c, out);
}

inline std::vector<const Tree*> leaves(const Tree& t) {
  std::vector<const Tree*> out;
  collect_leaves(t, out);
  return out;
}

inline std::vector<std::string> words(const Tree& t) {
  std::vector<std::string> out;
  for (const Tree* leaf : leaves(t)) out.push_back(*leaf->word);
  return out;
}

inline std::vector<std::string> pos_tags(const Tree& t) {
  std::vector<std::string> out;
  for (const Tree* leaf : leaves(t)) out.push_back(leaf->label);
  return out;
}

inline Sentence sentence_of(const Tree& t) { return Sentence{words(t), pos_tags(t)}; }

inline std::size_t node_count(const Tree& t) {
  std::size_t n = 1;
  for (const Tree& c : t.children) n += node_count(c);
  return n;
}

/// Checks the structural invariants: leaves carry one nonempty word, inner
/// nodes have at least one child and a label.
inline bool well_formed(const Tree& t) {
  if (t.label.empty()) return false;
  if (t.is_leaf()) {
    if (!t.children.empty() || t.word->empty()) return false;
    for (char c : *t.word) {
      if (detail::is_space(c)) return false;
    }
    return true;
  }
  if (t.children.empty()) return false;
  for (const Tree& c : t.children) {
    if (!well_formed(c)) return false;
  }
  return true;
}

namespace detail {

inline std::string strip_function_tags(const std::string& label) {
  if (label.empty() || label.front() == '-') return label;
  const std::size_t cut = label.find_first_of("-=");
  return cut == std::string::npos ? label : label.substr(0, cut);
}

inline std::optional<Tree> normalize_node(const Tree& t) {
  if (t.is_leaf()) {
    if (t.label == "-NONE-") return std::nullopt;
    return Tree::leaf(t.label, *t.word);
  }
  Tree out;
  out.label = strip_function_tags(t.label);
  for (const Tree& c : t.children) {
    if (auto kept = normalize_node(c)) out.children.push_back(std::move(*kept));
  }
  if (out.children.empty()) return std::nullopt;
  return out;
}

}  // namespace detail

/// Load-time cleanup: strips functional tags and indices ("NP-SBJ-1" -> "NP"),
/// removes trace leaves (-NONE-) and any phrase left empty by that removal.
inline Tree normalize(const Tree& t) {
  auto out = detail::normalize_node(t);
  if (!out) throw Error(ErrorKind::EmptyNode, "tree contains only trace nodes");
  return std::move(*out);
}

/// One bracketed tree per line; blank lines are skipped. Trees are
/// normalized on load.
inline std::vector<Tree> read_treebank(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open treebank '" + path + "'");
  std::vector<Tree> trees;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      trees.push_back(normalize(parse_bracketed(line)));
    } catch (const Error& e) {
      throw Error(e.kind(), path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return trees;
}

inline void write_treebank(const std::string& path, const std::vector<Tree>& trees) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write treebank '" + path + "'");
  for (const Tree& t : trees) out << render_bracketed(t) << '\n';
}

}  // namespace backgen
