#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "backgen/error.hpp"
#include "backgen/llm.hpp"
#include "backgen/masking.hpp"
#include "backgen/rng.hpp"

namespace backgen {

/// Identifies a request so deterministic backends can seed per record and
/// per attempt.
struct RequestContext {
  std::string record_id;
  int attempt = 0;
};

/// Anything that turns a chat request into reply text. Implementations must
/// be safe to call from several threads.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const ChatRequest& request, const RequestContext& ctx) const = 0;
};

struct HttpClientOptions {
  std::string endpoint = "http://127.0.0.1:8000/v1/chat/completions";
  std::string auth_token;
  int transport_retries = 3;
  int max_rate_limit_waits = 8;
  std::chrono::milliseconds backoff{500};
  std::chrono::milliseconds max_backoff{30000};
  std::chrono::seconds timeout{120};
};

/// POSTs chat-completions requests. Transport failures and 5xx replies are
/// retried with exponential backoff, then reported as EndpointUnreachable;
/// 429 replies back off and resume until max_rate_limit_waits is exhausted.
class HttpChatClient : public ChatBackend {
 public:
  explicit HttpChatClient(HttpClientOptions options) : options_(std::move(options)) {
    const std::string& url = options_.endpoint;
    const std::size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorKind::BadConfig, "endpoint needs a scheme: '" + url + "'");
    const std::size_t path_start = url.find('/', scheme_end + 3);
    base_ = url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
  }

  std::string complete(const ChatRequest& request, const RequestContext& ctx) const override {
    const std::string body = to_json(request).dump();
    httplib::Headers headers;
    if (!options_.auth_token.empty()) headers.emplace("Authorization", "Bearer " + options_.auth_token);
    int transport_failures = 0;
    int rate_limited = 0;
    auto wait = options_.backoff;
    while (true) {
      httplib::Client client(base_);
      client.set_connection_timeout(options_.timeout);
      client.set_read_timeout(options_.timeout);
      auto res = client.Post(path_, headers, body, "application/json");
      if (res && res->status == 200) {
        try {
          return chat_response_content(nlohmann::json::parse(res->body));
        } catch (const nlohmann::json::exception& e) {
          throw Error(ErrorKind::EndpointUnreachable, "malformed response for " + ctx.record_id + ": " + e.what());
        }
      }
      if (res && res->status == 429) {
        if (++rate_limited > options_.max_rate_limit_waits) {
          throw Error(ErrorKind::RateLimited, "still rate limited after " + std::to_string(rate_limited - 1) + " waits");
        }
      } else if (!res || res->status >= 500) {
        if (++transport_failures > options_.transport_retries) {
          const std::string why = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
          throw Error(ErrorKind::EndpointUnreachable, options_.endpoint + ": " + why);
        }
      } else {
        throw Error(ErrorKind::EndpointUnreachable, options_.endpoint + ": HTTP " + std::to_string(res->status) + " " +
                                                        res->body.substr(0, 200));
      }
      std::this_thread::sleep_for(wait);
      wait = std::min(wait * 2, options_.max_backoff);
    }
  }

 private:
  HttpClientOptions options_;
  std::string base_;
  std::string path_;
};

/// Offline back-generation backend. It reads the masked tree from the last
/// user message and fills every slot: in echo mode with the original word
/// (looked up by masked render), in lexicon mode with a word of the same POS
/// drawn with a seed derived from (seed, record id, attempt).
class MockBackGenLlm : public ChatBackend {
 public:
  enum class Mode { Echo, Lexicon };

  MockBackGenLlm(Mode mode, std::uint64_t seed) : mode_(mode), seed_(seed) {}

  /// Registers an original tree for echo mode.
  void remember(const std::string& masked_render, const std::string& original_render) {
    originals_[masked_render] = original_render;
  }

  /// Collects POS -> word lists for lexicon mode.
  void add_lexicon(const std::vector<Tree>& trees) {
    for (const Tree& t : trees) {
      for (const Tree* leaf : leaves(t)) {
        auto& words = lexicon_[leaf->label];
        if (std::find(words.begin(), words.end(), *leaf->word) == words.end()) words.push_back(*leaf->word);
      }
    }
  }

  std::string complete(const ChatRequest& request, const RequestContext& ctx) const override {
    const std::string& query = request.messages.back().content;
    if (mode_ == Mode::Echo) {
      auto it = originals_.find(query);
      return it == originals_.end() ? query : it->second;
    }
    MaskedTree masked = parse_masked(query);
    Rng rng(mix_seed(seed_, hash_id(ctx.record_id) ^ (static_cast<std::uint64_t>(ctx.attempt) << 48)));
    auto fill = [&](auto&& self, Tree& t) -> void {
      if (t.is_leaf()) {
        if (t.word->empty()) {
          auto it = lexicon_.find(t.label);
          t.word = (it == lexicon_.end() || it->second.empty()) ? std::string("x")
                                                                : it->second[rng.below(it->second.size())];
        }
        return;
      }
      for (Tree& c : t.children) self(self, c);
    };
    fill(fill, masked.structure);
    return render_bracketed(masked.structure);
  }

  static std::uint64_t hash_id(const std::string& id) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : id) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    return h;
  }

 private:
  Mode mode_;
  std::uint64_t seed_;
  std::map<std::string, std::string> originals_;
  std::map<std::string, std::vector<std::string>> lexicon_;
};

enum class Corruption { DropBracket, AlterKeyword, UnfillSlot, EditSkeleton, MultiTokenSlot };

/// Rewrites a well-formed reply so that it fails validation in one specific
/// way. The masked tree tells which leaves are keywords and which are slots.
inline std::string corrupt_output(const std::string& reply, const MaskedTree& masked, Corruption kind) {
  switch (kind) {
    case Corruption::DropBracket: {
      std::string out = reply;
      const std::size_t last = out.rfind(')');
      if (last != std::string::npos) out.erase(last, 1);
      return out;
    }
    case Corruption::EditSkeleton: {
      Tree t = parse_masked_bracketed(reply);
      t.label += "X";
      return render_bracketed(t);
    }
    default:
      break;
  }
  Tree t = parse_masked_bracketed(reply);
  const std::vector<const Tree*> want = leaves(masked.structure);
  std::vector<Tree*> got;
  auto collect = [&](auto&& self, Tree& node) -> void {
    if (node.is_leaf()) {
      got.push_back(&node);
      return;
    }
    for (Tree& c : node.children) self(self, c);
  };
  collect(collect, t);
  const bool want_keyword = kind == Corruption::AlterKeyword;
  for (std::size_t k = 0; k < want.size() && k < got.size(); ++k) {
    if (want[k]->word->empty() == want_keyword) continue;
    if (kind == Corruption::AlterKeyword) {
      got[k]->word = *got[k]->word + "_altered";
      return render_bracketed(t);
    }
    if (kind == Corruption::UnfillSlot) {
      got[k]->word = "";
      return render_bracketed(t);
    }
    // Multi-token slot: a space inside the word renders as two tokens.
    got[k]->word = *got[k]->word + " extra";
    return render_bracketed(t);
  }
  return reply;
}

/// Wraps a backend and corrupts a seeded fraction of its replies, cycling
/// through the corruption classes.
class CorruptingLlm : public ChatBackend {
 public:
  CorruptingLlm(std::shared_ptr<const ChatBackend> inner, double rate, std::uint64_t seed)
      : inner_(std::move(inner)), rate_(rate), seed_(seed) {}

  std::string complete(const ChatRequest& request, const RequestContext& ctx) const override {
    std::string reply = inner_->complete(request, ctx);
    Rng rng(mix_seed(seed_, MockBackGenLlm::hash_id(ctx.record_id) ^ (static_cast<std::uint64_t>(ctx.attempt) << 48)));
    if (rng.uniform() >= rate_) return reply;
    const MaskedTree masked = parse_masked(request.messages.back().content);
    const bool has_slot = masked.kept_indices.size() < leaves(masked.structure).size();
    const bool has_keyword = !masked.kept_indices.empty();
    std::vector<Corruption> options{Corruption::DropBracket, Corruption::EditSkeleton};
    if (has_keyword) options.push_back(Corruption::AlterKeyword);
    if (has_slot) {
      options.push_back(Corruption::UnfillSlot);
      options.push_back(Corruption::MultiTokenSlot);
    }
    return corrupt_output(reply, masked, options[rng.below(options.size())]);
  }

 private:
  std::shared_ptr<const ChatBackend> inner_;
  double rate_;
  std::uint64_t seed_;
};

/// Replies with a fixed string regardless of input.
class ConstantLlm : public ChatBackend {
 public:
  explicit ConstantLlm(std::string reply) : reply_(std::move(reply)) {}
  std::string complete(const ChatRequest&, const RequestContext&) const override { return reply_; }

 private:
  std::string reply_;
};

/// Offline direct-parsing backend: answers with a right-branching tree over
/// the query words, or with a registered tree for known sentences.
class MockParseLlm : public ChatBackend {
 public:
  void remember(const Tree& tree) {
    std::string key;
    for (const std::string& w : words(tree)) key += (key.empty() ? "" : " ") + w;
    answers_[key] = render_bracketed(tree);
  }

  std::string complete(const ChatRequest& request, const RequestContext&) const override {
    const std::string& query = request.messages.back().content;
    auto it = answers_.find(query);
    if (it != answers_.end()) return it->second;
    std::vector<std::string> ws;
    std::size_t start = 0;
    while (start < query.size()) {
      const std::size_t end = query.find(' ', start);
      ws.push_back(query.substr(start, end == std::string::npos ? std::string::npos : end - start));
      if (end == std::string::npos) break;
      start = end + 1;
    }
    std::string out;
    for (std::size_t k = 0; k < ws.size(); ++k) {
      out += (k + 1 < ws.size()) ? "(S (XX " + ws[k] + ") " : "(XX " + ws[k] + ")";
    }
    out += std::string(ws.size() > 0 ? ws.size() - 1 : 0, ')');
    return out;
  }

 private:
  std::map<std::string, std::string> answers_;
};

}  // namespace backgen
