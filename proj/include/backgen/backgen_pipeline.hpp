#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "backgen/error.hpp"
#include "backgen/llm.hpp"
#include "backgen/llm_client.hpp"
#include "backgen/masking.hpp"
#include "backgen/tree.hpp"

namespace backgen {

struct BackGenOptions {
  int retries = 2;
  int concurrency = 1;
  std::size_t demos_per_prompt = 2;
  std::string model = "mock";
  double temperature = 1.0;
};

struct BackGenRecord {
  std::string id;
  std::string domain;
  MaskedTree masked;
  std::string llm_raw;  // reply of the last attempt
  ValidationReport report;
  int attempts = 0;
  std::vector<ValidationStatus> history;  // status of every attempt
};

struct BackGenSummary {
  std::map<ValidationStatus, long> final_status;  // one entry per record
  std::map<ValidationStatus, long> all_attempts;  // one entry per request
  long records = 0;
  long requests = 0;

  long accepted() const {
    auto it = final_status.find(ValidationStatus::Accepted);
    return it == final_status.end() ? 0 : it->second;
  }

  nlohmann::json to_json() const {
    nlohmann::json finals = nlohmann::json::object(), attempts = nlohmann::json::object();
    for (ValidationStatus s : kAllStatuses) {
      auto f = final_status.find(s);
      auto a = all_attempts.find(s);
      finals[std::string(to_string(s))] = f == final_status.end() ? 0 : f->second;
      attempts[std::string(to_string(s))] = a == all_attempts.end() ? 0 : a->second;
    }
    return {{"records", records}, {"requests", requests}, {"final", finals},
            {"attempts", attempts}};
  }
};

struct BackGenResult {
  std::vector<BackGenRecord> records;  // input order
  BackGenSummary summary;

  std::vector<Tree> accepted_trees() const {
    std::vector<Tree> out;
    for (const BackGenRecord& r : records) {
      if (r.report.accepted()) out.push_back(*r.report.tree);
    }
    return out;
  }
};

/// Sends one request per masked record, re-asking up to options.retries more
/// times while the reply is rejected. Each attempt carries its own attempt
/// number so a sampling backend returns a fresh sample. Requests run on
/// options.concurrency threads; results keep input order. The first backend
/// error (EndpointUnreachable, RateLimited) is rethrown after all workers stop.
inline BackGenResult backgen_batch(const std::vector<MaskedRecord>& inputs, const ChatBackend& backend,
                                   const std::vector<DemonstrationPair>& demo_pool, const BackGenOptions& options = {}) {
  if (options.retries < 0 || options.concurrency < 1) {
    throw Error(ErrorKind::BadConfig, "retries must be >= 0 and concurrency >= 1");
  }
  BackGenResult result;
  result.records.resize(inputs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto work = [&] {
    while (!failed.load()) {
      const std::size_t k = next.fetch_add(1);
      if (k >= inputs.size()) return;
      try {
        const MaskedRecord& in = inputs[k];
        BackGenRecord& rec = result.records[k];
        rec.id = in.id;
        rec.domain = in.domain;
        rec.masked = parse_masked(in.masked_render);
        const int length = static_cast<int>(leaves(rec.masked.structure).size());
        const ChatRequest request =
            build_backgen_prompt(rec.masked, select_demonstrations(demo_pool, length, options.demos_per_prompt, in.original_render),
                                 options.model, options.temperature);
        for (int attempt = 0; attempt <= options.retries; ++attempt) {
          rec.llm_raw = backend.complete(request, RequestContext{in.id, attempt});
          rec.report = validate_backgen_output(rec.masked, rec.llm_raw);
          rec.attempts = attempt + 1;
          rec.history.push_back(rec.report.status);
          if (rec.report.accepted()) break;
        }
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };

  const int threads = std::min<int>(options.concurrency, std::max<int>(1, static_cast<int>(inputs.size())));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  for (const BackGenRecord& rec : result.records) {
    ++result.summary.records;
    ++result.summary.final_status[rec.report.status];
    result.summary.requests += rec.attempts;
    for (ValidationStatus s : rec.history) ++result.summary.all_attempts[s];
  }
  return result;
}

/// One JSON line per record: id, domain, status, detail, attempts, raw reply.
inline void write_audit_log(const std::string& path, const std::vector<BackGenRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  for (const BackGenRecord& r : records) {
    nlohmann::json j{{"id", r.id},
                     {"status", std::string(to_string(r.report.status))},
                     {"detail", r.report.detail},
                     {"attempts", r.attempts},
                     {"raw", r.llm_raw}};
    if (!r.domain.empty()) j["domain"] = r.domain;
    out << j.dump() << '\n';
  }
}

}  // namespace backgen
