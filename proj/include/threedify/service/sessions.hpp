#pragma once

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "threedify/chatflow/workflow.hpp"
#include "threedify/loop/feedback.hpp"
#include "threedify/rag/store.hpp"

namespace threedify::service {

/// Error with a stable symbolic code and the HTTP status it maps to.
class ApiError : public std::runtime_error {
 public:
  ApiError(int http_status, std::string code, const std::string& message, json extra = json::object())
      : std::runtime_error(message), status_(http_status), code_(std::move(code)), extra_(std::move(extra)) {}
  int http_status() const { return status_; }
  const std::string& code() const { return code_; }
  json body() const;

 private:
  int status_;
  std::string code_;
  json extra_;
};

struct ServiceConfig {
  std::shared_ptr<agents::Provider> provider;  // null: every provider call fails with 503
  std::optional<chatflow::Workflow> workflow;  // drives the per-session conversation
  std::shared_ptr<rag::IndexHolder> index;
  std::filesystem::path journal_dir;           // empty: no persistence
  std::string mcp_endpoint;                    // empty: embedded simulator
  agents::RetryBudget budget;
  std::optional<int> max_rounds;
  std::size_t default_candidates = 4;
  std::size_t max_candidates = 16;
  /// Fixed clock for reproducible output; empty uses UTC wall time.
  std::string fixed_time;
};

/// Sessions keyed by id. Mutations of one session are serialized; a
/// mutation arriving while another runs is refused with 409.
class SessionService {
 public:
  explicit SessionService(ServiceConfig config);
  ~SessionService();

  /// Replays every journal in journal_dir. Returns the number of sessions.
  std::size_t restore();

  json create_session(const json& request);
  json get_session(const std::string& id) const;
  json list_sessions() const;
  json get_candidates(const std::string& id) const;
  std::string get_thumbnail(const std::string& id, const std::string& candidate_id) const;
  json post_selection(const std::string& id, const json& request);
  /// Final scene snapshot of a built candidate (possibly incomplete; see the
  /// session's finalization for status).
  std::string get_scene(const std::string& id, const std::string& candidate_id) const;
  json post_turn(const std::string& id, const json& request);

  /// Events with seq > after, waiting up to `wait` for at least one when
  /// none are pending. Sets `finished` once the done event has been returned.
  std::vector<json> events_after(const std::string& id, std::uint64_t after, std::chrono::milliseconds wait,
                                 bool& finished) const;

  /// Wakes every waiting event reader; later waits return immediately.
  void shutdown();
  bool stopping() const { return stopping_; }

  const ServiceConfig& config() const { return config_; }

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& id) const;
  json create_impl(const std::string& id, const json& request, const std::string& at, bool journal);
  json selection_impl(Session& s, const json& request, const std::string& at, bool journal);
  json turn_impl(Session& s, const json& request, const std::string& at, bool journal);
  void append_journal(const std::string& id, const json& entry) const;
  std::string now() const;
  agents::Provider& provider() const;

  ServiceConfig config_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::atomic<bool> stopping_{false};
  std::uint64_t next_id_ = 1;
};

}  // namespace threedify::service
