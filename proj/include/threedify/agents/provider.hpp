#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "threedify/common/canonical.hpp"

namespace threedify::agents {

/// One message of the context handed to a provider. `from` is "system",
/// "user", "assistant" or "tool".
struct ContextMessage {
  std::string from;
  std::string content;
};

/// Messages plus structured metadata (round, slot counts, candidate params)
/// that scripted providers can match on without parsing prose.
struct Context {
  std::vector<ContextMessage> messages;
  json meta = json::object();

  /// FNV-1a-64 over the canonical form of (role, messages, meta), in hex.
  std::string hash(const std::string& role) const;
  std::string text() const;
};

struct ToolCallProposal {
  std::string tool;
  json args = json::object();
};

struct CandidateProposal {
  json params = json::object();
  std::string descriptor;
};

struct ProviderReply {
  enum class Kind { text, tool_call, candidates };
  Kind kind = Kind::text;
  std::string text;
  ToolCallProposal tool_call;
  std::vector<CandidateProposal> candidates;

  static ProviderReply make_text(std::string text);
};

class ProviderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// complete(role, context) -> reply. Roles used by the pipeline: visualizer,
/// planner, manager; the chatflow template adds scene_analyzer, builder and
/// inspector.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual ProviderReply complete(const std::string& role, const Context& context) = 0;
};

/// Replies from a fixture document. A pure function of (role, context):
/// rules are tried in order and the first match answers. See
/// docs/fixtures.md for the format.
class ScriptedProvider : public Provider {
 public:
  explicit ScriptedProvider(json fixture);
  static std::shared_ptr<ScriptedProvider> from_file(const std::filesystem::path& path);

  ProviderReply complete(const std::string& role, const Context& context) override;

  /// Every (role, context hash) seen so far, in call order.
  std::vector<std::pair<std::string, std::string>> calls() const;

 private:
  json fixture_;
  mutable std::mutex mu_;
  std::vector<std::pair<std::string, std::string>> calls_;
};

/// Always fails; stands in for an unreachable model endpoint.
class UnavailableProvider : public Provider {
 public:
  ProviderReply complete(const std::string& role, const Context&) override {
    throw ProviderError("provider unavailable for role " + role);
  }
};

/// Replaces `{name}` with the canonical text of params[name]; unknown names
/// are left as they are.
std::string fill_placeholders(std::string_view text, const json& params);

}  // namespace threedify::agents
