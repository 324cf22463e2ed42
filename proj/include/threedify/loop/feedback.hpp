#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "threedify/agents/pipeline.hpp"

namespace threedify::loop {

enum class LoopStatus { collecting, finalizing, done };

std::string_view to_string(LoopStatus status);

struct Selection {
  std::set<std::string> selected_ids;
  std::map<std::string, std::string> rejection_reasons;  // rejected id -> reason
  bool more_diversity = false;

  json to_json() const;
  static Selection from_json(const json& j);
};

struct HistoryEntry {
  int round = 0;
  Selection selection;
};

struct LoopOptions {
  /// Rounds after which an incomplete selection is accepted as final.
  std::optional<int> max_rounds;
};

struct LoopState {
  std::string prompt;
  std::size_t n = 0;
  int round = 1;
  agents::CandidateSet current;
  std::set<std::string> selected_ids;
  std::vector<HistoryEntry> history;
  LoopStatus status = LoopStatus::collecting;
  LoopOptions options;
  bool partial = false;  // round cap hit before all n were selected

  /// Candidates that finalization builds, in slot order.
  std::vector<agents::Candidate> accepted() const;
  json to_json() const;
};

class LoopError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

LoopState start_loop(const std::string& prompt, std::size_t n, agents::Provider& provider, LoopOptions options = {});

/// Checks `sel` against the current round; throws LoopError naming the
/// first problem.
void validate_selection(const LoopState& state, const Selection& sel);

/// m == n moves to finalizing. Otherwise the next round keeps the selected
/// candidates and regenerates the rest; with a round cap, reaching it
/// finalizes the selected subset (or ends the loop if nothing was selected).
LoopState submit_selection(const LoopState& state, const Selection& sel, agents::Provider& provider);

struct CandidateBuild {
  std::string candidate_id;
  bool completed = false;
  std::optional<agents::ExecutionReport> report;
  json spec;  // procedural spec, null if planning failed
  std::string error;

  json to_json() const;
};

struct FinalizationResult {
  std::vector<CandidateBuild> builds;
  json scopes;  // scopes over every accepted candidate, null if heterogeneous

  std::vector<std::string> snapshot_refs() const;
  bool all_completed() const;
  json to_json() const;
};

struct FinalizeServices {
  agents::Provider* planner = nullptr;
  agents::Provider* manager = nullptr;
  agents::RetryBudget budget;
  /// One fresh DCC connection per candidate.
  std::function<agents::DccConnection()> connect = agents::connect_embedded_dcc;
  std::function<void(const std::string& candidate_id, const agents::StepEvent&)> on_event;
};

/// Plans and builds each accepted candidate in its own scene, then sets
/// status to done. A candidate whose planning or execution fails is marked
/// incomplete; the others still run.
FinalizationResult finalize(LoopState& state, const FinalizeServices& services);

}  // namespace threedify::loop
