#include "threedify/service/sessions.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

namespace threedify::service {

namespace {

ApiError not_found(const std::string& what) { return ApiError(404, "not_found", what + " not found"); }

ApiError provider_unavailable(const std::exception& e) {
  return ApiError(503, "provider_unavailable", e.what());
}

}  // namespace

json ApiError::body() const {
  json err{{"code", code_}, {"message", what()}};
  for (const auto& [k, v] : extra_.items()) err[k] = v;
  return {{"error", err}};
}

struct SessionService::Session {
  std::string id;
  std::mutex exec;  // held for the whole of a mutation
  mutable std::mutex mu;
  std::condition_variable cv;

  // Guarded by mu.
  std::string prompt;
  std::string created_at;
  std::string updated_at;
  std::optional<chatflow::ConversationState> conversation;
  std::optional<loop::LoopState> loop;
  std::optional<loop::FinalizationResult> finalization;
  std::map<std::string, agents::Candidate> seen;
  std::vector<json> events;
  bool finished = false;

  // Guarded by exec.
  std::optional<agents::DccConnection> turn_dcc;

  void touch(const std::string& at) {
    if (at > updated_at) updated_at = at;
  }

  void emit(json event) {
    event["seq"] = events.size() + 1;
    if (event["type"] == "done") finished = true;
    events.push_back(std::move(event));
  }

  void remember(const agents::CandidateSet& set) {
    for (const auto& c : set) seen.emplace(c.id, c);
  }

  std::string status() const {
    return loop ? std::string(loop::to_string(loop->status)) : "collecting";
  }

  json to_json() const {
    json j{{"id", id},
           {"prompt", prompt},
           {"status", status()},
           {"created_at", created_at},
           {"updated_at", updated_at},
           {"event_count", events.size()}};
    j["conversation"] = conversation ? conversation->to_json() : json(nullptr);
    j["loop"] = loop ? loop->to_json() : json(nullptr);
    j["finalization"] = finalization ? finalization->to_json() : json(nullptr);
    return j;
  }
};

SessionService::SessionService(ServiceConfig config) : config_(std::move(config)) {
  if (!config_.journal_dir.empty()) std::filesystem::create_directories(config_.journal_dir);
}

SessionService::~SessionService() { shutdown(); }

void SessionService::shutdown() {
  stopping_ = true;
  std::lock_guard lock(mu_);
  for (auto& [id, s] : sessions_) {
    std::lock_guard slock(s->mu);
    s->cv.notify_all();
  }
}

std::string SessionService::now() const {
  if (!config_.fixed_time.empty()) return config_.fixed_time;
  const auto t = std::chrono::system_clock::now();
  const auto secs = std::chrono::system_clock::to_time_t(t);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

agents::Provider& SessionService::provider() const {
  static agents::UnavailableProvider unavailable;
  return config_.provider ? *config_.provider : unavailable;
}

std::shared_ptr<SessionService::Session> SessionService::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw not_found("session '" + id + "'");
  return it->second;
}

void SessionService::append_journal(const std::string& id, const json& entry) const {
  if (config_.journal_dir.empty()) return;
  std::ofstream out(config_.journal_dir / (id + ".jsonl"), std::ios::app);
  out << entry.dump() << '\n';
  out.flush();
  if (!out) throw ApiError(500, "journal_failed", "cannot append to the journal of session " + id);
}

std::size_t SessionService::restore() {
  if (config_.journal_dir.empty() || !std::filesystem::is_directory(config_.journal_dir)) return 0;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(config_.journal_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    const auto id = file.stem().string();
    std::ifstream in(file);
    std::string line;
    std::size_t line_no = 0;
    std::shared_ptr<Session> session;
    try {
      while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto entry = json::parse(line);
        const auto op = entry.at("op").get<std::string>();
        const auto at = entry.at("at").get<std::string>();
        if (line_no == 1) {
          if (op != "create") throw std::runtime_error("first entry must be create");
          create_impl(id, entry.at("request"), at, false);
          session = find(id);
        } else if (op == "selection") {
          selection_impl(*session, entry.at("request"), at, false);
        } else if (op == "turn") {
          turn_impl(*session, entry.at("request"), at, false);
        } else {
          throw std::runtime_error("unknown op '" + op + "'");
        }
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("journal " + file.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
    if (id.size() > 1 && id[0] == 's') {
      try {
        next_id_ = std::max<std::uint64_t>(next_id_, std::stoull(id.substr(1)) + 1);
      } catch (const std::exception&) {
      }
    }
  }
  return files.size();
}

json SessionService::create_session(const json& request) {
  std::string id;
  {
    std::lock_guard lock(mu_);
    char buf[24];
    std::snprintf(buf, sizeof buf, "s%06llu", static_cast<unsigned long long>(next_id_++));
    id = buf;
  }
  return create_impl(id, request, now(), true);
}

json SessionService::create_impl(const std::string& id, const json& request, const std::string& at, bool journal) {
  if (!request.is_object()) throw ApiError(400, "bad_request", "request body must be a JSON object");
  const auto prompt = request.value("prompt", json()).is_string() ? request["prompt"].get<std::string>() : "";
  if (prompt.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ApiError(400, "empty_prompt", "prompt must be a non-empty string");
  }
  std::size_t n = config_.default_candidates;
  if (request.contains("n")) {
    const auto& jn = request["n"];
    if (!jn.is_number_integer() || jn.get<std::int64_t>() < 1 ||
        jn.get<std::int64_t>() > static_cast<std::int64_t>(config_.max_candidates)) {
      throw ApiError(400, "bad_candidate_count",
                     "n must be an integer between 1 and " + std::to_string(config_.max_candidates));
    }
    n = jn.get<std::size_t>();
  }
  loop::LoopOptions options{config_.max_rounds};
  if (request.contains("max_rounds")) {
    if (!request["max_rounds"].is_number_integer() || request["max_rounds"].get<int>() < 1) {
      throw ApiError(400, "bad_request", "max_rounds must be a positive integer");
    }
    options.max_rounds = request["max_rounds"].get<int>();
  }

  auto s = std::make_shared<Session>();
  s->id = id;
  s->prompt = prompt;
  s->created_at = s->updated_at = at;
  if (config_.workflow) s->conversation = config_.workflow->initial_state;
  try {
    s->loop = loop::start_loop(prompt, n, provider(), options);
  } catch (const agents::ProviderError& e) {
    throw provider_unavailable(e);
  }
  s->remember(s->loop->current);
  json ids = json::array();
  for (const auto& c : s->loop->current) ids.push_back(c.id);
  s->emit({{"type", "round_opened"}, {"round", 1}, {"candidate_ids", ids}});

  {
    std::lock_guard lock(mu_);
    if (sessions_.count(id)) throw ApiError(409, "conflict", "session '" + id + "' already exists");
    sessions_.emplace(id, s);
  }
  if (journal) append_journal(id, {{"op", "create"}, {"at", at}, {"request", request}});
  std::lock_guard slock(s->mu);
  return s->to_json();
}

json SessionService::get_session(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mu);
  return s->to_json();
}

json SessionService::list_sessions() const {
  json out = json::array();
  std::lock_guard lock(mu_);
  for (const auto& [id, s] : sessions_) {
    std::lock_guard slock(s->mu);
    out.push_back({{"id", id}, {"status", s->status()}, {"updated_at", s->updated_at}});
  }
  return {{"sessions", out}};
}

json SessionService::get_candidates(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mu);
  json cands = json::array();
  for (const auto& c : s->loop->current) cands.push_back(c.to_json());
  return {{"round", s->loop->round}, {"status", s->status()}, {"candidates", cands}};
}

std::string SessionService::get_thumbnail(const std::string& id, const std::string& candidate_id) const {
  auto s = find(id);
  std::lock_guard lock(s->mu);
  auto it = s->seen.find(candidate_id);
  if (it == s->seen.end()) throw not_found("candidate '" + candidate_id + "'");
  return it->second.thumbnail;
}

std::string SessionService::get_scene(const std::string& id, const std::string& candidate_id) const {
  auto s = find(id);
  std::lock_guard lock(s->mu);
  if (s->finalization) {
    for (const auto& b : s->finalization->builds) {
      if (b.candidate_id != candidate_id) continue;
      if (!b.report) throw ApiError(404, "scene_unavailable", "candidate '" + candidate_id + "' was not built: " + b.error);
      return b.report->final_snapshot;
    }
  }
  if (s->seen.count(candidate_id)) {
    throw ApiError(404, "scene_unavailable", "no scene has been built for candidate '" + candidate_id + "'");
  }
  throw not_found("candidate '" + candidate_id + "'");
}

json SessionService::post_selection(const std::string& id, const json& request) {
  auto s = find(id);
  std::unique_lock exec(s->exec, std::try_to_lock);
  if (!exec.owns_lock()) throw ApiError(409, "conflict", "another request is updating session '" + id + "'");
  return selection_impl(*s, request, now(), true);
}

json SessionService::selection_impl(Session& s, const json& request, const std::string& at, bool journal) {
  if (!request.is_object() || !request.contains("round") || !request["round"].is_number_integer()) {
    throw ApiError(400, "bad_request", "selection needs an integer 'round'");
  }
  loop::LoopState state;
  {
    std::lock_guard lock(s.mu);
    state = *s.loop;
  }
  if (request["round"].get<std::int64_t>() != state.round) {
    throw ApiError(422, "stale_round", "selection answers round " + request["round"].dump() + " but the session is at round " + std::to_string(state.round),
                   {{"current_round", state.round}});
  }
  if (state.status != loop::LoopStatus::collecting) {
    throw ApiError(409, "loop_closed", "session is " + std::string(loop::to_string(state.status)));
  }
  loop::Selection sel;
  loop::LoopState next;
  try {
    sel = loop::Selection::from_json(request);
    next = loop::submit_selection(state, sel, provider());
  } catch (const loop::LoopError& e) {
    throw ApiError(400, "invalid_selection", e.what());
  } catch (const agents::ProviderError& e) {
    throw provider_unavailable(e);
  }
  if (journal) append_journal(s.id, {{"op", "selection"}, {"at", at}, {"request", request}});

  {
    std::lock_guard lock(s.mu);
    s.loop = next;
    s.touch(at);
    if (next.status == loop::LoopStatus::collecting) {
      s.remember(next.current);
      json ids = json::array();
      for (const auto& c : next.current) ids.push_back(c.id);
      s.emit({{"type", "round_opened"}, {"round", next.round}, {"candidate_ids", ids}});
    } else if (next.status == loop::LoopStatus::done) {
      s.emit({{"type", "done"}, {"completed", false}, {"partial", true}, {"snapshot_refs", json::object()}});
    }
    s.cv.notify_all();
  }
  if (next.status != loop::LoopStatus::finalizing) return get_session(s.id);

  loop::FinalizeServices services;
  services.planner = &provider();
  services.manager = config_.provider.get();
  services.budget = config_.budget;
  if (!config_.mcp_endpoint.empty()) {
    services.connect = [ep = config_.mcp_endpoint] { return agents::connect_external_dcc(ep); };
  }
  services.on_event = [&](const std::string& cid, const agents::StepEvent& e) {
    std::lock_guard lock(s.mu);
    if (e.escalated) {
      s.emit({{"type", "escalation"}, {"candidate_id", cid}, {"step", e.step}, {"attempts", e.attempt},
              {"message", e.message}});
    } else {
      s.emit({{"type", "finalization_step"}, {"candidate_id", cid}, {"step", e.step}, {"attempt", e.attempt},
              {"ok", e.ok}, {"message", e.message}});
    }
    s.cv.notify_all();
  };
  auto result = loop::finalize(next, services);
  std::lock_guard lock(s.mu);
  for (const auto& b : result.builds) {
    if (!b.report) {
      s.emit({{"type", "escalation"}, {"candidate_id", b.candidate_id}, {"step", nullptr}, {"message", b.error}});
    }
  }
  json refs = json::object();
  for (const auto& b : result.builds) refs[b.candidate_id] = b.report ? json(b.report->snapshot_ref) : json(nullptr);
  s.emit({{"type", "done"}, {"completed", result.all_completed()}, {"partial", next.partial}, {"snapshot_refs", refs}});
  s.loop = next;
  s.finalization = std::move(result);
  s.touch(at);
  s.cv.notify_all();
  return s.to_json();
}

json SessionService::post_turn(const std::string& id, const json& request) {
  auto s = find(id);
  std::unique_lock exec(s->exec, std::try_to_lock);
  if (!exec.owns_lock()) throw ApiError(409, "conflict", "another request is updating session '" + id + "'");
  return turn_impl(*s, request, now(), true);
}

json SessionService::turn_impl(Session& s, const json& request, const std::string& at, bool journal) {
  if (!config_.workflow) throw ApiError(409, "no_workflow", "the service runs without a chatflow workflow");
  if (!request.is_object() || !request.contains("input") || !request["input"].is_string()) {
    throw ApiError(400, "bad_request", "turn needs a string 'input'");
  }
  chatflow::ConversationState state;
  {
    std::lock_guard lock(s.mu);
    state = *s.conversation;
  }
  chatflow::TurnServices services;
  services.retrieve = [this](const std::string& query, int k) {
    if (!config_.index) return std::string();
    return rag::format_hits(config_.index->get()->query(query, static_cast<std::size_t>(k)));
  };
  services.agent = [this, &s](const std::string& role, const std::string& prompt) {
    agents::Context ctx;
    ctx.messages.push_back({"system", "You are the " + role + " agent of a procedural 3D modeling pipeline."});
    ctx.messages.push_back({"user", prompt});
    ctx.meta = {{"session_prompt", s.prompt}};
    const auto reply = provider().complete(role, ctx);
    if (reply.kind == agents::ProviderReply::Kind::tool_call) {
      return reply.tool_call.args.value("cmd", reply.tool_call.args.dump());
    }
    if (reply.kind != agents::ProviderReply::Kind::text) {
      throw agents::ProviderError("agent '" + role + "' must reply with text");
    }
    return reply.text;
  };
  services.call_tool = [this, &s](const std::string& tool, const json& args) {
    if (!s.turn_dcc) {
      s.turn_dcc = config_.mcp_endpoint.empty() ? agents::connect_embedded_dcc()
                                                : agents::connect_external_dcc(config_.mcp_endpoint);
    }
    const auto result = s.turn_dcc->client->call_tool(tool, args);
    if (result.is_error) throw std::runtime_error(result.text);
    return result.text;
  };
  chatflow::TurnResult result;
  try {
    result = chatflow::run_turn(*config_.workflow, state, request["input"].get<std::string>(), services);
  } catch (const chatflow::TurnError& e) {
    throw ApiError(422, "turn_failed", e.what(), {{"node", e.node()}});
  }
  if (journal) append_journal(s.id, {{"op", "turn"}, {"at", at}, {"request", request}});
  std::lock_guard lock(s.mu);
  s.conversation = result.new_state;
  s.touch(at);
  return {{"output", result.output_text}, {"trace", result.trace}, {"conversation", result.new_state.to_json()}};
}

std::vector<json> SessionService::events_after(const std::string& id, std::uint64_t after,
                                               std::chrono::milliseconds wait, bool& finished) const {
  auto s = find(id);
  std::unique_lock lock(s->mu);
  s->cv.wait_for(lock, wait, [&] { return s->events.size() > after || stopping_; });
  std::vector<json> out;
  for (std::size_t i = after; i < s->events.size(); ++i) out.push_back(s->events[i]);
  finished = s->finished;
  return out;
}

}  // namespace threedify::service
