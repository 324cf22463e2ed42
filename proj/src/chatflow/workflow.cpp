#include "threedify/chatflow/workflow.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <fstream>
#include <set>

namespace threedify::chatflow {

namespace {

constexpr std::array<std::pair<std::string_view, NodeKind>, 8> kKinds{{
    {"start", NodeKind::start},
    {"answer", NodeKind::answer},
    {"assigner", NodeKind::assigner},
    {"function", NodeKind::function},
    {"branch", NodeKind::branch},
    {"retrieval", NodeKind::retrieval},
    {"agent_call", NodeKind::agent_call},
    {"tool_call", NodeKind::tool_call},
}};

const std::map<NodeKind, std::set<std::string>>& allowed_keys() {
  static const std::map<NodeKind, std::set<std::string>> keys{
      {NodeKind::start, {"kind"}},
      {NodeKind::answer, {"kind", "text"}},
      {NodeKind::assigner, {"kind", "assignments"}},
      {NodeKind::function, {"kind", "function", "args"}},
      {NodeKind::branch, {"kind", "on", "cases", "match"}},
      {NodeKind::retrieval, {"kind", "query", "top_k"}},
      {NodeKind::agent_call, {"kind", "role", "prompt"}},
      {NodeKind::tool_call, {"kind", "tool", "args"}},
  };
  return keys;
}

const std::map<std::string, std::vector<std::string>>& function_args() {
  static const std::map<std::string, std::vector<std::string>> args{
      {"to_next_stage", {}},
      {"set_stage", {"stage"}},
      {"decrement_inspection", {}},
      {"reset_inspection", {}},
      {"template", {"template"}},
      {"add", {"a", "b"}},
      {"equals", {"a", "b"}},
      {"contains", {"haystack", "needle"}},
  };
  return args;
}

bool valid_node_id(std::string_view id) {
  return !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

/// `{{ ref }}` occurrences in a template, trimmed.
std::vector<std::string> template_refs(std::string_view text) {
  std::vector<std::string> refs;
  std::size_t pos = 0;
  while ((pos = text.find("{{", pos)) != std::string_view::npos) {
    const auto end = text.find("}}", pos + 2);
    if (end == std::string_view::npos) break;
    auto inner = text.substr(pos + 2, end - pos - 2);
    while (!inner.empty() && inner.front() == ' ') inner.remove_prefix(1);
    while (!inner.empty() && inner.back() == ' ') inner.remove_suffix(1);
    refs.emplace_back(inner);
    pos = end + 2;
  }
  return refs;
}

std::vector<std::string> outputs_of(const Node& node) {
  switch (node.kind) {
    case NodeKind::function: return function_catalog().at(node.function);
    case NodeKind::retrieval: return {"result"};
    case NodeKind::agent_call: return {"text"};
    case NodeKind::tool_call: return {"result"};
    default: return {};
  }
}

struct Loader {
  const json& doc;
  std::vector<std::string> diags;
  Workflow wf;

  void error(std::string message) { diags.push_back(std::move(message)); }

  std::optional<std::string> string_field(const std::string& id, const json& cfg, const char* key, bool required) {
    auto it = cfg.find(key);
    if (it == cfg.end()) {
      if (required) error("node '" + id + "': missing required key '" + key + "'");
      return std::nullopt;
    }
    if (!it->is_string()) {
      error("node '" + id + "': '" + key + "' must be a string");
      return std::nullopt;
    }
    return it->get<std::string>();
  }

  void parse_assignment(Node& node, const json& a, std::size_t index) {
    const auto where = "node '" + node.id + "' assignment " + std::to_string(index);
    if (!a.is_object()) {
      error(where + ": must be an object");
      return;
    }
    Assignment asg;
    auto var = a.find("variable");
    if (var == a.end() || !var->is_string()) {
      error(where + ": missing string 'variable'");
      return;
    }
    asg.variable = var->get<std::string>();
    const auto op = a.value("op", std::string("set"));
    if (op == "set") {
      asg.op = Assignment::Op::set;
    } else if (op == "append") {
      asg.op = Assignment::Op::append;
    } else if (op == "clear") {
      asg.op = Assignment::Op::clear;
    } else {
      error(where + ": unknown op '" + op + "'");
      return;
    }
    for (const auto& [key, v] : a.items()) {
      if (key != "variable" && key != "op" && key != "value" && key != "from") {
        error(where + ": unknown key '" + key + "'");
      }
    }
    if (a.contains("value")) {
      try {
        asg.value = value_from_json(a["value"]);
      } catch (const StateError& e) {
        error(where + ": " + e.what());
      }
    }
    if (a.contains("from")) {
      if (!a["from"].is_string()) {
        error(where + ": 'from' must be a string reference");
      } else {
        asg.from = a["from"].get<std::string>();
      }
    }
    const bool has_source = asg.value.has_value() || !asg.from.empty();
    if (asg.op == Assignment::Op::clear && has_source) error(where + ": clear takes no value");
    if (asg.op != Assignment::Op::clear && asg.value.has_value() == !asg.from.empty()) {
      error(where + ": exactly one of 'value' or 'from' is required");
    }
    node.assignments.push_back(std::move(asg));
  }

  void parse_node(const std::string& id, const json& cfg) {
    if (!valid_node_id(id)) error("node '" + id + "': ids may only contain letters, digits, '_' and '-'");
    if (!cfg.is_object()) {
      error("node '" + id + "': must be an object");
      return;
    }
    const auto kind_text = string_field(id, cfg, "kind", true);
    if (!kind_text) return;
    const auto kind = parse_node_kind(*kind_text);
    if (!kind) {
      error("node '" + id + "': unknown kind '" + *kind_text + "'");
      return;
    }
    Node node;
    node.id = id;
    node.kind = *kind;
    for (const auto& [key, v] : cfg.items()) {
      if (!allowed_keys().at(*kind).count(key)) {
        error("node '" + id + "': unknown config key '" + key + "' for kind " + *kind_text);
      }
    }
    switch (*kind) {
      case NodeKind::start: break;
      case NodeKind::answer: node.text = string_field(id, cfg, "text", true).value_or(""); break;
      case NodeKind::assigner: {
        auto it = cfg.find("assignments");
        if (it == cfg.end() || !it->is_array() || it->empty()) {
          error("node '" + id + "': 'assignments' must be a non-empty array");
          break;
        }
        for (std::size_t i = 0; i < it->size(); ++i) parse_assignment(node, (*it)[i], i);
        break;
      }
      case NodeKind::function: {
        node.function = string_field(id, cfg, "function", true).value_or("");
        if (node.function.empty()) break;
        auto spec = function_args().find(node.function);
        if (spec == function_args().end()) {
          error("node '" + id + "': unknown function '" + node.function + "'");
          node.function.clear();
          break;
        }
        const json args = cfg.value("args", json::object());
        if (!args.is_object()) {
          error("node '" + id + "': 'args' must be an object");
          break;
        }
        for (const auto& [key, v] : args.items()) {
          if (std::find(spec->second.begin(), spec->second.end(), key) == spec->second.end()) {
            error("node '" + id + "': function " + node.function + " takes no argument '" + key + "'");
          } else if (!v.is_string()) {
            error("node '" + id + "': argument '" + key + "' must be a string template");
          } else {
            node.args[key] = v.get<std::string>();
          }
        }
        for (const auto& key : spec->second) {
          if (!args.contains(key)) error("node '" + id + "': function " + node.function + " needs '" + key + "'");
        }
        break;
      }
      case NodeKind::branch: {
        node.on = string_field(id, cfg, "on", true).value_or("");
        const auto match = cfg.value("match", std::string("value"));
        if (match != "value" && match != "stage") error("node '" + id + "': match must be 'value' or 'stage'");
        node.match_stage = match == "stage";
        auto it = cfg.find("cases");
        if (it == cfg.end() || !it->is_array() ||
            !std::all_of(it->begin(), it->end(), [](const json& c) { return c.is_string(); })) {
          error("node '" + id + "': 'cases' must be an array of strings");
          break;
        }
        node.cases = it->get<std::vector<std::string>>();
        std::set<std::string> unique(node.cases.begin(), node.cases.end());
        if (unique.size() != node.cases.size()) error("node '" + id + "': duplicate branch case");
        if (unique.count("default")) error("node '" + id + "': 'default' is reserved and cannot be a case");
        break;
      }
      case NodeKind::retrieval: {
        node.text = string_field(id, cfg, "query", true).value_or("");
        if (cfg.contains("top_k")) {
          if (!cfg["top_k"].is_number_integer() || cfg["top_k"].get<int>() < 1) {
            error("node '" + id + "': top_k must be a positive integer");
          } else {
            node.top_k = cfg["top_k"].get<int>();
          }
        }
        break;
      }
      case NodeKind::agent_call:
        node.role = string_field(id, cfg, "role", true).value_or("");
        node.text = string_field(id, cfg, "prompt", true).value_or("");
        break;
      case NodeKind::tool_call:
        node.tool = string_field(id, cfg, "tool", true).value_or("");
        node.tool_args = cfg.value("args", json::object());
        if (!node.tool_args.is_object()) error("node '" + id + "': 'args' must be an object");
        break;
    }
    wf.nodes.emplace(id, std::move(node));
  }

  void check_ref(const std::string& where, const std::string& ref) {
    if (ref == "sys.query") return;
    const auto dot = ref.find('.');
    if (dot == std::string::npos) {
      error(where + ": reference '" + ref + "' must look like sys.query, conv.<var> or <node>.<output>");
      return;
    }
    const auto head = ref.substr(0, dot);
    const auto tail = ref.substr(dot + 1);
    if (head == "conv") {
      if (!wf.initial_state.get(tail)) error(where + ": unknown conversation variable '" + tail + "'");
      return;
    }
    auto it = wf.nodes.find(head);
    if (it == wf.nodes.end()) {
      error(where + ": reference '" + ref + "' names no node");
      return;
    }
    if (it->second.kind == NodeKind::function && it->second.function.empty()) return;
    const auto outputs = outputs_of(it->second);
    if (std::find(outputs.begin(), outputs.end(), tail) == outputs.end()) {
      error(where + ": node '" + head + "' has no output '" + tail + "'");
    }
  }

  void check_template(const std::string& where, const std::string& text) {
    for (const auto& ref : template_refs(text)) check_ref(where, ref);
  }

  void check_tool_args(const std::string& where, const json& value) {
    if (value.is_string()) {
      check_template(where, value.get<std::string>());
    } else if (value.is_object() || value.is_array()) {
      for (const auto& item : value) check_tool_args(where, item);
    }
  }

  void check_references() {
    for (const auto& [id, node] : wf.nodes) {
      const auto where = "node '" + id + "'";
      check_template(where, node.text);
      for (const auto& [key, arg] : node.args) check_template(where, arg);
      if (node.kind == NodeKind::branch && !node.on.empty()) check_ref(where, node.on);
      if (node.kind == NodeKind::tool_call) check_tool_args(where, node.tool_args);
      for (const auto& asg : node.assignments) {
        const auto current = wf.initial_state.get(asg.variable);
        if (!current) {
          error(where + ": assigns unknown conversation variable '" + asg.variable + "'");
          continue;
        }
        if (asg.op == Assignment::Op::append && !std::holds_alternative<std::vector<std::string>>(*current)) {
          error(where + ": append needs an array variable, '" + asg.variable + "' is not");
        }
        if (asg.op == Assignment::Op::set && asg.value) {
          ConversationState probe = wf.initial_state;
          try {
            probe.set(asg.variable, *asg.value);
          } catch (const StateError& e) {
            error(where + ": " + e.what());
          }
        }
        if (!asg.from.empty()) check_ref(where, asg.from);
      }
    }
  }

  void parse_edges() {
    const auto& edges = doc.at("edges");
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const auto& e = edges[i];
      const auto where = "edge " + std::to_string(i);
      if (!e.is_object() || !e.contains("from") || !e.contains("to") || !e["from"].is_string() ||
          !e["to"].is_string() || (e.contains("label") && !e["label"].is_string())) {
        error(where + ": needs string 'from' and 'to' and an optional string 'label'");
        continue;
      }
      const auto from = e["from"].get<std::string>();
      const auto to = e["to"].get<std::string>();
      const auto label = e.value("label", std::string("next"));
      const auto desc = "edge " + from + " -[" + label + "]-> " + to;
      if (!wf.nodes.count(from)) {
        error(desc + ": unknown source node");
        continue;
      }
      if (!wf.nodes.count(to)) {
        error(desc + ": unknown target node");
        continue;
      }
      if (!wf.edges.emplace(std::make_pair(from, label), to).second) error(desc + ": duplicate edge");
    }
  }

  void check_structure() {
    std::vector<std::string> starts;
    for (const auto& [id, node] : wf.nodes) {
      if (node.kind == NodeKind::start) starts.push_back(id);
    }
    if (starts.size() != 1) error("workflow needs exactly one start node, found " + std::to_string(starts.size()));
    if (!wf.nodes.count(wf.start)) {
      error("start '" + wf.start + "' is not a node");
      return;
    } else if (wf.nodes.at(wf.start).kind != NodeKind::start) {
      error("start '" + wf.start + "' is not a start node");
    }

    std::map<std::string, std::set<std::string>> labels;
    for (const auto& [key, to] : wf.edges) labels[key.first].insert(key.second);
    for (const auto& [id, node] : wf.nodes) {
      const auto& have = labels[id];
      if (node.kind == NodeKind::answer) {
        if (!have.empty()) error("node '" + id + "': answer nodes end the turn and take no outgoing edges");
      } else if (node.kind == NodeKind::branch) {
        std::set<std::string> want(node.cases.begin(), node.cases.end());
        want.insert("default");
        for (const auto& w : want) {
          if (!have.count(w)) error("node '" + id + "': branch case '" + w + "' has no outgoing edge");
        }
        for (const auto& h : have) {
          if (!want.count(h)) error("node '" + id + "': edge label '" + h + "' is not a declared case");
        }
      } else {
        if (!have.count("next")) error("node '" + id + "': missing outgoing 'next' edge");
        for (const auto& h : have) {
          if (h != "next") error("node '" + id + "': unexpected edge label '" + h + "'");
        }
      }
    }

    std::set<std::string> reachable{wf.start};
    std::deque<std::string> queue{wf.start};
    std::map<std::string, std::vector<std::string>> reverse;
    for (const auto& [key, to] : wf.edges) reverse[to].push_back(key.first);
    while (!queue.empty()) {
      const auto id = queue.front();
      queue.pop_front();
      for (auto it = wf.edges.lower_bound({id, ""}); it != wf.edges.end() && it->first.first == id; ++it) {
        if (reachable.insert(it->second).second) queue.push_back(it->second);
      }
    }
    std::set<std::string> finishes;
    for (const auto& [id, node] : wf.nodes) {
      if (node.kind == NodeKind::answer) {
        finishes.insert(id);
        queue.push_back(id);
      }
    }
    while (!queue.empty()) {
      const auto id = queue.front();
      queue.pop_front();
      for (const auto& pred : reverse[id]) {
        if (finishes.insert(pred).second) queue.push_back(pred);
      }
    }
    for (const auto& [id, node] : wf.nodes) {
      if (!reachable.count(id)) error("node '" + id + "': unreachable from start");
      if (!finishes.count(id)) error("node '" + id + "': no path to an answer node");
    }
  }

  void run() {
    if (!doc.is_object()) {
      error("workflow document must be a JSON object");
      return;
    }
    for (const auto& [key, v] : doc.items()) {
      if (key != "name" && key != "description" && key != "nodes" && key != "edges" && key != "start" &&
          key != "conversation_variables") {
        error("unknown top-level key '" + key + "'");
      }
    }
    if (!doc.contains("nodes") || !doc["nodes"].is_object()) error("'nodes' must be an object");
    if (!doc.contains("edges") || !doc["edges"].is_array()) error("'edges' must be an array");
    if (!doc.contains("start") || !doc["start"].is_string()) error("'start' must be a string");
    if (!diags.empty()) return;
    wf.name = doc.value("name", std::string("workflow"));
    wf.start = doc["start"].get<std::string>();
    try {
      wf.initial_state = ConversationState::from_json(doc.value("conversation_variables", json::object()));
    } catch (const StateError& e) {
      error(std::string("conversation_variables: ") + e.what());
    }
    for (const auto& [id, cfg] : doc["nodes"].items()) parse_node(id, cfg);
    parse_edges();
    check_structure();
    check_references();
  }
};

// ---------------------------------------------------------------------------
// Interpreter

class TurnRunner {
 public:
  TurnRunner(const Workflow& wf, const ConversationState& state, std::string_view input,
             const TurnServices& services)
      : wf_(wf), working_(state), services_(services) {
    scratch_["sys.query"] = std::string(input);
  }

  TurnResult run(const TurnOptions& options) {
    std::string current = wf_.start;
    std::size_t visits = 0;
    for (;;) {
      if (++visits > options.max_node_visits) {
        throw TurnError(current, "node-visit budget of " + std::to_string(options.max_node_visits) +
                                     " exceeded (runaway loop?)");
      }
      trace_.push_back(current);
      const Node& node = wf_.nodes.at(current);
      std::string label = "next";
      switch (node.kind) {
        case NodeKind::start: break;
        case NodeKind::answer: {
          auto output = render(node, node.text);
          try {
            working_.validate();
          } catch (const StateError& e) {
            throw TurnError(node.id, std::string("conversation state invalid at end of turn: ") + e.what());
          }
          return {std::move(output), std::move(working_), std::move(trace_)};
        }
        case NodeKind::assigner:
          for (const auto& asg : node.assignments) assign(node, asg);
          break;
        case NodeKind::function: call_function(node); break;
        case NodeKind::branch: label = branch(node); break;
        case NodeKind::retrieval: {
          const auto query = render(node, node.text);
          scratch_[node.id + ".result"] =
              guarded(node, "retrieval", [&] { return services_.retrieve(query, node.top_k); }, services_.retrieve);
          break;
        }
        case NodeKind::agent_call: {
          const auto prompt = render(node, node.text);
          scratch_[node.id + ".text"] =
              guarded(node, "agent", [&] { return services_.agent(node.role, prompt); }, services_.agent);
          break;
        }
        case NodeKind::tool_call: {
          const auto args = render_json(node, node.tool_args);
          scratch_[node.id + ".result"] =
              guarded(node, "tool", [&] { return services_.call_tool(node.tool, args); }, services_.call_tool);
          break;
        }
      }
      const auto* next = wf_.successor(current, label);
      if (!next) throw TurnError(current, "no outgoing edge labelled '" + label + "'");
      current = *next;
    }
  }

 private:
  template <typename Fn, typename Callback>
  std::string guarded(const Node& node, const char* what, Fn&& fn, const Callback& cb) {
    if (!cb) throw TurnError(node.id, std::string("no ") + what + " service configured");
    try {
      return fn();
    } catch (const TurnError&) {
      throw;
    } catch (const std::exception& e) {
      throw TurnError(node.id, std::string(what) + " callback failed: " + e.what());
    }
  }

  VarValue resolve(const Node& node, const std::string& ref) const {
    if (ref.rfind("conv.", 0) == 0) {
      auto v = working_.get(ref.substr(5));
      if (!v) throw TurnError(node.id, "unknown conversation variable in '" + ref + "'");
      return *v;
    }
    auto it = scratch_.find(ref);
    if (it == scratch_.end()) throw TurnError(node.id, "'" + ref + "' has no value in this turn");
    return it->second;
  }

  std::string render(const Node& node, std::string_view text) const {
    std::string out;
    std::size_t pos = 0;
    for (;;) {
      const auto open = text.find("{{", pos);
      if (open == std::string_view::npos) break;
      const auto close = text.find("}}", open + 2);
      if (close == std::string_view::npos) break;
      out.append(text.substr(pos, open - pos));
      auto inner = text.substr(open + 2, close - open - 2);
      while (!inner.empty() && inner.front() == ' ') inner.remove_prefix(1);
      while (!inner.empty() && inner.back() == ' ') inner.remove_suffix(1);
      out += value_to_text(resolve(node, std::string(inner)));
      pos = close + 2;
    }
    out.append(text.substr(pos));
    return out;
  }

  json render_json(const Node& node, const json& value) const {
    if (value.is_string()) return render(node, value.get<std::string>());
    if (value.is_object()) {
      json out = json::object();
      for (const auto& [k, v] : value.items()) out[k] = render_json(node, v);
      return out;
    }
    if (value.is_array()) {
      json out = json::array();
      for (const auto& v : value) out.push_back(render_json(node, v));
      return out;
    }
    return value;
  }

  void assign(const Node& node, const Assignment& asg) {
    try {
      const auto current = *working_.get(asg.variable);
      switch (asg.op) {
        case Assignment::Op::clear:
          if (std::holds_alternative<std::string>(current)) {
            working_.set(asg.variable, std::string());
          } else if (std::holds_alternative<double>(current)) {
            working_.set(asg.variable, 0.0);
          } else {
            working_.set(asg.variable, std::vector<std::string>{});
          }
          break;
        case Assignment::Op::set:
          working_.set(asg.variable, asg.value ? *asg.value : resolve(node, asg.from));
          break;
        case Assignment::Op::append: {
          auto list = std::get<std::vector<std::string>>(current);
          const auto item = asg.value ? *asg.value : resolve(node, asg.from);
          if (const auto* more = std::get_if<std::vector<std::string>>(&item)) {
            list.insert(list.end(), more->begin(), more->end());
          } else {
            list.push_back(value_to_text(item));
          }
          working_.set(asg.variable, list);
          break;
        }
      }
    } catch (const StateError& e) {
      throw TurnError(node.id, e.what());
    }
  }

  static double parse_number(const Node& node, const std::string& text) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
      throw TurnError(node.id, "'" + text + "' is not a number");
    }
    return value;
  }

  void output(const Node& node, const std::string& key, VarValue value) {
    scratch_[node.id + "." + key] = std::move(value);
  }

  void call_function(const Node& node) {
    const auto& fn = node.function;
    auto arg = [&](const std::string& key) { return render(node, node.args.at(key)); };
    auto publish_stage = [&](const ConversationState& s) {
      output(node, "stage", s.stage);
      output(node, "stage_num", static_cast<double>(s.stage_num));
      output(node, "dirty_bit", static_cast<double>(s.dirty_bit));
    };
    if (fn == "to_next_stage") {
      try {
        publish_stage(to_next_stage(working_));
        output(node, "complete", 0.0);
      } catch (const TerminalStageError&) {
        auto consumed = working_;
        consumed.dirty_bit = 0;
        publish_stage(consumed);
        output(node, "complete", 1.0);
      } catch (const StateError& e) {
        throw TurnError(node.id, e.what());
      }
    } else if (fn == "set_stage") {
      try {
        publish_stage(set_stage(working_, arg("stage")));
      } catch (const StateError& e) {
        throw TurnError(node.id, e.what());
      }
    } else if (fn == "decrement_inspection") {
      const auto step = decrement_inspection(working_);
      output(node, "remaining_inspection_count", static_cast<double>(step.state.remaining_inspection_count));
      output(node, "at_budget", step.at_budget ? 1.0 : 0.0);
    } else if (fn == "reset_inspection") {
      output(node, "remaining_inspection_count",
             static_cast<double>(reset_inspection(working_).remaining_inspection_count));
    } else if (fn == "template") {
      output(node, "output", arg("template"));
    } else if (fn == "add") {
      output(node, "output", parse_number(node, arg("a")) + parse_number(node, arg("b")));
    } else if (fn == "equals") {
      output(node, "output", arg("a") == arg("b") ? 1.0 : 0.0);
    } else if (fn == "contains") {
      output(node, "output", arg("haystack").find(arg("needle")) != std::string::npos ? 1.0 : 0.0);
    } else {
      throw TurnError(node.id, "unknown function '" + fn + "'");
    }
  }

  std::string branch(const Node& node) {
    const auto value = value_to_text(resolve(node, node.on));
    if (node.match_stage &&
        std::find(working_.stages.begin(), working_.stages.end(), value) == working_.stages.end()) {
      throw TurnError(node.id, "branch value '" + value + "' is not one of the declared stages");
    }
    if (std::find(node.cases.begin(), node.cases.end(), value) != node.cases.end()) return value;
    return "default";
  }

  const Workflow& wf_;
  ConversationState working_;
  const TurnServices& services_;
  std::map<std::string, VarValue> scratch_;
  std::vector<std::string> trace_;
};

std::string join(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += (out.empty() ? "" : "\n") + l;
  return out;
}

}  // namespace

std::string_view to_string(NodeKind kind) {
  for (const auto& [name, k] : kKinds) {
    if (k == kind) return name;
  }
  return "answer";
}

std::optional<NodeKind> parse_node_kind(std::string_view text) {
  for (const auto& [name, k] : kKinds) {
    if (name == text) return k;
  }
  return std::nullopt;
}

const std::map<std::string, std::vector<std::string>>& function_catalog() {
  static const std::map<std::string, std::vector<std::string>> outputs{
      {"to_next_stage", {"stage", "stage_num", "dirty_bit", "complete"}},
      {"set_stage", {"stage", "stage_num", "dirty_bit"}},
      {"decrement_inspection", {"remaining_inspection_count", "at_budget"}},
      {"reset_inspection", {"remaining_inspection_count"}},
      {"template", {"output"}},
      {"add", {"output"}},
      {"equals", {"output"}},
      {"contains", {"output"}},
  };
  return outputs;
}

const std::string* Workflow::successor(const std::string& node, const std::string& label) const {
  auto it = edges.find({node, label});
  return it == edges.end() ? nullptr : &it->second;
}

WorkflowError::WorkflowError(std::vector<std::string> diagnostics)
    : std::runtime_error("invalid workflow:\n" + join(diagnostics)), diagnostics_(std::move(diagnostics)) {}

std::vector<std::string> validate_workflow(const json& document) {
  Loader loader{document, {}, {}};
  loader.run();
  return std::move(loader.diags);
}

Workflow load_workflow(const json& document) {
  Loader loader{document, {}, {}};
  loader.run();
  if (!loader.diags.empty()) throw WorkflowError(std::move(loader.diags));
  return std::move(loader.wf);
}

std::filesystem::path resolve_workflow_path(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  if (fs::is_regular_file(path)) return path;
  auto with_ext = path;
  with_ext += ".json";
  if (fs::is_regular_file(with_ext)) return with_ext;
  if (fs::is_regular_file(path / "workflow.json")) return path / "workflow.json";
  throw std::runtime_error("workflow not found: " + path.string());
}

Workflow load_workflow_file(const std::filesystem::path& path) {
  std::ifstream in(resolve_workflow_path(path));
  return load_workflow(json::parse(in));
}

TurnResult run_turn(const Workflow& workflow, const ConversationState& state, std::string_view user_input,
                    const TurnServices& services, const TurnOptions& options) {
  try {
    state.validate();
  } catch (const StateError& e) {
    throw TurnError(workflow.start, std::string("invalid conversation state: ") + e.what());
  }
  return TurnRunner(workflow, state, user_input, services).run(options);
}

}  // namespace threedify::chatflow
