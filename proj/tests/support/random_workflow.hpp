#pragma once

// Random structurally valid workflow documents. Nodes form a forward chain
// with extra branch edges; some branch edges point backwards, so a few
// programs loop until the visit budget trips.

#include <random>
#include <string>
#include <vector>

#include "threedify/common/canonical.hpp"

namespace testgen {

using threedify::json;

inline const std::vector<std::string>& table_stages() {
  static const std::vector<std::string> s{"Scene Analyzer", "RAG", "Conceptualization", "Builder", "Inspector"};
  return s;
}

class WorkflowGen {
 public:
  explicit WorkflowGen(std::uint64_t seed) : rng_(seed) {}

  json state() {
    const auto len = pick(1, 5);
    json stages = json::array();
    for (int i = 0; i < len; ++i) stages.push_back(table_stages()[i]);
    const auto num = pick(0, len - 1);
    const auto max = pick(0, 4);
    return {{"stages", stages},
            {"stage_num", num},
            {"stage", stages[num]},
            {"dirty_bit", pick(0, 1)},
            {"enable_increment", pick(0, 1)},
            {"max_inspection_count", max},
            {"remaining_inspection_count", pick(0, max)},
            {"s0", word()},
            {"s1", word()},
            {"n0", pick(0, 3)},
            {"n1", 2.5},
            {"l0", json::array({word()})}};
  }

  json document() {
    const int chain = pick(2, 10);
    const int answers = pick(1, 3);
    vars_ = state();
    ids_.clear();
    outputs_.clear();
    for (int i = 0; i < chain; ++i) ids_.push_back(i == 0 ? "start" : "n" + std::to_string(i));
    for (int i = 0; i < answers; ++i) ids_.push_back("a" + std::to_string(i));

    std::vector<json> nodes(chain);
    nodes[0] = {{"kind", "start"}};
    static const std::vector<std::string> kinds{"assigner", "assigner", "function", "function", "branch",
                                                "branch",   "retrieval", "agent_call", "tool_call"};
    std::vector<std::string> kind_of(chain, "start");
    for (int i = 1; i < chain; ++i) {
      kind_of[i] = kinds[pick(0, static_cast<int>(kinds.size()) - 1)];
      if (kind_of[i] == "function") {
        static const std::vector<std::string> fns{"to_next_stage", "set_stage", "decrement_inspection",
                                                  "reset_inspection", "template", "add", "equals", "contains"};
        function_of_[ids_[i]] = fns[pick(0, static_cast<int>(fns.size()) - 1)];
      }
    }
    // Mostly earlier outputs, so most references resolve at run time.
    for (int i = 1; i < chain; ++i) {
      nodes[i] = make_node(ids_[i], kind_of[i]);
      register_outputs(ids_[i], kind_of[i]);
    }

    json doc{{"name", "random"}, {"start", "start"}, {"conversation_variables", vars_}, {"nodes", json::object()},
             {"edges", json::array()}};
    for (int i = 0; i < chain; ++i) doc["nodes"][ids_[i]] = nodes[i];
    for (int i = 0; i < answers; ++i) doc["nodes"]["a" + std::to_string(i)] = {{"kind", "answer"}, {"text", tmpl()}};

    for (int i = 0; i < chain; ++i) {
      const auto forward = i + 1 < chain ? ids_[i + 1] : std::string("a0");
      if (kind_of[i] == "branch") {
        doc["edges"].push_back({{"from", ids_[i]}, {"to", forward}, {"label", "default"}});
        for (const auto& c : nodes[i]["cases"]) {
          std::string to;
          if (pick(0, 5) == 0) {
            to = ids_[pick(1, i)];  // back edge
          } else {
            to = ids_[pick(i + 1, static_cast<int>(ids_.size()) - 1)];
          }
          doc["edges"].push_back({{"from", ids_[i]}, {"to", to}, {"label", c}});
        }
      } else {
        doc["edges"].push_back({{"from", ids_[i]}, {"to", forward}});
      }
    }
    // Answers beyond a0 need an incoming edge to be reachable.
    for (int i = 1; i < answers; ++i) {
      bool reached = false;
      for (const auto& e : doc["edges"]) reached = reached || e["to"] == "a" + std::to_string(i);
      if (!reached) doc["nodes"].erase("a" + std::to_string(i));
    }
    return doc;
  }

  std::string input() { return word(); }

 private:
  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  std::string word() {
    static const std::vector<std::string> words{"", "a", "b c", "1", "2.5", "0", "Builder", "RAG", "PASS", "Inspector",
                                                "x{y}"};
    return words[pick(0, static_cast<int>(words.size()) - 1)];
  }

  void register_outputs(const std::string& id, const std::string& kind) {
    if (kind == "retrieval" || kind == "tool_call") outputs_.push_back(id + ".result");
    if (kind == "agent_call") outputs_.push_back(id + ".text");
    if (kind == "function") {
      const auto& fn = function_of_[id];
      if (fn == "to_next_stage" || fn == "set_stage") {
        for (const char* k : {"stage", "stage_num", "dirty_bit"}) outputs_.push_back(id + "." + k);
        if (fn == "to_next_stage") outputs_.push_back(id + ".complete");
      } else if (fn == "decrement_inspection") {
        outputs_.push_back(id + ".remaining_inspection_count");
        outputs_.push_back(id + ".at_budget");
      } else if (fn == "reset_inspection") {
        outputs_.push_back(id + ".remaining_inspection_count");
      } else {
        outputs_.push_back(id + ".output");
      }
    }
  }

  std::string ref() {
    const int r = pick(0, 9);
    if (r == 0) return "sys.query";
    if (r <= 4 || outputs_.empty()) {
      auto names = var_names();
      return "conv." + names[pick(0, static_cast<int>(names.size()) - 1)];
    }
    return outputs_[pick(0, static_cast<int>(outputs_.size()) - 1)];
  }

  std::vector<std::string> var_names() const {
    std::vector<std::string> names;
    for (const auto& [k, v] : vars_.items()) names.push_back(k);
    return names;
  }

  std::string tmpl() {
    std::string t;
    for (int i = pick(0, 3); i > 0; --i) {
      t += pick(0, 1) ? word() : "{{" + std::string(pick(0, 3) == 0 ? " " : "") + ref() + "}}";
      t += ' ';
    }
    return t;
  }

  json literal_for(const json& current, const std::string& name) {
    if (current.is_string()) {
      if (name == "stage") return table_stages()[pick(0, 4)];
      return word();
    }
    if (current.is_array()) {
      json a = json::array();
      for (int i = pick(0, 2); i > 0; --i) a.push_back(name == "stages" ? table_stages()[pick(0, 4)] : word());
      return a;
    }
    if (name == "dirty_bit" || name == "enable_increment") return pick(0, 1);
    if (name == "stage_num" || name.find("inspection") != std::string::npos) return pick(0, 5);
    static const std::vector<double> numbers{0, 1, -1, 2.5, 7};
    return numbers[pick(0, static_cast<int>(numbers.size()) - 1)];
  }

  json make_node(const std::string& id, const std::string& kind) {
    json node{{"kind", kind}};
    if (kind == "assigner") {
      json list = json::array();
      const auto names = var_names();
      for (int i = pick(1, 3); i > 0; --i) {
        const auto name = names[pick(0, static_cast<int>(names.size()) - 1)];
        const auto& current = vars_[name];
        const int op = pick(0, 5);
        if (op == 0) {
          list.push_back({{"variable", name}, {"op", "clear"}});
        } else if (op == 1 && current.is_array()) {
          if (pick(0, 1)) {
            list.push_back({{"variable", name}, {"op", "append"}, {"from", ref()}});
          } else {
            list.push_back({{"variable", name}, {"op", "append"}, {"value", word()}});
          }
        } else if (op <= 3) {
          list.push_back({{"variable", name}, {"value", literal_for(current, name)}});
        } else {
          list.push_back({{"variable", name}, {"from", ref()}});
        }
      }
      node["assignments"] = list;
    } else if (kind == "function") {
      const auto& fn = function_of_[id];
      node["function"] = fn;
      json args = json::object();
      if (fn == "set_stage") {
        args["stage"] = pick(0, 2) ? table_stages()[pick(0, 4)] : "{{" + ref() + "}}";
      } else if (fn == "template") {
        args["template"] = tmpl();
      } else if (fn == "add" || fn == "equals") {
        args["a"] = pick(0, 1) ? "{{" + ref() + "}}" : std::to_string(pick(0, 3));
        args["b"] = pick(0, 1) ? "{{" + ref() + "}}" : word();
      } else if (fn == "contains") {
        args["haystack"] = tmpl();
        args["needle"] = word();
      }
      if (!args.empty()) node["args"] = args;
    } else if (kind == "branch") {
      node["on"] = ref();
      if (node["on"] == "conv.stage" && pick(0, 1)) node["match"] = "stage";
      json cases = json::array();
      std::vector<std::string> pool{"0", "1", "a", "Builder", "RAG", "2.5", "Scene Analyzer"};
      std::shuffle(pool.begin(), pool.end(), rng_);
      for (int i = pick(1, 3); i > 0; --i) cases.push_back(pool[i]);
      node["cases"] = cases;
    } else if (kind == "retrieval") {
      node["query"] = tmpl();
      if (pick(0, 1)) node["top_k"] = pick(1, 5);
    } else if (kind == "agent_call") {
      node["role"] = pick(0, 1) ? "planner" : "inspector";
      node["prompt"] = tmpl();
    } else if (kind == "tool_call") {
      node["tool"] = "run_cmd_on_default_console";
      node["args"] = {{"cmd", tmpl()}, {"n", 1}};
    }
    return node;
  }

  std::mt19937_64 rng_;
  json vars_;
  std::vector<std::string> ids_;
  std::vector<std::string> outputs_;
  std::map<std::string, std::string> function_of_;
};

}  // namespace testgen
