#include "threedify/agents/provider.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace threedify::agents {

namespace {

bool name_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool name_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::string param_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return format_number(v.get<double>());
  return canonical_dump(v);
}

json fill_tree(const json& node, const json& params) {
  if (node.is_string()) return fill_placeholders(node.get<std::string>(), params);
  if (node.is_structured()) {
    json out = node;
    for (auto it = out.begin(); it != out.end(); ++it) *it = fill_tree(*it, params);
    return out;
  }
  return node;
}

json generate_value(const json& spec, std::uint64_t h) {
  if (spec.contains("choices")) {
    const auto& choices = spec.at("choices");
    if (!choices.is_array() || choices.empty()) throw ProviderError("generator choices must be a non-empty array");
    return choices[h % choices.size()];
  }
  const double lo = spec.at("min").get<double>();
  const double hi = spec.at("max").get<double>();
  const double step = spec.value("step", 1.0);
  if (!(step > 0) || hi < lo) throw ProviderError("generator range needs min <= max and step > 0");
  const auto count = static_cast<std::uint64_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  const double v = lo + static_cast<double>(h % count) * step;
  return std::round(v * 1e6) / 1e6;
}

std::vector<CandidateProposal> generate(const json& gen, const Context& context, const std::string& seed) {
  if (!context.meta.contains("count") || !context.meta["count"].is_number_integer()) {
    throw ProviderError("generate_candidates needs meta.count");
  }
  const auto count = context.meta["count"].get<std::int64_t>();
  const auto& params = gen.at("params");
  std::set<std::string> seen;
  if (context.meta.contains("avoid")) {
    for (const auto& a : context.meta["avoid"]) seen.insert(canonical_dump(a));
  }
  std::vector<CandidateProposal> out;
  for (std::int64_t slot = 0; slot < count; ++slot) {
    json chosen;
    for (int attempt = 0; attempt < 64; ++attempt) {
      chosen = json::object();
      const auto base = seed + ":" + std::to_string(slot) + ":" + std::to_string(attempt);
      for (const auto& [name, spec] : params.items()) chosen[name] = generate_value(spec, fnv1a_64(base + ":" + name));
      if (!seen.count(canonical_dump(chosen))) break;
    }
    seen.insert(canonical_dump(chosen));
    out.push_back({chosen, fill_placeholders(gen.value("descriptor", std::string("candidate")), chosen)});
  }
  return out;
}

bool meta_matches(const json& want, const json& meta) {
  for (const auto& [k, v] : want.items()) {
    if (!meta.contains(k) || meta[k] != v) return false;
  }
  return true;
}

}  // namespace

std::string Context::hash(const std::string& role) const {
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back(json::array({m.from, m.content}));
  return hex64(fnv1a_64(canonical_dump({{"role", role}, {"messages", msgs}, {"meta", meta}})));
}

std::string Context::text() const {
  std::string out;
  for (const auto& m : messages) out += m.from + ": " + m.content + "\n";
  return out;
}

ProviderReply ProviderReply::make_text(std::string text) {
  ProviderReply r;
  r.text = std::move(text);
  return r;
}

std::string fill_placeholders(std::string_view text, const json& params) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{' && i + 1 < text.size() && name_start(text[i + 1])) {
      std::size_t j = i + 1;
      while (j < text.size() && name_char(text[j])) ++j;
      if (j < text.size() && text[j] == '}') {
        const std::string name(text.substr(i + 1, j - i - 1));
        if (params.is_object() && params.contains(name)) {
          out += param_text(params[name]);
          i = j + 1;
          continue;
        }
      }
    }
    out += text[i++];
  }
  return out;
}

ScriptedProvider::ScriptedProvider(json fixture) : fixture_(std::move(fixture)) {
  if (!fixture_.is_object() || !fixture_.contains("rules") || !fixture_["rules"].is_array()) {
    throw ProviderError("provider fixture needs a 'rules' array");
  }
  for (std::size_t i = 0; i < fixture_["rules"].size(); ++i) {
    const auto& rule = fixture_["rules"][i];
    if (!rule.is_object() || !rule.contains("role") || !rule["role"].is_string() || !rule.contains("reply") ||
        !rule["reply"].is_object()) {
      throw ProviderError("fixture rule " + std::to_string(i) + " needs a string 'role' and a 'reply' object");
    }
  }
}

std::shared_ptr<ScriptedProvider> ScriptedProvider::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ProviderError("cannot read provider fixture " + path.string());
  try {
    return std::make_shared<ScriptedProvider>(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ProviderError("provider fixture " + path.string() + ": " + e.what());
  }
}

ProviderReply ScriptedProvider::complete(const std::string& role, const Context& context) {
  const auto hash = context.hash(role);
  {
    std::lock_guard lock(mu_);
    calls_.emplace_back(role, hash);
  }
  const auto text = context.text();
  for (const auto& rule : fixture_["rules"]) {
    if (rule["role"] != role && rule["role"] != "*") continue;
    if (rule.contains("match") && !meta_matches(rule["match"], context.meta)) continue;
    if (rule.contains("contains") && text.find(rule["contains"].get<std::string>()) == std::string::npos) continue;
    if (rule.contains("context_hash") && rule["context_hash"] != hash) continue;

    const auto& reply = rule["reply"];
    ProviderReply out;
    try {
      if (reply.contains("text")) {
        out.text = reply["text"].get<std::string>();
      } else if (reply.contains("tool_call")) {
        out.kind = ProviderReply::Kind::tool_call;
        out.tool_call = {reply["tool_call"].at("tool").get<std::string>(),
                         reply["tool_call"].value("args", json::object())};
      } else if (reply.contains("candidates")) {
        out.kind = ProviderReply::Kind::candidates;
        for (const auto& c : reply["candidates"]) {
          out.candidates.push_back({c.at("params"), c.value("descriptor", std::string())});
        }
      } else if (reply.contains("generate_candidates")) {
        out.kind = ProviderReply::Kind::candidates;
        out.candidates = generate(reply["generate_candidates"], context, hash);
      } else if (reply.contains("plan_template")) {
        out.text = fill_tree(reply["plan_template"], context.meta.value("params", json::object())).dump();
      } else if (reply.contains("error")) {
        throw ProviderError(reply["error"].get<std::string>());
      } else {
        throw ProviderError("fixture reply has no known kind");
      }
    } catch (const json::exception& e) {
      throw ProviderError(std::string("malformed fixture reply: ") + e.what());
    }
    return out;
  }
  throw ProviderError("no scripted reply for role '" + role + "' (context " + hash + ")");
}

std::vector<std::pair<std::string, std::string>> ScriptedProvider::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

}  // namespace threedify::agents
