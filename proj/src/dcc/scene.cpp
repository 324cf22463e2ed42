#include "threedify/dcc/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace threedify::dcc {

namespace {

struct PseudoParam {
  std::string_view name;
  int group;  // 0 location, 1 rotation, 2 scale, 3 emission strength, 4 emission color
  int axis;
};

constexpr std::array<PseudoParam, 11> kPseudo{{
    {"loc_x", 0, 0}, {"loc_y", 0, 1}, {"loc_z", 0, 2},
    {"rot_x", 1, 0}, {"rot_y", 1, 1}, {"rot_z", 1, 2},
    {"scale_x", 2, 0}, {"scale_y", 2, 1}, {"scale_z", 2, 2},
    {"emission_strength", 3, 0}, {"emission_color", 4, 0},
}};

const PseudoParam* find_pseudo(std::string_view name) {
  for (const auto& p : kPseudo) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::string value_text(const ParamValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return format_number(*d);
  return json(std::get<std::string>(v)).dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string vec_text(const Vec3& v) {
  return "(" + format_number(v[0]) + ", " + format_number(v[1]) + ", " + format_number(v[2]) + ")";
}

double numeric_or(const SceneObject& obj, const std::string& key, double fallback) {
  auto it = obj.params.find(key);
  if (it == obj.params.end()) return fallback;
  if (const auto* d = std::get_if<double>(&it->second)) return *d;
  return fallback;
}

// Throws SceneError naming `binding` for anything that makes it unevaluable.
double evaluate_binding(const Scene& scene, const Binding& binding) {
  try {
    return binding.expression.evaluate([&](const ParamRef& ref) {
      auto value = scene.get_param(ref);
      if (!value) throw SceneError("unknown reference " + ref.str());
      const auto* d = std::get_if<double>(&*value);
      if (!d) throw SceneError("reference " + ref.str() + " is not numeric");
      return *d;
    });
  } catch (const EvalError& e) {
    throw SceneError("binding " + binding.target.str() + ": " + e.what());
  } catch (const SceneError& e) {
    throw SceneError("binding " + binding.target.str() + ": " + e.what());
  }
}

}  // namespace

bool is_pseudo_param(std::string_view param) { return find_pseudo(param) != nullptr; }

const SceneObject* Scene::find(std::string_view name) const {
  auto it = objects_.find(std::string(name));
  return it == objects_.end() ? nullptr : &it->second;
}

std::optional<ParamValue> Scene::get_param(const ParamRef& ref) const {
  const auto* obj = find(ref.object);
  if (!obj) return std::nullopt;
  if (const auto* p = find_pseudo(ref.param)) {
    const auto axis = static_cast<std::size_t>(p->axis);
    switch (p->group) {
      case 0: return obj->transform.location[axis];
      case 1: return obj->transform.rotation[axis];
      case 2: return obj->transform.scale[axis];
      case 3: return obj->emissive ? obj->emissive->strength : 0.0;
      default: return obj->emissive ? obj->emissive->color : std::string("#ffffff");
    }
  }
  auto it = obj->params.find(ref.param);
  if (it == obj->params.end()) return std::nullopt;
  return it->second;
}

void Scene::add_object(SceneObject object) {
  if (!is_valid_object_name(object.name)) throw SceneError("invalid object name '" + object.name + "'");
  if (objects_.count(object.name)) throw SceneError("object '" + object.name + "' already exists");
  auto name = object.name;
  // Route pseudo-params given as plain params through set_param validation.
  std::map<std::string, ParamValue> params;
  params.swap(object.params);
  objects_.emplace(name, std::move(object));
  for (const auto& [key, value] : params) set_param({name, key}, value);
}

void Scene::set_param(const ParamRef& ref, const ParamValue& value) {
  auto it = objects_.find(ref.object);
  if (it == objects_.end()) throw SceneError("unknown object '" + ref.object + "'");
  auto& obj = it->second;
  const auto* p = find_pseudo(ref.param);
  if (!p) {
    obj.params[ref.param] = value;
    return;
  }
  if (p->group == 4) {
    const auto* s = std::get_if<std::string>(&value);
    if (!s) throw SceneError(ref.str() + " expects a color string");
    if (!obj.emissive) obj.emissive = Emission{};
    obj.emissive->color = *s;
    return;
  }
  const auto* d = std::get_if<double>(&value);
  if (!d) throw SceneError(ref.str() + " expects a number");
  const auto axis = static_cast<std::size_t>(p->axis);
  switch (p->group) {
    case 0: obj.transform.location[axis] = *d; break;
    case 1: obj.transform.rotation[axis] = *d; break;
    case 2:
      if (!(*d > 0.0)) throw SceneError(ref.str() + " must be > 0");
      obj.transform.scale[axis] = *d;
      break;
    default:
      if (!obj.emissive) obj.emissive = Emission{};
      obj.emissive->strength = *d;
      break;
  }
}

void Scene::remove_object(const std::string& name) {
  if (!objects_.count(name)) throw SceneError("unknown object '" + name + "'");
  for (const auto& [target, binding] : bindings_) {
    if (binding.target.object == name) continue;
    for (const auto& ref : binding.expression.references()) {
      if (ref.object == name) {
        throw SceneError("cannot delete '" + name + "': referenced by binding " + target);
      }
    }
  }
  std::erase_if(bindings_, [&](const auto& entry) { return entry.second.target.object == name; });
  objects_.erase(name);
}

void Scene::put_binding(Binding binding) {
  const auto key = binding.target.str();
  bindings_.insert_or_assign(key, std::move(binding));
}

std::vector<const Binding*> Scene::evaluation_order() const {
  // Edge u -> v when v's expression reads u's target.
  std::map<std::string, std::set<std::string>> dependents;
  std::map<std::string, std::size_t> indegree;
  for (const auto& [key, binding] : bindings_) indegree.emplace(key, 0);
  for (const auto& [key, binding] : bindings_) {
    std::set<std::string> deps;
    for (const auto& ref : binding.expression.references()) {
      const auto dep = ref.str();
      if (bindings_.count(dep)) deps.insert(dep);
    }
    for (const auto& dep : deps) {
      dependents[dep].insert(key);
      ++indegree[key];
    }
  }
  std::set<std::string> ready;
  for (const auto& [key, deg] : indegree) {
    if (deg == 0) ready.insert(key);
  }
  std::vector<const Binding*> order;
  order.reserve(bindings_.size());
  while (!ready.empty()) {
    const auto key = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(&bindings_.at(key));
    for (const auto& dependent : dependents[key]) {
      if (--indegree[dependent] == 0) ready.insert(dependent);
    }
  }
  if (order.size() != bindings_.size()) throw SceneError("binding graph contains a cycle");
  return order;
}

bool Scene::has_cycle() const {
  try {
    (void)evaluation_order();
    return false;
  } catch (const SceneError&) {
    return true;
  }
}

Scene evaluate_graph(const Scene& scene) {
  Scene out = scene;
  for (const Binding* binding : scene.evaluation_order()) {
    const double value = evaluate_binding(out, *binding);
    try {
      out.set_param(binding->target, value);
    } catch (const SceneError& e) {
      throw SceneError("binding " + binding->target.str() + ": " + e.what());
    }
  }
  return out;
}

std::string query_object(const Scene& scene, std::string_view name) {
  const auto* obj = scene.find(name);
  if (!obj) throw SceneError("unknown object '" + std::string(name) + "'");
  std::ostringstream os;
  os << obj->name << " (" << to_string(obj->kind) << ") loc=" << vec_text(obj->transform.location)
     << " rot=" << vec_text(obj->transform.rotation) << " scale=" << vec_text(obj->transform.scale);
  os << " params={";
  bool first = true;
  for (const auto& [key, value] : obj->params) {
    if (!first) os << ", ";
    first = false;
    os << key << ": " << value_text(value);
    auto b = scene.bindings().find(obj->name + "." + key);
    if (b != scene.bindings().end()) os << " <- " << b->second.expression.to_string();
  }
  os << "}";
  if (obj->emissive) {
    os << " emissive=" << obj->emissive->color << "@" << format_number(obj->emissive->strength);
  }
  return os.str();
}

CommandOutcome apply_command(const Scene& scene, const Command& cmd) {
  return std::visit(
      [&](const auto& c) -> CommandOutcome {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, AddCommand>) {
          Scene next = scene;
          next.add_object(SceneObject{c.name, c.kind, {}, c.params, std::nullopt});
          next = evaluate_graph(next);
          return {std::move(next), "added " + std::string(to_string(c.kind)) + " '" + c.name + "'"};
        } else if constexpr (std::is_same_v<T, SetCommand>) {
          const auto key = c.target.str();
          if (scene.bindings().count(key)) {
            throw SceneError(key + " is bound to " + scene.bindings().at(key).expression.to_string() +
                             "; link it again to change the binding");
          }
          Scene next = scene;
          next.set_param(c.target, c.value);
          next = evaluate_graph(next);
          std::string text = "set " + key + " = " + value_text(*next.get_param(c.target));
          return {std::move(next), std::move(text)};
        } else if constexpr (std::is_same_v<T, LinkCommand>) {
          if (!scene.find(c.target.object)) throw SceneError("unknown object '" + c.target.object + "'");
          for (const auto& ref : c.expression.references()) {
            if (!scene.get_param(ref)) throw SceneError("unknown reference " + ref.str());
          }
          const auto current = scene.get_param(c.target);
          if (current && !std::holds_alternative<double>(*current)) {
            throw SceneError(c.target.str() + " is not numeric and cannot be linked");
          }
          Scene next = scene;
          next.put_binding(Binding{c.target, c.expression});
          if (next.has_cycle()) {
            throw SceneError("link " + c.target.str() + " = " + c.expression.to_string() +
                             " would create a dependency cycle");
          }
          next = evaluate_graph(next);
          std::string text = "linked " + c.target.str() + " = " + c.expression.to_string() +
                             " (value " + value_text(*next.get_param(c.target)) + ")";
          return {std::move(next), std::move(text)};
        } else if constexpr (std::is_same_v<T, DeleteCommand>) {
          Scene next = scene;
          next.remove_object(c.name);
          next = evaluate_graph(next);
          return {std::move(next), "deleted '" + c.name + "'"};
        } else if constexpr (std::is_same_v<T, QueryCommand>) {
          return {scene, query_object(scene, c.name)};
        } else if constexpr (std::is_same_v<T, SnapshotCommand>) {
          return {scene, snapshot(scene)};
        } else {
          return {scene, render_summary(scene)};
        }
      },
      cmd);
}

CommandOutcome run_script(const Scene& scene, std::string_view script) {
  Scene current = scene;
  std::string text;
  std::size_t line_no = 0;
  std::size_t start = 0;
  bool any = false;
  while (start <= script.size()) {
    auto end = script.find('\n', start);
    if (end == std::string_view::npos) end = script.size();
    const auto line = script.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    auto parsed = parse_command(line);
    if (const auto* diag = std::get_if<Diagnostic>(&parsed)) {
      throw SceneError("line " + std::to_string(line_no) + ", " + diag->str());
    }
    auto outcome = apply_command(current, std::get<Command>(parsed));
    current = std::move(outcome.scene);
    if (any) text.push_back('\n');
    text += outcome.text;
    any = true;
  }
  if (!any) throw SceneError("empty command");
  return {std::move(current), std::move(text)};
}

json snapshot_json(const Scene& scene) {
  json objects = json::array();
  for (const auto& [name, obj] : scene.objects()) {
    json params = json::object();
    for (const auto& [key, value] : obj.params) {
      if (const auto* d = std::get_if<double>(&value)) {
        params[key] = *d;
      } else {
        params[key] = std::get<std::string>(value);
      }
    }
    json entry = {
        {"name", obj.name},
        {"kind", std::string(to_string(obj.kind))},
        {"location", obj.transform.location},
        {"rotation", obj.transform.rotation},
        {"scale", obj.transform.scale},
        {"params", std::move(params)},
    };
    if (obj.emissive) {
      entry["emissive"] = {{"color", obj.emissive->color}, {"strength", obj.emissive->strength}};
    }
    objects.push_back(std::move(entry));
  }
  json bindings = json::array();
  for (const auto& [target, binding] : scene.bindings()) {
    bindings.push_back({{"target", target}, {"expression", binding.expression.to_string()}});
  }
  return {{"schema", "scene/1"}, {"objects", std::move(objects)}, {"bindings", std::move(bindings)}};
}

std::string snapshot(const Scene& scene) { return canonical_dump(snapshot_json(scene)); }

std::string render_summary(const Scene& scene) {
  std::map<std::string, int> by_kind;
  int emissive = 0;
  double lo[3] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                  std::numeric_limits<double>::infinity()};
  double hi[3] = {-lo[0], -lo[1], -lo[2]};
  for (const auto& [name, obj] : scene.objects()) {
    ++by_kind[std::string(to_string(obj.kind))];
    if (obj.emissive && obj.emissive->strength > 0.0) ++emissive;
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], obj.transform.location[static_cast<std::size_t>(a)]);
      hi[a] = std::max(hi[a], obj.transform.location[static_cast<std::size_t>(a)]);
    }
  }
  std::ostringstream os;
  os << scene.objects().size() << " objects";
  if (!by_kind.empty()) {
    os << " (";
    bool first = true;
    for (const auto& [kind, count] : by_kind) {
      if (!first) os << ", ";
      first = false;
      os << kind << " " << count;
    }
    os << ")";
  }
  os << ", " << scene.bindings().size() << " bindings, " << emissive << " emissive";
  if (!scene.objects().empty()) {
    static constexpr char axes[] = "xyz";
    os << ", origins";
    for (int a = 0; a < 3; ++a) {
      os << " " << axes[a] << "[" << format_number(lo[a]) << ", " << format_number(hi[a]) << "]";
    }
  }
  return os.str();
}

std::string render_thumbnail(const Scene& scene) {
  constexpr double kSize = 512.0;
  constexpr double kMargin = 24.0;
  static constexpr std::array<const char*, 8> kPalette{
      "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#9c755f"};

  struct Rect {
    const SceneObject* obj;
    double x0, x1, z0, z1;
  };
  std::vector<Rect> rects;
  double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
  double min_z = min_x, max_z = -min_x;
  for (const auto& [name, obj] : scene.objects()) {
    const double w = numeric_or(obj, "width", 1.0) * obj.transform.scale[0];
    const double h = numeric_or(obj, "height", 1.0) * obj.transform.scale[2];
    const double cx = obj.transform.location[0];
    const double cz = obj.transform.location[2];
    Rect r{&obj, cx - std::fabs(w) / 2, cx + std::fabs(w) / 2, cz - std::fabs(h) / 2, cz + std::fabs(h) / 2};
    min_x = std::min(min_x, r.x0);
    max_x = std::max(max_x, r.x1);
    min_z = std::min(min_z, r.z0);
    max_z = std::max(max_z, r.z1);
    rects.push_back(r);
  }

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"512\" height=\"512\" viewBox=\"0 0 512 512\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"512\" height=\"512\" fill=\"#f7f7f7\"/>\n";
  if (!rects.empty()) {
    const double span = std::max({max_x - min_x, max_z - min_z, 1e-9});
    const double k = (kSize - 2 * kMargin) / span;
    // Center the content in both axes.
    const double off_x = kMargin + ((kSize - 2 * kMargin) - (max_x - min_x) * k) / 2;
    const double off_y = kMargin + ((kSize - 2 * kMargin) - (max_z - min_z) * k) / 2;
    for (const auto& r : rects) {
      const double x = off_x + (r.x0 - min_x) * k;
      const double y = off_y + (max_z - r.z1) * k;  // +Z is up in the image
      const double w = (r.x1 - r.x0) * k;
      const double h = (r.z1 - r.z0) * k;
      std::string fill = kPalette[fnv1a_64(r.obj->name) % kPalette.size()];
      auto color = r.obj->params.find("color");
      if (color != r.obj->params.end()) {
        if (const auto* s = std::get_if<std::string>(&color->second)) {
          if (!s->empty() && std::all_of(s->begin(), s->end(), [](char c) {
                return std::isalnum(static_cast<unsigned char>(c)) || c == '#';
              })) {
            fill = *s;
          }
        }
      }
      std::string stroke = "#333333";
      if (r.obj->emissive && r.obj->emissive->strength > 0.0) stroke = "#ffd400";
      os << "<rect x=\"" << format_number(x) << "\" y=\"" << format_number(y) << "\" width=\""
         << format_number(w) << "\" height=\"" << format_number(h) << "\" fill=\"" << fill
         << "\" fill-opacity=\"0.5\" stroke=\"" << stroke << "\"";
      if (r.obj->kind == ObjectKind::light || r.obj->kind == ObjectKind::group) {
        os << " stroke-dasharray=\"4 2\"";
      }
      os << "/>\n";
      os << "<text x=\"" << format_number(x + w / 2) << "\" y=\"" << format_number(y + h / 2)
         << "\" font-size=\"10\" text-anchor=\"middle\">" << r.obj->name << "</text>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace threedify::dcc
