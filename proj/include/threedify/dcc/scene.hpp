#pragma once

#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "threedify/common/canonical.hpp"
#include "threedify/dcc/command.hpp"

namespace threedify::dcc {

using Vec3 = std::array<double, 3>;

struct Transform {
  Vec3 location{0.0, 0.0, 0.0};
  Vec3 rotation{0.0, 0.0, 0.0};  // degrees
  Vec3 scale{1.0, 1.0, 1.0};

  friend bool operator==(const Transform&, const Transform&) = default;
};

struct Emission {
  std::string color = "#ffffff";
  double strength = 0.0;

  friend bool operator==(const Emission&, const Emission&) = default;
};

/// Transform and emission components are addressable as pseudo-params:
/// loc_x..loc_z, rot_x..rot_z, scale_x..scale_z, emission_strength,
/// emission_color. Everything else lives in `params`.
struct SceneObject {
  std::string name;
  ObjectKind kind = ObjectKind::custom;
  Transform transform;
  std::map<std::string, ParamValue> params;
  std::optional<Emission> emissive;

  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

struct Binding {
  ParamRef target;
  Expression expression;
};

class SceneError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Scene {
 public:
  const std::map<std::string, SceneObject>& objects() const { return objects_; }
  /// Keyed by the target's dotted form; at most one binding per target.
  const std::map<std::string, Binding>& bindings() const { return bindings_; }

  const SceneObject* find(std::string_view name) const;

  std::optional<ParamValue> get_param(const ParamRef& ref) const;

  /// Low-level mutators used by apply_command. They validate the single
  /// mutation but do not re-evaluate bindings.
  void add_object(SceneObject object);
  void set_param(const ParamRef& ref, const ParamValue& value);
  void remove_object(const std::string& name);
  void put_binding(Binding binding);

  /// Bindings in evaluation order: dependencies first, ties broken by
  /// target name. Throws SceneError if the dependency graph has a cycle.
  std::vector<const Binding*> evaluation_order() const;

  bool has_cycle() const;

 private:
  std::map<std::string, SceneObject> objects_;
  std::map<std::string, Binding> bindings_;
};

bool is_pseudo_param(std::string_view param);

struct CommandOutcome {
  Scene scene;
  std::string text;
};

/// Transactional: on error the input scene is untouched and SceneError is
/// thrown. Bound parameters are re-evaluated after every mutation.
CommandOutcome apply_command(const Scene& scene, const Command& cmd);

/// Parses and applies every non-blank line of `script` as one transaction;
/// results are joined with '\n'. Parse diagnostics throw SceneError carrying
/// the line number and column.
CommandOutcome run_script(const Scene& scene, std::string_view script);

Scene evaluate_graph(const Scene& scene);

std::string query_object(const Scene& scene, std::string_view name);

json snapshot_json(const Scene& scene);
/// canonical_dump of snapshot_json.
std::string snapshot(const Scene& scene);

std::string render_summary(const Scene& scene);

/// Orthographic XZ projection, 512x512 SVG, one labelled rectangle per
/// object footprint.
std::string render_thumbnail(const Scene& scene);

}  // namespace threedify::dcc
