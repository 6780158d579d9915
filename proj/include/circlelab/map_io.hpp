#pragma once

// MapSpec file format: a TOML table with the rotation parameter and the
// critical points, e.g.
//
//   a = "0.25@256"
//   critical_points = [
//     { c = "0", d = 3 },
//     { c = "0.5", d = 3 },
//   ]
//
// Scalars are decimal strings, optionally carrying an explicit
// precision tag ("value@bits"); untagged numerals inherit the ambient
// precision.

#include "circlelab/toml_lite.hpp"
#include "circlelab/trig_map.hpp"

#include <fstream>
#include <sstream>
#include <string>

namespace circlelab {

inline Real real_from_toml(const toml::Value& v, long default_bits) {
  if (v.kind == toml::Value::Kind::String) return Real::parse(v.str, default_bits);
  if (v.kind == toml::Value::Kind::Integer)
    return Real::of_int(static_cast<long>(v.integer), default_bits);
  return Real::of(v.as_float(), default_bits);
}

inline MapSpec map_spec_from_toml(const toml::Value& t, long bits) {
  Real a = t.has("a") ? real_from_toml(t.at("a"), bits) : Real::of_int(0, bits);
  std::vector<CriticalPointSpec> cps;
  if (t.has("critical_points")) {
    for (const auto& entry : t.at("critical_points").as_array()) {
      Real c = real_from_toml(entry.at("c"), bits);
      int d = static_cast<int>(entry.at("d").as_int());
      cps.push_back({reduce_mod1(c), d});
    }
  }
  MapSpec spec{std::move(cps), std::move(a)};
  spec.validate();
  return spec;
}

inline MapSpec load_map_spec(const std::string& path, long bits) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open map spec file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return map_spec_from_toml(toml::parse(ss.str()), bits);
}

inline std::string map_spec_to_toml(const MapSpec& spec) {
  std::ostringstream os;
  os << "a = \"" << spec.offset.str() << "\"\n";
  os << "critical_points = [";
  for (std::size_t i = 0; i < spec.critical_points.size(); ++i) {
    if (i) os << ", ";
    os << "{ c = \"" << spec.critical_points[i].c.value.str() << "\", d = "
       << spec.critical_points[i].d << " }";
  }
  os << "]\n";
  return os.str();
}

}  // namespace circlelab
