#pragma once

// Named initial fields and source terms selectable from the configuration.

#include "evohom/linalg.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace evohom {

using SpaceField = std::function<double(const Vec2& x)>;
using SpaceTimeField = std::function<double(double t, const Vec2& x)>;

struct FieldSpec {
  std::string name = "constant";
  std::map<std::string, double> params; // missing keys take the entry's defaults
};

// Throws ConfigError for unknown names or parameters.
SpaceField make_initial_field(const FieldSpec& spec);
SpaceTimeField make_source(const FieldSpec& spec);

std::vector<std::string> initial_field_names();
std::vector<std::string> source_names();
// Parameter names with defaults accepted by an entry.
std::map<std::string, double> initial_field_defaults(const std::string& name);
std::map<std::string, double> source_defaults(const std::string& name);

// The decaying mode cos(pi x1) cos(pi x2) exp(-t), an exact solution of the frozen-radius
// homogenised equation with diffusivity a I, porosity theta and source
// cos_product_decay(diffusivity = a, porosity = theta).
double cos_product_decay_solution(double t, const Vec2& x);

} // namespace evohom
