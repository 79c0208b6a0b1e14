#include "evohom/fields.hpp"

#include "evohom/errors.hpp"

#include <cmath>
#include <numbers>

namespace evohom {

namespace {

using Params = std::map<std::string, double>;

template <class F> struct Entry {
  std::string name;
  Params defaults;
  std::function<F(const Params&)> build;
};

constexpr double pi = std::numbers::pi;

const std::vector<Entry<SpaceField>>& initial_registry() {
  static const std::vector<Entry<SpaceField>> r{
      {"constant", {{"value", 0.0}}, [](const Params& p) -> SpaceField {
         const double v = p.at("value");
         return [v](const Vec2&) { return v; };
       }},
      {"linear_x1", {{"offset", 0.0}, {"slope", 0.0}}, [](const Params& p) -> SpaceField {
         const double a = p.at("offset"), b = p.at("slope");
         return [a, b](const Vec2& x) { return a + b * x[0]; };
       }},
      {"cos_x1", {{"offset", 0.0}, {"amplitude", 1.0}}, [](const Params& p) -> SpaceField {
         const double a = p.at("offset"), b = p.at("amplitude");
         return [a, b](const Vec2& x) { return a + b * std::cos(pi * x[0]); };
       }},
      {"cos_product", {{"offset", 0.0}, {"amplitude", 1.0}}, [](const Params& p) -> SpaceField {
         const double a = p.at("offset"), b = p.at("amplitude");
         return [a, b](const Vec2& x) { return a + b * std::cos(pi * x[0]) * std::cos(pi * x[1]); };
       }},
      {"gaussian", {{"offset", 0.0}, {"amplitude", 1.0}, {"x1", 0.5}, {"x2", 0.5}, {"width", 0.2}},
       [](const Params& p) -> SpaceField {
         const double a = p.at("offset"), b = p.at("amplitude"), c1 = p.at("x1"), c2 = p.at("x2");
         const double w = p.at("width");
         if (!(w > 0.0))
           throw ConfigError("gaussian width must be positive");
         return [=](const Vec2& x) {
           const double d1 = x[0] - c1, d2 = x[1] - c2;
           return a + b * std::exp(-(d1 * d1 + d2 * d2) / (w * w));
         };
       }},
  };
  return r;
}

const std::vector<Entry<SpaceTimeField>>& source_registry() {
  static const std::vector<Entry<SpaceTimeField>> r{
      {"zero", {}, [](const Params&) -> SpaceTimeField { return [](double, const Vec2&) { return 0.0; }; }},
      {"constant", {{"value", 0.0}}, [](const Params& p) -> SpaceTimeField {
         const double v = p.at("value");
         return [v](double, const Vec2&) { return v; };
       }},
      {"cos_product_decay", {{"diffusivity", 1.0}, {"porosity", 1.0}}, [](const Params& p) -> SpaceTimeField {
         const double a = p.at("diffusivity"), theta = p.at("porosity");
         if (!(theta > 0.0))
           throw ConfigError("cos_product_decay porosity must be positive");
         const double factor = 2.0 * pi * pi * a / theta - 1.0;
         return [factor](double t, const Vec2& x) { return factor * cos_product_decay_solution(t, x); };
       }},
      {"gaussian", {{"amplitude", 1.0}, {"x1", 0.5}, {"x2", 0.5}, {"width", 0.2}},
       [](const Params& p) -> SpaceTimeField {
         const double b = p.at("amplitude"), c1 = p.at("x1"), c2 = p.at("x2"), w = p.at("width");
         if (!(w > 0.0))
           throw ConfigError("gaussian width must be positive");
         return [=](double, const Vec2& x) {
           const double d1 = x[0] - c1, d2 = x[1] - c2;
           return b * std::exp(-(d1 * d1 + d2 * d2) / (w * w));
         };
       }},
  };
  return r;
}

template <class F> const Entry<F>& find(const std::vector<Entry<F>>& reg, const std::string& name, const char* kind) {
  for (const auto& e : reg)
    if (e.name == name)
      return e;
  throw ConfigError(std::string("unknown ") + kind + " '" + name + "'");
}

template <class F> F build(const std::vector<Entry<F>>& reg, const FieldSpec& spec, const char* kind) {
  const auto& e = find(reg, spec.name, kind);
  Params p = e.defaults;
  for (const auto& [k, v] : spec.params) {
    if (!p.count(k))
      throw ConfigError(std::string(kind) + " '" + spec.name + "' has no parameter '" + k + "'");
    if (!std::isfinite(v))
      throw ConfigError(std::string(kind) + " parameter '" + k + "' must be finite");
    p[k] = v;
  }
  return e.build(p);
}

template <class F> std::vector<std::string> names(const std::vector<Entry<F>>& reg) {
  std::vector<std::string> n;
  for (const auto& e : reg)
    n.push_back(e.name);
  return n;
}

} // namespace

SpaceField make_initial_field(const FieldSpec& spec) { return build(initial_registry(), spec, "initial field"); }
SpaceTimeField make_source(const FieldSpec& spec) { return build(source_registry(), spec, "source"); }
std::vector<std::string> initial_field_names() { return names(initial_registry()); }
std::vector<std::string> source_names() { return names(source_registry()); }
std::map<std::string, double> initial_field_defaults(const std::string& name) {
  return find(initial_registry(), name, "initial field").defaults;
}
std::map<std::string, double> source_defaults(const std::string& name) {
  return find(source_registry(), name, "source").defaults;
}

double cos_product_decay_solution(double t, const Vec2& x) {
  return std::cos(pi * x[0]) * std::cos(pi * x[1]) * std::exp(-t);
}

} // namespace evohom
