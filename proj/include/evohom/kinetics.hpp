#pragma once

// Interface reaction rate f(u, r) and the radius update driven by it.

#include "evohom/report.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace evohom {

struct KineticsSpec {
  std::string family = "gated_affine";
  double r_min = 0.15;
  double r_max = 0.35;
  double gate_width = 0.05; // delta_g
  double slope = 1.0;       // k
  double u_eq = 0.5;
  double f_cap = 1.0;       // C_f
  double c_s = 2.0;
  bool enabled = true;      // false freezes every radius (f is not evaluated)

  // Throws ConfigError; also checks that the family is registered.
  void validate() const;
};

// A named rate law with its analytic Lipschitz constant in (u, r).
struct KineticsFamily {
  std::string name;
  std::string description;
  std::function<double(const KineticsSpec&, double u, double r)> rate;
  std::function<double(const KineticsSpec&)> lipschitz_envelope;
};

// Throws ConfigError for unknown names.
const KineticsFamily& kinetics_family(const std::string& name);
std::vector<std::string> kinetics_family_names();

double eval_f(const KineticsSpec& spec, double u, double r);

// Smoothstep gates: growth switches off on [r_max - delta_g, r_max], dissolution switches on
// over [r_min, r_min + delta_g].
double growth_gate(const KineticsSpec& spec, double r);
double dissolution_gate(const KineticsSpec& spec, double r);

struct RadiusStep {
  double r = 0.0;
  bool clamped = false; // the Euler step left [r_min, r_max]
};

// Explicit Euler r + dt f / c_s clamped to [r_min, r_max]. Throws DomainError for dt <= 0.
RadiusStep step_radius_detailed(const KineticsSpec& spec, double r, double f_value, double dt);
double step_radius(const KineticsSpec& spec, double r, double f_value, double dt);

struct KineticsReport {
  CheckList checks;
  double max_abs_f = 0.0;
  double lipschitz_estimate = 0.0;
  double lipschitz_envelope = 0.0;
  std::size_t samples = 0;
};

// Randomised check of the sign conditions at the box ends, the bound C_f and the Lipschitz
// envelope. Requires sample_count >= 1000.
KineticsReport validate_structure(const KineticsSpec& spec, std::size_t sample_count, std::uint64_t seed);

struct TrajectoryReport {
  CheckList checks;
  double max_step_ratio = 0.0; // max |dr| / (dt C_f / c_s)
  std::size_t steps = 0;
};

// Random concentration histories drive step_radius from random admissible radii; checks box
// invariance and the per-step rate bound.
TrajectoryReport check_radius_trajectories(const KineticsSpec& spec, std::size_t trajectories, std::size_t steps,
                                           double dt, std::uint64_t seed);

} // namespace evohom
