#include "evohom/kinetics.hpp"

#include "evohom/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace evohom {

namespace {

double smoothstep(double t) {
  if (t <= 0.0)
    return 0.0;
  if (t >= 1.0)
    return 1.0;
  return t * t * (3.0 - 2.0 * t);
}

double driving_force(const KineticsSpec& s, double u) { return std::clamp(s.slope * (u - s.u_eq), -s.f_cap, s.f_cap); }

double gated_affine(const KineticsSpec& s, double u, double r) {
  const double d = driving_force(s, u);
  if (d > 0.0)
    return growth_gate(s, r) * d;
  if (d < 0.0)
    return dissolution_gate(s, r) * d;
  return 0.0;
}

const std::vector<KineticsFamily>& registry() {
  static const std::vector<KineticsFamily> families{
      {"gated_affine",
       "clamp(k (u - u_eq), -C_f, C_f), growth gated off near r_max and dissolution off near r_min",
       gated_affine,
       // |d_u f| <= k and |d_r f| <= 1.5 C_f / delta_g (peak slope of the smoothstep).
       [](const KineticsSpec& s) { return s.slope + 1.5 * s.f_cap / s.gate_width; }},
      {"ungated_affine", "clamp(k (u - u_eq), -C_f, C_f) without gates; violates the sign conditions",
       [](const KineticsSpec& s, double u, double) { return driving_force(s, u); },
       [](const KineticsSpec& s) { return s.slope; }},
  };
  return families;
}

std::string point_text(double u, double r) {
  std::ostringstream os;
  os.precision(17);
  os << "u=" << u << " r=" << r;
  return os.str();
}

} // namespace

void KineticsSpec::validate() const {
  kinetics_family(family);
  if (!(r_min > 0.0 && r_min < r_max))
    throw ConfigError("kinetics requires 0 < r_min < r_max");
  if (!(gate_width > 0.0 && gate_width < 0.5 * (r_max - r_min)))
    throw ConfigError("kinetics gate_width must lie in (0, (r_max - r_min)/2)");
  if (!(f_cap > 0.0))
    throw ConfigError("kinetics f_cap must be positive");
  if (!(c_s > 0.0))
    throw ConfigError("kinetics c_s must be positive");
  if (!(slope > 0.0) || !std::isfinite(u_eq))
    throw ConfigError("kinetics slope must be positive and u_eq finite");
}

const KineticsFamily& kinetics_family(const std::string& name) {
  for (const auto& f : registry())
    if (f.name == name)
      return f;
  throw ConfigError("unknown kinetics family '" + name + "'");
}

std::vector<std::string> kinetics_family_names() {
  std::vector<std::string> names;
  for (const auto& f : registry())
    names.push_back(f.name);
  return names;
}

double growth_gate(const KineticsSpec& s, double r) {
  return 1.0 - smoothstep((r - (s.r_max - s.gate_width)) / s.gate_width);
}

double dissolution_gate(const KineticsSpec& s, double r) { return smoothstep((r - s.r_min) / s.gate_width); }

double eval_f(const KineticsSpec& spec, double u, double r) { return kinetics_family(spec.family).rate(spec, u, r); }

RadiusStep step_radius_detailed(const KineticsSpec& spec, double r, double f_value, double dt) {
  if (!(dt > 0.0))
    throw DomainError("radius step needs dt > 0");
  const double next = r + dt * f_value / spec.c_s;
  RadiusStep out;
  out.r = std::clamp(next, spec.r_min, spec.r_max);
  out.clamped = out.r != next;
  return out;
}

double step_radius(const KineticsSpec& spec, double r, double f_value, double dt) {
  return step_radius_detailed(spec, r, f_value, dt).r;
}

KineticsReport validate_structure(const KineticsSpec& spec, std::size_t sample_count, std::uint64_t seed) {
  if (sample_count < 1000)
    throw ConfigError("kinetics validation needs at least 1000 samples");
  const auto& family = kinetics_family(spec.family);
  std::mt19937_64 gen(seed);
  const double u_span = 2.0 * spec.f_cap / spec.slope + 1.0;
  std::uniform_real_distribution<double> u_dist(spec.u_eq - u_span, spec.u_eq + u_span);
  const double margin = 2.0 * spec.gate_width;
  std::uniform_real_distribution<double> r_dist(spec.r_min - margin, spec.r_max + margin);
  std::uniform_real_distribution<double> below(spec.r_min - margin, spec.r_min);
  std::uniform_real_distribution<double> above(spec.r_max, spec.r_max + margin);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> log_step(std::log(1e-6), std::log(1e-1));

  KineticsReport rep;
  rep.samples = sample_count;
  rep.lipschitz_envelope = family.lipschitz_envelope(spec);
  double worst_low = 0.0, worst_high = 0.0;
  std::string w_low, w_high, w_bound, w_lip;
  for (std::size_t i = 0; i < sample_count; ++i) {
    // Sign at and beyond the lower end: f >= 0.
    {
      const double u = u_dist(gen), r = i == 0 ? spec.r_min : below(gen);
      const double f = family.rate(spec, u, r);
      if (-f > worst_low) {
        worst_low = -f;
        w_low = point_text(u, r);
      }
    }
    // Sign at and beyond the upper end: f <= 0.
    {
      const double u = u_dist(gen), r = i == 0 ? spec.r_max : above(gen);
      const double f = family.rate(spec, u, r);
      if (f > worst_high) {
        worst_high = f;
        w_high = point_text(u, r);
      }
    }
    // Bound and Lipschitz quotient on random nearby pairs.
    const double u = u_dist(gen), r = r_dist(gen);
    const double f = family.rate(spec, u, r);
    if (std::fabs(f) > rep.max_abs_f) {
      rep.max_abs_f = std::fabs(f);
      w_bound = point_text(u, r);
    }
    const double len = std::exp(log_step(gen));
    double du = unit(gen), dr = unit(gen);
    const double nrm = std::hypot(du, dr);
    if (nrm == 0.0)
      continue;
    du *= len / nrm;
    dr *= len / nrm;
    const double q = std::fabs(family.rate(spec, u + du, r + dr) - f) / len;
    if (q > rep.lipschitz_estimate) {
      rep.lipschitz_estimate = q;
      w_lip = point_text(u, r);
    }
  }
  rep.checks.add(bounded_check("sign_at_r_min", worst_low, 0.0, w_low));
  rep.checks.add(bounded_check("sign_at_r_max", worst_high, 0.0, w_high));
  rep.checks.add(bounded_check("rate_bound", rep.max_abs_f, spec.f_cap, w_bound));
  rep.checks.add(bounded_check("lipschitz_envelope", rep.lipschitz_estimate, rep.lipschitz_envelope, w_lip));
  return rep;
}

TrajectoryReport check_radius_trajectories(const KineticsSpec& spec, std::size_t trajectories, std::size_t steps,
                                           double dt, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> r_dist(spec.r_min, spec.r_max);
  const double u_span = 2.0 * spec.f_cap / spec.slope;
  std::uniform_real_distribution<double> u_dist(spec.u_eq - u_span, spec.u_eq + u_span);
  TrajectoryReport rep;
  double box_excess = 0.0;
  std::string w_box, w_rate;
  const double bound = dt * spec.f_cap / spec.c_s;
  for (std::size_t t = 0; t < trajectories; ++t) {
    double r = r_dist(gen);
    // Piecewise-constant concentration held for a random number of steps, so trajectories reach
    // the ends of the box.
    double u = u_dist(gen);
    for (std::size_t n = 0; n < steps; ++n) {
      if (gen() % 16 == 0)
        u = u_dist(gen);
      const double next = step_radius(spec, r, eval_f(spec, u, r), dt);
      const double excess = std::max(spec.r_min - next, next - spec.r_max);
      if (excess > box_excess) {
        box_excess = excess;
        w_box = point_text(u, r);
      }
      const double ratio = std::fabs(next - r) / bound;
      if (ratio > rep.max_step_ratio) {
        rep.max_step_ratio = ratio;
        w_rate = point_text(u, r);
      }
      r = next;
      ++rep.steps;
    }
  }
  rep.checks.add(bounded_check("radius_box_invariance", box_excess, 0.0, w_box));
  rep.checks.add(bounded_check("radius_rate_bound", rep.max_step_ratio, 1.0 + 1e-12, w_rate));
  return rep;
}

} // namespace evohom
