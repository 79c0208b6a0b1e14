#include "evohom/transform_checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace evohom {

namespace {

std::string witness_at(double r_gamma, double r) {
  std::ostringstream os;
  os.precision(17);
  os << "r_gamma=" << r_gamma << " r=" << r;
  return os.str();
}

std::string witness_at(double r_gamma, const Vec2& y) {
  std::ostringstream os;
  os.precision(17);
  os << "r_gamma=" << r_gamma << " y=(" << y[0] << "," << y[1] << ")";
  return os.str();
}

std::vector<double> radius_grid(const TransformParams& p, int n) {
  std::vector<double> r(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    r[static_cast<std::size_t>(i)] = p.r_min + (p.r_max - p.r_min) * i / (n - 1);
  return r;
}

double frobenius(const Mat2& a) {
  return std::sqrt(a[0][0] * a[0][0] + a[0][1] * a[0][1] + a[1][0] * a[1][0] + a[1][1] * a[1][1]);
}

} // namespace

CheckList check_transform_identities(const TransformParams& params, double tol) {
  const RadialProfile prof(params);
  CheckList out;

  {
    double worst = 0.0;
    std::string where;
    const int m = 40;
    for (int i = 0; i <= m; ++i)
      for (int j = 0; j <= m; ++j) {
        const Vec2 y{static_cast<double>(i) / m, static_cast<double>(j) / m};
        const auto ev = eval_psi<2>(prof, params.r0, y);
        const double err = std::max({max_abs(ev.mapped_point - y), max_abs(ev.jacobian - identity_matrix<2>()),
                                     std::fabs(ev.det - 1.0)});
        if (err > worst) {
          worst = err;
          where = witness_at(params.r0, y);
        }
      }
    out.add(bounded_check("psi_reference_identity", worst, tol, where));
  }

  {
    double worst = 0.0;
    std::string where;
    for (double rg : radius_grid(params, 20)) {
      const double err = std::fabs(prof(rg, params.r0).value - rg);
      if (err > worst) {
        worst = err;
        where = witness_at(rg, params.r0);
      }
    }
    out.add(bounded_check("profile_reference_radius", worst, tol, where));
  }

  {
    double worst = 0.0;
    std::string where;
    const double inner = params.r_min - params.delta, outer = params.r_max + params.delta;
    const double far = std::sqrt(0.5);
    for (double rg : radius_grid(params, 20)) {
      for (int i = 0; i <= 50; ++i) {
        for (double r : {inner * i / 50.0, outer + (far - outer) * i / 50.0}) {
          const double err = std::fabs(prof(rg, r).value - r);
          if (err > worst) {
            worst = err;
            where = witness_at(rg, r);
          }
        }
      }
      const int m = 40;
      for (int i = 0; i <= m; ++i)
        for (int j = 0; j <= m; ++j) {
          const Vec2 y{static_cast<double>(i) / m, static_cast<double>(j) / m};
          const double rho = norm(y - cell_centre<2>());
          if (rho > inner && rho < outer)
            continue;
          const double err = max_abs(eval_psi<2>(prof, rg, y).mapped_point - y);
          if (err > worst) {
            worst = err;
            where = witness_at(rg, y);
          }
        }
    }
    out.add(bounded_check("identity_outside_annulus", worst, tol, where));
  }
  return out;
}

JacobianSummary measure_jacobian(const TransformParams& params, int samples, double h, std::uint64_t seed) {
  const RadialProfile prof(params);
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> rg_dist(params.r_min, params.r_max);
  std::uniform_real_distribution<double> y_dist(0.0, 1.0);

  JacobianSummary s;
  s.det_min = std::numeric_limits<double>::infinity();
  s.det_max = 0.0;
  s.min_radial_slope = std::numeric_limits<double>::infinity();
  for (int n = 0; n < samples; ++n) {
    const double rg = rg_dist(gen);
    const Vec2 y{y_dist(gen), y_dist(gen)};
    const auto ev = eval_psi<2>(prof, rg, y);
    for (std::size_t j = 0; j < 2; ++j) {
      Vec2 yp = y, ym = y;
      yp[j] += h;
      ym[j] -= h;
      const Vec2 col = (0.5 / h) * (eval_psi<2>(prof, rg, yp).mapped_point - eval_psi<2>(prof, rg, ym).mapped_point);
      for (std::size_t i = 0; i < 2; ++i)
        s.max_jacobian_error = std::max(s.max_jacobian_error, std::fabs(ev.jacobian[i][j] - col[i]));
    }
    const double g0 = std::max(rg - h, params.r_min), g1 = std::min(rg + h, params.r_max);
    const Vec2 dg = (1.0 / (g1 - g0)) * (eval_psi<2>(prof, g1, y).mapped_point - eval_psi<2>(prof, g0, y).mapped_point);
    s.max_rgamma_error = std::max(s.max_rgamma_error, max_abs(dg - ev.dr_derivative));
    s.det_min = std::min(s.det_min, ev.det);
    s.det_max = std::max(s.det_max, ev.det);
    s.min_radial_slope = std::min(s.min_radial_slope, prof(rg, norm(y - cell_centre<2>())).d_r);
  }
  return s;
}

CheckList check_transform_jacobian(const TransformParams& params, int samples, double h, std::uint64_t seed,
                                   double tol, double det_floor) {
  const auto s = measure_jacobian(params, samples, h, seed);
  CheckList out;
  out.add(bounded_check("jacobian_finite_difference", s.max_jacobian_error, tol));
  out.add(bounded_check("rgamma_finite_difference", s.max_rgamma_error, tol));
  CheckResult lower{"det_lower_bound", s.det_min > det_floor, s.det_min, det_floor, {}};
  out.add(lower);
  CheckResult upper{"det_upper_bound", std::isfinite(s.det_max), s.det_max,
                    std::numeric_limits<double>::infinity(), {}};
  out.add(upper);
  CheckResult slope{"radial_slope_positive", s.min_radial_slope > 0.0, s.min_radial_slope, 0.0, {}};
  out.add(slope);
  return out;
}

EpsConstants measure_eps_constants(const TransformParams& params, double epsilon, int points_per_cell,
                                   double perturbation) {
  const RadialProfile prof(params);
  const int n = static_cast<int>(std::lround(1.0 / epsilon));
  const std::array<double, 4> levels{params.r_min, params.r_max, 0.5 * (params.r_min + params.r0),
                                     0.5 * (params.r0 + params.r_max)};
  const std::array<double, 4> shifts{perturbation, -perturbation, perturbation, perturbation};

  CellRadii base, moved;
  base.cells_per_side = moved.cells_per_side = n;
  base.radii.resize(static_cast<std::size_t>(n * n));
  moved.radii.resize(base.radii.size());
  for (int k2 = 0; k2 < n; ++k2)
    for (int k1 = 0; k1 < n; ++k1) {
      const auto type = static_cast<std::size_t>(k1 + 2 * k2) % 4;
      base.radii[base.index(k1, k2)] = levels[type];
      moved.radii[base.index(k1, k2)] = levels[type] + shifts[type];
    }

  EpsConstants c;
  c.epsilon = epsilon;
  const int m = points_per_cell;
  for (int k2 = 0; k2 < n; ++k2)
    for (int k1 = 0; k1 < n; ++k1)
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
          const Vec2 x{epsilon * (k1 + (i + 0.5) / m), epsilon * (k2 + (j + 0.5) / m)};
          const auto a = eval_psi_eps(prof, epsilon, base, x);
          const auto b = eval_psi_eps(prof, epsilon, moved, x);
          c.displacement = std::max(c.displacement, norm(a.mapped_point - x) / epsilon);
          c.jacobian = std::max(c.jacobian, frobenius(a.jacobian));
          c.det = std::max(c.det, a.det);
          c.lipschitz = std::max(c.lipschitz, frobenius(b.jacobian - a.jacobian) / perturbation);
        }
  return c;
}

CheckList check_eps_uniformity(const TransformParams& params, const std::vector<double>& epsilons,
                               double max_spread, std::vector<EpsConstants>* constants) {
  std::vector<EpsConstants> rows;
  for (double e : epsilons)
    rows.push_back(measure_eps_constants(params, e));
  if (constants)
    *constants = rows;

  auto spread = [&](double EpsConstants::*field) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& r : rows) {
      lo = std::min(lo, r.*field);
      hi = std::max(hi, r.*field);
    }
    return lo > 0.0 ? hi / lo - 1.0 : std::numeric_limits<double>::infinity();
  };
  CheckList out;
  out.add(bounded_check("displacement_constant_spread", spread(&EpsConstants::displacement), max_spread));
  out.add(bounded_check("jacobian_constant_spread", spread(&EpsConstants::jacobian), max_spread));
  out.add(bounded_check("det_constant_spread", spread(&EpsConstants::det), max_spread));
  out.add(bounded_check("lipschitz_constant_spread", spread(&EpsConstants::lipschitz), max_spread));
  return out;
}

} // namespace evohom
