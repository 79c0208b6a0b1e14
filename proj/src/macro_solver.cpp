#include "evohom/macro_solver.hpp"

#include "evohom/errors.hpp"
#include "evohom/fem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace evohom {

MacroGrid make_macro_grid(int n) {
  if (n < 1)
    throw ConfigError("macro grid needs n >= 1");
  MacroGrid g;
  g.n = n;
  g.h = 1.0 / n;
  g.element_area = 0.5 * g.h * g.h;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      g.nodes.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const int a = g.node(i, j), b = g.node(i + 1, j), c = g.node(i + 1, j + 1), d = g.node(i, j + 1);
      g.elements.push_back({a, b, c});
      g.elements.push_back({a, c, d});
    }
  for (const auto& e : g.elements)
    g.centroids.push_back(centroid(g.nodes[e[0]], g.nodes[e[1]], g.nodes[e[2]]));
  return g;
}

double MacroGrid::interpolate(const std::vector<double>& v, const Vec2& x) const {
  if (!(x[0] >= 0.0 && x[0] <= 1.0 && x[1] >= 0.0 && x[1] <= 1.0))
    throw DomainError("macro interpolation point outside the unit square");
  const double s = x[0] * n, t = x[1] * n;
  const int i = std::min(static_cast<int>(s), n - 1), j = std::min(static_cast<int>(t), n - 1);
  const double a = s - i, b = t - j;
  const double va = v[node(i, j)], vb = v[node(i + 1, j)], vc = v[node(i + 1, j + 1)], vd = v[node(i, j + 1)];
  // Below the diagonal the element is (a, b, c), above it (a, c, d).
  if (a >= b)
    return va + a * (vb - va) + b * (vc - vb);
  return va + b * (vd - va) + a * (vc - vd);
}

std::vector<double> MacroGrid::element_to_nodes(const std::vector<double>& per_element) const {
  std::vector<double> sum(nodes.size(), 0.0), weight(nodes.size(), 0.0);
  for (std::size_t e = 0; e < elements.size(); ++e)
    for (int k : elements[e]) {
      sum[static_cast<std::size_t>(k)] += per_element[e];
      weight[static_cast<std::size_t>(k)] += 1.0;
    }
  for (std::size_t i = 0; i < sum.size(); ++i)
    sum[i] /= weight[i];
  return sum;
}

MacroSolver::MacroSolver(MacroGrid grid, EffectiveTensorTable table, KineticsSpec spec, SpaceTimeField source,
                         MacroOptions options)
    : grid_(std::move(grid)), table_(std::move(table)), spec_(std::move(spec)), source_(std::move(source)),
      options_(options) {
  spec_.validate();
  if (!(options_.diffusion > 0.0))
    throw ConfigError("diffusion coefficient must be positive");
  for (const auto& e : grid_.elements)
    geometry_.push_back(triangle_geometry(grid_.nodes[e[0]], grid_.nodes[e[1]], grid_.nodes[e[2]]));
}

std::vector<double> MacroSolver::lumped_mass(const std::vector<double>& theta) const {
  std::vector<double> m(grid_.nodes.size(), 0.0);
  for (std::size_t e = 0; e < grid_.elements.size(); ++e)
    add_element_lumped_mass(m, grid_.elements[e], theta[e] * geometry_[e].area);
  return m;
}

double MacroSolver::fluid_mass(const std::vector<double>& u, const std::vector<double>& theta) const {
  const auto m = lumped_mass(theta);
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i)
    s += m[i] * u[i];
  return s;
}

double MacroSolver::solid_mass(const std::vector<double>& r) const {
  double s = 0.0;
  for (std::size_t e = 0; e < r.size(); ++e)
    s += geometry_[e].area * ball_volume(2, r[e]);
  return spec_.c_s * s;
}

MacroState MacroSolver::init(const SpaceField& u0, const SpaceField& r0) const {
  MacroState s;
  s.u.resize(grid_.nodes.size());
  for (std::size_t i = 0; i < s.u.size(); ++i) {
    s.u[i] = u0(grid_.nodes[i]);
    if (!std::isfinite(s.u[i]))
      throw ConfigError("initial concentration is not finite");
  }
  s.r.resize(grid_.elements.size());
  s.theta.resize(grid_.elements.size());
  for (std::size_t e = 0; e < s.r.size(); ++e) {
    s.r[e] = r0(grid_.centroids[e]);
    if (!(s.r[e] >= spec_.r_min && s.r[e] <= spec_.r_max))
      throw ConfigError("initial radius " + std::to_string(s.r[e]) + " outside [r_min, r_max]");
    s.theta[e] = porosity(s.r[e]);
  }
  s.ledger.fluid = fluid_mass(s.u, s.theta);
  s.ledger.solid = solid_mass(s.r);
  return s;
}

MacroState MacroSolver::step(const MacroState& state, double dt) const {
  if (!(dt > 0.0))
    throw DomainError("macro step needs dt > 0");
  const std::size_t ne = grid_.elements.size(), nn = grid_.nodes.size();
  MacroState next;
  next.step = state.step + 1;
  next.t = state.t + dt;
  next.r = state.r;
  next.theta.resize(ne);

  // (1) radius update from the element-mean concentration.
  if (spec_.enabled) {
    for (std::size_t e = 0; e < ne; ++e) {
      const auto& el = grid_.elements[e];
      const double ubar = (state.u[el[0]] + state.u[el[1]] + state.u[el[2]]) / 3.0;
      const auto rs = step_radius_detailed(spec_, state.r[e], eval_f(spec_, ubar, state.r[e]), dt);
      next.r[e] = rs.r;
      next.clamped_radii += rs.clamped ? 1 : 0;
    }
  }
  for (std::size_t e = 0; e < ne; ++e)
    next.theta[e] = porosity(next.r[e]);

  // (2) backward Euler with lumped porosity-weighted mass.
  const auto m_old = lumped_mass(state.theta);
  const auto m_new = lumped_mass(next.theta);
  TripletBuffer k;
  k.reserve(9 * ne + nn);
  for (std::size_t e = 0; e < ne; ++e) {
    const Mat2 a = options_.diffusion * table_.lookup(next.r[e]).a_hom;
    add_element_stiffness(k, grid_.elements[e], geometry_[e], a);
  }
  for (std::size_t i = 0; i < nn; ++i)
    k.add(i, i, m_new[i] / dt);
  const SparseMatrix system = k.finalize(nn, nn);

  std::vector<double> rhs(nn), source_load(nn);
  double source_step = 0.0;
  for (std::size_t i = 0; i < nn; ++i) {
    source_load[i] = m_new[i] * source_(next.t, grid_.nodes[i]);
    source_step += dt * source_load[i];
    rhs[i] = m_old[i] * state.u[i] / dt + source_load[i];
  }
  for (std::size_t e = 0; e < ne; ++e) {
    const double dv = ball_volume(2, next.r[e]) - ball_volume(2, state.r[e]);
    if (dv == 0.0)
      continue;
    std::array<int, 3> el = grid_.elements[e];
    for (int v : el)
      rhs[static_cast<std::size_t>(v)] -= spec_.c_s * dv * geometry_[e].area / (3.0 * dt);
  }

  CgOptions opt;
  opt.tol = options_.cg_tol;
  auto [u, report] = solve_cg(system, rhs, opt, state.u);
  if (!report.converged)
    throw NumericalError("macro step " + std::to_string(next.step) + ": CG did not converge (residual " +
                         std::to_string(report.final_residual) + ")");
  for (std::size_t i = 0; i < nn; ++i)
    if (!std::isfinite(u[i]))
      throw NumericalError("macro step " + std::to_string(next.step) + ": non-finite concentration at node " +
                           std::to_string(i));
  next.u = std::move(u);
  next.last_solve = report;
  next.ledger.fluid = fluid_mass(next.u, next.theta);
  next.ledger.solid = solid_mass(next.r);
  next.ledger.source = state.ledger.source + source_step;
  return next;
}

MassBalanceReport mass_balance(const std::vector<MacroState>& states) {
  if (states.size() < 2)
    throw DomainError("mass balance needs at least two states");
  MassBalanceReport rep;
  for (std::size_t n = 1; n < states.size(); ++n) {
    const auto& a = states[n - 1].ledger;
    const auto& b = states[n].ledger;
    const double d = std::fabs((b.total() - a.total()) - (b.source - a.source));
    rep.defects.push_back(d);
    rep.max_defect = std::max(rep.max_defect, d);
  }
  return rep;
}

double l2_error(const MacroGrid& grid, const std::vector<double>& u, const std::function<double(const Vec2&)>& exact) {
  double s = 0.0;
  for (const auto& el : grid.elements) {
    for (int k = 0; k < 3; ++k) {
      const int a = el[k], b = el[(k + 1) % 3];
      const Vec2 x{0.5 * (grid.nodes[a][0] + grid.nodes[b][0]), 0.5 * (grid.nodes[a][1] + grid.nodes[b][1])};
      const double d = 0.5 * (u[a] + u[b]) - exact(x);
      s += grid.element_area / 3.0 * d * d;
    }
  }
  return std::sqrt(s);
}

void write_macro_snapshot(std::ostream& os, const MacroGrid& grid, const MacroState& state) {
  const auto r = grid.element_to_nodes(state.r);
  const auto theta = grid.element_to_nodes(state.theta);
  os << "x1,x2,u,r,theta\n";
  char buf[160];
  for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", grid.nodes[i][0], grid.nodes[i][1], state.u[i],
                  r[i], theta[i]);
    os << buf;
  }
}

void write_ledger_header(std::ostream& os) { os << "t,total_mass,solid_mass,fluid_mass,source_integral\n"; }

void write_ledger_row(std::ostream& os, const MacroState& s) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", s.t, s.ledger.total(), s.ledger.solid,
                s.ledger.fluid, s.ledger.source);
  os << buf;
}

} // namespace evohom
