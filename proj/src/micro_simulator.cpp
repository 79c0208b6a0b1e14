#include "evohom/micro_simulator.hpp"

#include "evohom/errors.hpp"
#include "evohom/fem.hpp"
#include "evohom/log.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <unordered_map>

namespace evohom {

namespace {

struct KeyHash {
  std::size_t operator()(const std::pair<std::int64_t, std::int64_t>& k) const {
    const auto a = static_cast<std::uint64_t>(k.first), b = static_cast<std::uint64_t>(k.second);
    return static_cast<std::size_t>(a * 0x9E3779B97F4A7C15ULL ^ (b + 0x632BE59BD9B4E019ULL + (a << 6) + (a >> 2)));
  }
};

bool on_cell_boundary(const Vec2& y) { return y[0] == 0.0 || y[0] == 1.0 || y[1] == 0.0 || y[1] == 1.0; }

// Two-point Gauss abscissae on [0, 1].
constexpr double kGaussLo = 0.5 - 0.5 / std::numbers::sqrt3;
constexpr double kGaussHi = 0.5 + 0.5 / std::numbers::sqrt3;

} // namespace

Vec2 MicroMesh::cell_centre_of(int cell) const {
  const auto k = cell_index(cell);
  return {(k[0] + 0.5) / cells_per_side, (k[1] + 0.5) / cells_per_side};
}

double MicroMesh::area() const {
  double s = 0.0;
  for (const auto& e : elements)
    s += triangle_geometry(nodes[e[0]], nodes[e[1]], nodes[e[2]]).area;
  return s;
}

MicroMesh build_micro_mesh(const PeriodicMesh& reference, double epsilon) {
  if (!(epsilon > 0.0))
    throw DomainError("epsilon must be positive");
  const double inv = 1.0 / epsilon;
  const long n = std::lround(inv);
  if (n < 1 || n > 64 || std::fabs(inv - static_cast<double>(n)) > 1e-9)
    throw DomainError("1/epsilon must be an integer in [1, 64], got " + std::to_string(inv));
  if (reference.periodic_pairs.empty())
    throw ConstructionError("reference mesh carries no periodic node traces");

  MicroMesh m;
  m.cells_per_side = static_cast<int>(n);
  m.epsilon = 1.0 / static_cast<double>(n);
  m.reference = reference;
  const int nc = m.cells_per_side;
  const std::size_t nv = reference.vertices.size();
  m.gamma_facets.resize(static_cast<std::size_t>(nc * nc));

  std::unordered_map<std::pair<std::int64_t, std::int64_t>, int, KeyHash> shared;
  std::vector<int> multiplicity;
  std::vector<int> local(nv);
  for (int k2 = 0; k2 < nc; ++k2) {
    for (int k1 = 0; k1 < nc; ++k1) {
      const int cell = k1 + nc * k2;
      for (std::size_t v = 0; v < nv; ++v) {
        const Vec2& y = reference.vertices[v];
        const Vec2 x{(k1 + y[0]) / nc, (k2 + y[1]) / nc};
        if (on_cell_boundary(y)) {
          const std::pair<std::int64_t, std::int64_t> key{std::llround(x[0] * 1e12), std::llround(x[1] * 1e12)};
          auto [it, inserted] = shared.try_emplace(key, static_cast<int>(m.nodes.size()));
          if (!inserted) {
            const Vec2& z = m.nodes[static_cast<std::size_t>(it->second)];
            if (std::fabs(z[0] - x[0]) > 1e-12 || std::fabs(z[1] - x[1]) > 1e-12)
              throw ConstructionError("merge mismatch at (" + std::to_string(x[0]) + ", " + std::to_string(x[1]) + ")");
            local[v] = it->second;
            ++multiplicity[static_cast<std::size_t>(it->second)];
            continue;
          }
        }
        local[v] = static_cast<int>(m.nodes.size());
        m.nodes.push_back(x);
        m.node_cell.push_back(cell);
        m.node_local.push_back(y);
        multiplicity.push_back(1);
      }
      for (std::size_t t = 0; t < reference.triangles.size(); ++t) {
        const auto& tri = reference.triangles[t];
        m.elements.push_back({local[tri[0]], local[tri[1]], local[tri[2]]});
        m.cell_of_element.push_back(cell);
        m.reference_element.push_back(static_cast<int>(t));
      }
      for (const auto& e : reference.hole_edges) {
        const Vec2 d = reference.vertices[e[1]] - reference.vertices[e[0]];
        m.gamma_facets[static_cast<std::size_t>(cell)].push_back({{local[e[0]], local[e[1]]}, norm(d)});
      }
    }
  }

  // Every node on an interior cell face must have been shared by the neighbouring tile.
  for (std::size_t i = 0; i < m.nodes.size(); ++i) {
    if (multiplicity[i] > 1)
      continue;
    for (int c = 0; c < 2; ++c) {
      const double s = m.nodes[i][c] * nc;
      const double k = std::round(s);
      if (std::fabs(s - k) < 1e-9 && k > 0.5 && k < nc - 0.5)
        throw ConstructionError("interface node (" + std::to_string(m.nodes[i][0]) + ", " +
                                std::to_string(m.nodes[i][1]) + ") has no partner in the neighbouring cell");
    }
  }
  return m;
}

MicroSystem::MicroSystem(const MicroMesh& mesh) : elements_(mesh.elements), n_(mesh.nodes.size()) {
  std::vector<std::vector<std::size_t>> adj(n_);
  for (const auto& e : elements_)
    for (int a : e)
      for (int b : e)
        adj[static_cast<std::size_t>(a)].push_back(static_cast<std::size_t>(b));
  offsets_.assign(n_ + 1, 0);
  for (std::size_t i = 0; i < n_; ++i) {
    auto& row = adj[i];
    row.push_back(i);
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    offsets_[i + 1] = offsets_[i] + row.size();
    columns_.insert(columns_.end(), row.begin(), row.end());
  }
  auto slot = [&](std::size_t r, std::size_t c) {
    const auto first = columns_.begin() + static_cast<std::ptrdiff_t>(offsets_[r]);
    const auto last = columns_.begin() + static_cast<std::ptrdiff_t>(offsets_[r + 1]);
    return static_cast<std::size_t>(std::lower_bound(first, last, c) - columns_.begin());
  };
  slots_.reserve(9 * elements_.size());
  for (const auto& e : elements_)
    for (int a : e)
      for (int b : e)
        slots_.push_back(slot(static_cast<std::size_t>(a), static_cast<std::size_t>(b)));
  diagonal_.resize(n_);
  for (std::size_t i = 0; i < n_; ++i)
    diagonal_[i] = slot(i, i);
  geometry_.reserve(elements_.size());
  for (const auto& e : elements_)
    geometry_.push_back(triangle_geometry(mesh.nodes[e[0]], mesh.nodes[e[1]], mesh.nodes[e[2]]));
}

SparseMatrix MicroSystem::assemble(std::span<const Mat2> coefficients, std::span<const double> mass, double dt) const {
  std::vector<double> values(columns_.size(), 0.0);
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    const auto& g = geometry_[e];
    const std::size_t* s = &slots_[9 * e];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const Vec2 flux = coefficients[e] * g.grad[j];
        values[s[3 * i + j]] += g.area * dot(flux, g.grad[i]);
      }
  }
  for (std::size_t i = 0; i < n_; ++i)
    values[diagonal_[i]] += mass[i] / dt;
  return SparseMatrix(n_, n_, offsets_, columns_, std::move(values));
}

std::vector<double> MicroSystem::lumped_mass(std::span<const double> element_weight) const {
  std::vector<double> m(n_, 0.0);
  for (std::size_t e = 0; e < elements_.size(); ++e)
    add_element_lumped_mass(m, elements_[e], element_weight[e] * geometry_[e].area);
  return m;
}

MicroSimulator::MicroSimulator(MicroMesh mesh, TransformParams transform, KineticsSpec spec, SpaceTimeField source,
                               MicroOptions options)
    : mesh_(std::move(mesh)), transform_(transform), profile_(transform), spec_(std::move(spec)),
      source_(std::move(source)), options_(options), system_(mesh_) {
  spec_.validate();
  if (spec_.r_min < transform_.r_min || spec_.r_max > transform_.r_max)
    throw ConfigError("kinetics radius box exceeds the transform box");
  if (std::fabs(mesh_.reference.radius - transform_.r0) > 1e-14)
    throw ConfigError("reference mesh radius differs from the transform reference radius");
  if (!(options_.diffusion > 0.0))
    throw ConfigError("diffusion coefficient must be positive");
  const auto& ref = mesh_.reference;
  for (const auto& t : ref.triangles)
    reference_centroids_.push_back(centroid(ref.vertices[t[0]], ref.vertices[t[1]], ref.vertices[t[2]]));
}

MicroSimulator::ElementCoefficients MicroSimulator::coefficients(const std::vector<double>& radii,
                                                                 const std::vector<double>& rates) const {
  const std::size_t ne = mesh_.elements.size();
  ElementCoefficients c;
  c.a.resize(ne);
  c.b.assign(ne, Vec2{0.0, 0.0});
  c.det.resize(ne);
  const Mat2 plain = options_.diffusion * identity_matrix<2>();
  for (std::size_t e = 0; e < ne; ++e) {
    const auto k = static_cast<std::size_t>(mesh_.cell_of_element[e]);
    const auto ev = eval_psi<2>(profile_, radii[k],
                                reference_centroids_[static_cast<std::size_t>(mesh_.reference_element[e])]);
    const double rate = rates.empty() ? 0.0 : rates[k];
    const Vec2 velocity = (mesh_.epsilon * rate) * ev.dr_derivative;
    const bool moving = velocity[0] != 0.0 || velocity[1] != 0.0;
    if (ev.identity) {
      c.a[e] = plain;
      c.det[e] = 1.0;
      if (moving)
        c.b[e] = velocity;
    } else {
      const Mat2 inv = inverse(ev.jacobian);
      c.a[e] = (options_.diffusion * ev.det) * (inv * transpose(inv));
      c.det[e] = ev.det;
      if (moving)
        c.b[e] = ev.det * (inv * velocity);
    }
    c.any_b = c.any_b || moving;
  }
  return c;
}

Vec2 MicroSimulator::mapped_node(int node, const std::vector<double>& radii) const {
  const auto i = static_cast<std::size_t>(node);
  const int cell = mesh_.node_cell[i];
  const auto ev = eval_psi<2>(profile_, radii[static_cast<std::size_t>(cell)], mesh_.node_local[i]);
  if (ev.identity)
    return mesh_.nodes[i];
  const auto k = mesh_.cell_index(cell);
  const double nc = mesh_.cells_per_side;
  return {(k[0] + ev.mapped_point[0]) / nc, (k[1] + ev.mapped_point[1]) / nc};
}

MicroState MicroSimulator::init(const SpaceField& u0, const SpaceField& r0) const {
  MicroState s;
  const std::size_t nk = mesh_.n_cells();
  s.radii.resize(nk);
  s.radii_rate.assign(nk, 0.0);
  for (std::size_t k = 0; k < nk; ++k) {
    s.radii[k] = options_.pin_radii ? transform_.r0 : r0(mesh_.cell_centre_of(static_cast<int>(k)));
    if (!(s.radii[k] >= spec_.r_min && s.radii[k] <= spec_.r_max))
      throw ConfigError("initial radius " + std::to_string(s.radii[k]) + " outside [r_min, r_max]");
  }
  s.u_hat.resize(mesh_.nodes.size());
  for (std::size_t i = 0; i < s.u_hat.size(); ++i) {
    s.u_hat[i] = u0(mapped_node(static_cast<int>(i), s.radii));
    if (!std::isfinite(s.u_hat[i]))
      throw ConfigError("initial concentration is not finite");
  }
  s.det = coefficients(s.radii, {}).det;
  s.ledger.fluid = fluid_mass(s.u_hat, s.det);
  s.ledger.solid = solid_mass(s.radii);
  return s;
}

double MicroSimulator::surface_average_f(const MicroState& state, int cell) const {
  const double r = state.radii[static_cast<std::size_t>(cell)];
  double integral = 0.0, length = 0.0;
  for (const auto& f : mesh_.gamma_facets[static_cast<std::size_t>(cell)]) {
    const double ua = state.u_hat[f.nodes[0]], ub = state.u_hat[f.nodes[1]];
    const double f_lo = eval_f(spec_, ua + kGaussLo * (ub - ua), r);
    const double f_hi = eval_f(spec_, ua + kGaussHi * (ub - ua), r);
    integral += 0.5 * f.reference_length * (f_lo + f_hi);
    length += f.reference_length;
  }
  return integral / length;
}

double MicroSimulator::fluid_mass(const std::vector<double>& u, const std::vector<double>& det) const {
  const auto m = system_.lumped_mass(det);
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i)
    s += m[i] * u[i];
  return s;
}

double MicroSimulator::solid_mass(const std::vector<double>& radii) const {
  double s = 0.0;
  for (double r : radii)
    s += ball_volume(2, r);
  return spec_.c_s * mesh_.epsilon * mesh_.epsilon * s;
}

double MicroSimulator::pore_measure(const std::vector<double>& det) const {
  double s = 0.0;
  for (std::size_t e = 0; e < det.size(); ++e)
    s += det[e] * system_.geometry()[e].area;
  return s;
}

double MicroSimulator::l2_norm(const MicroState& state) const {
  const auto m = system_.lumped_mass(state.det);
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i)
    s += m[i] * state.u_hat[i] * state.u_hat[i];
  return std::sqrt(s);
}

double MicroSimulator::gradient_norm_sq(const MicroState& state) const {
  double s = 0.0;
  for (std::size_t e = 0; e < mesh_.elements.size(); ++e) {
    const auto& g = system_.geometry()[e];
    Vec2 grad{0.0, 0.0};
    for (int a = 0; a < 3; ++a)
      grad = grad + state.u_hat[mesh_.elements[e][a]] * g.grad[a];
    s += g.area * dot(grad, grad);
  }
  return s;
}

MicroState MicroSimulator::step(const MicroState& state, double dt) const {
  if (!(dt > 0.0))
    throw DomainError("micro step needs dt > 0");
  const std::size_t nn = mesh_.nodes.size(), ne = mesh_.elements.size(), nk = mesh_.n_cells();
  MicroState next;
  next.step = state.step + 1;
  next.t = state.t + dt;
  next.radii = state.radii;
  next.radii_rate.assign(nk, 0.0);

  // (1) radii from the surface averages, and the surface load that removes exactly the mass
  // deposited in the solid: sum_i load_i = c_s eps^2 (V(r^{n+1}) - V(r^n)) / dt.
  std::vector<double> surface(nn, 0.0);
  bool any_surface = false;
  if (spec_.enabled && !options_.pin_radii) {
    const double perimeter = mesh_.reference_perimeter();
    const double eps2 = mesh_.epsilon * mesh_.epsilon;
    for (std::size_t k = 0; k < nk; ++k) {
      const double avg = surface_average_f(state, static_cast<int>(k));
      const double r = state.radii[k];
      const auto rs = step_radius_detailed(spec_, r, avg, dt);
      next.radii[k] = rs.r;
      next.radii_rate[k] = (rs.r - r) / dt;
      next.clamped_radii += rs.clamped ? 1 : 0;
      const double predicted = dt * avg / spec_.c_s;
      if (predicted == 0.0)
        continue;
      const double weight = std::numbers::pi * (rs.r + r) / perimeter * ((rs.r - r) / predicted) * eps2;
      for (const auto& f : mesh_.gamma_facets[k]) {
        const double ua = state.u_hat[f.nodes[0]], ub = state.u_hat[f.nodes[1]];
        const double f_lo = eval_f(spec_, ua + kGaussLo * (ub - ua), r);
        const double f_hi = eval_f(spec_, ua + kGaussHi * (ub - ua), r);
        const double c = weight * 0.5 * f.reference_length;
        surface[f.nodes[0]] += c * (f_lo * (1.0 - kGaussLo) + f_hi * (1.0 - kGaussHi));
        surface[f.nodes[1]] += c * (f_lo * kGaussLo + f_hi * kGaussHi);
      }
      any_surface = true;
    }
    if (next.clamped_radii > 0)
      log_warning("micro step " + std::to_string(next.step) + ": " + std::to_string(next.clamped_radii) +
                  " radius updates clamped to the box");
  }

  // (2) coefficients at the new radii with the new rates.
  const auto coef = coefficients(next.radii, next.radii_rate);
  const auto m_old = system_.lumped_mass(state.det);
  const auto m_new = system_.lumped_mass(coef.det);
  const SparseMatrix system = system_.assemble(coef.a, m_new, dt);

  // (3) right-hand side.
  std::vector<double> rhs(nn);
  double source_step = 0.0;
  for (std::size_t i = 0; i < nn; ++i) {
    const Vec2 x = options_.source_at_mapped_point ? mapped_node(static_cast<int>(i), next.radii) : mesh_.nodes[i];
    const double load = m_new[i] * source_(next.t, x);
    source_step += dt * load;
    rhs[i] = m_old[i] * state.u_hat[i] / dt + load;
  }
  if (coef.any_b) {
    for (std::size_t e = 0; e < ne; ++e) {
      const auto& el = mesh_.elements[e];
      const auto& g = system_.geometry()[e];
      const double ubar = (state.u_hat[el[0]] + state.u_hat[el[1]] + state.u_hat[el[2]]) / 3.0;
      for (int a = 0; a < 3; ++a)
        rhs[static_cast<std::size_t>(el[a])] -= g.area * ubar * dot(coef.b[e], g.grad[a]);
    }
  }
  if (any_surface)
    for (std::size_t i = 0; i < nn; ++i)
      rhs[i] -= surface[i];

  CgOptions opt;
  opt.tol = options_.cg_tol;
  auto [u, report] = solve_cg(system, rhs, opt, state.u_hat);
  if (!report.converged)
    throw NumericalError("micro step " + std::to_string(next.step) + ": CG did not converge (residual " +
                         std::to_string(report.final_residual) + ")");
  for (std::size_t i = 0; i < nn; ++i)
    if (!std::isfinite(u[i]))
      throw NumericalError("micro step " + std::to_string(next.step) + ": non-finite concentration at node " +
                           std::to_string(i));
  next.u_hat = std::move(u);
  next.det = coef.det;
  next.last_solve = report;
  next.ledger.fluid = fluid_mass(next.u_hat, next.det);
  next.ledger.solid = solid_mass(next.radii);
  next.ledger.source = state.ledger.source + source_step;
  return next;
}

PerforatedHeatSolver::PerforatedHeatSolver(MicroMesh mesh, double diffusion, SpaceTimeField source, double cg_tol)
    : mesh_(std::move(mesh)), diffusion_(diffusion), source_(std::move(source)), cg_tol_(cg_tol), system_(mesh_) {
  if (!(diffusion_ > 0.0))
    throw ConfigError("diffusion coefficient must be positive");
}

std::vector<double> PerforatedHeatSolver::init(const SpaceField& u0) const {
  std::vector<double> u(mesh_.nodes.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    u[i] = u0(mesh_.nodes[i]);
  return u;
}

std::vector<double> PerforatedHeatSolver::step(const std::vector<double>& u, double t, double dt) const {
  if (!(dt > 0.0))
    throw DomainError("heat step needs dt > 0");
  const std::size_t nn = mesh_.nodes.size();
  const std::vector<Mat2> a(mesh_.elements.size(), diffusion_ * identity_matrix<2>());
  const auto m = system_.lumped_mass(std::vector<double>(mesh_.elements.size(), 1.0));
  const SparseMatrix system = system_.assemble(a, m, dt);
  std::vector<double> rhs(nn);
  for (std::size_t i = 0; i < nn; ++i)
    rhs[i] = m[i] * u[i] / dt + m[i] * source_(t + dt, mesh_.nodes[i]);
  CgOptions opt;
  opt.tol = cg_tol_;
  auto [next, report] = solve_cg(system, rhs, opt, u);
  if (!report.converged)
    throw NumericalError("heat step: CG did not converge");
  return next;
}

UnfoldingError unfold_compare(const MicroSimulator& micro, const MicroState& state, const MacroGrid& grid,
                              const MacroState& macro) {
  if (std::fabs(state.t - macro.t) > 1e-9 * std::max(1.0, std::fabs(state.t)))
    throw DomainError("unfolding compares states at different times");
  const auto& mesh = micro.mesh();
  const std::size_t nk = mesh.n_cells();
  std::vector<double> sum(nk, 0.0), weight(nk, 0.0);
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    const auto& el = mesh.elements[e];
    const auto k = static_cast<std::size_t>(mesh.cell_of_element[e]);
    const double w = state.det[e] * micro.system().geometry()[e].area;
    sum[k] += w * (state.u_hat[el[0]] + state.u_hat[el[1]] + state.u_hat[el[2]]) / 3.0;
    weight[k] += w;
  }
  const auto r_nodes = grid.element_to_nodes(macro.r);
  UnfoldingError out;
  out.epsilon = mesh.epsilon;
  double su = 0.0, sr = 0.0;
  const double cell_measure = mesh.epsilon * mesh.epsilon;
  for (std::size_t k = 0; k < nk; ++k) {
    const Vec2 c = mesh.cell_centre_of(static_cast<int>(k));
    const double mean = sum[k] / weight[k];
    const double u0 = grid.interpolate(macro.u, c);
    const double du = mean - u0;
    const double dr = state.radii[k] - grid.interpolate(r_nodes, c);
    out.per_cell_means.push_back(mean);
    out.macro_at_centres.push_back(u0);
    su += cell_measure * du * du;
    sr += cell_measure * dr * dr;
  }
  out.l2_error = std::sqrt(su);
  out.r_l2_error = std::sqrt(sr);
  return out;
}

void write_micro_snapshot(std::ostream& os, const MicroMesh& mesh, const MicroState& state) {
  os << "x1,x2,u_hat\n";
  char buf[128];
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", mesh.nodes[i][0], mesh.nodes[i][1], state.u_hat[i]);
    os << buf;
  }
}

void write_cell_series_header(std::ostream& os) { os << "t,k1,k2,r,r_rate\n"; }

void write_cell_series_rows(std::ostream& os, const MicroMesh& mesh, const MicroState& state) {
  char buf[160];
  for (std::size_t k = 0; k < mesh.n_cells(); ++k) {
    const auto idx = mesh.cell_index(static_cast<int>(k));
    std::snprintf(buf, sizeof buf, "%.17g,%d,%d,%.17g,%.17g\n", state.t, idx[0], idx[1], state.radii[k],
                  state.radii_rate[k]);
    os << buf;
  }
}

} // namespace evohom
