#include "evohom/unit_cell.hpp"

#include "evohom/errors.hpp"
#include "evohom/fem.hpp"
#include "evohom/log.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace evohom {

const char* to_string(CellMode mode) { return mode == CellMode::direct ? "direct" : "transformed"; }

double porosity(double r) { return 1.0 - ball_volume(2, r); }
double obstacle_surface(double r) { return sphere_surface(2, r); }

namespace {

std::array<int, 3> element_dofs(const PeriodicMesh& m, const std::array<int, 3>& t) {
  return {m.dof[t[0]], m.dof[t[1]], m.dof[t[2]]};
}

std::string radius_text(double r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", r);
  return buf;
}

} // namespace

CellProblem::CellProblem(const PeriodicMesh& mesh, const RadialProfile& profile, double r, CellMode mode)
    : mesh_(&mesh), radius_(r), mode_(mode) {
  const auto& p = profile.params();
  if (!(r >= p.r_min && r <= p.r_max))
    throw DomainError("cell problem radius " + radius_text(r) + " outside [r_min, r_max]");
  const double mesh_r = mode == CellMode::direct ? r : p.r0;
  if (std::fabs(mesh.radius - mesh_r) > 1e-14)
    throw DomainError(std::string(to_string(mode)) + " cell problem at r=" + radius_text(r) +
                      " needs a mesh built for radius " + radius_text(mesh_r));

  const std::size_t ne = mesh.triangles.size();
  geometry_.resize(ne);
  inv_jacobian_.assign(ne, identity_matrix<2>());
  det_.assign(ne, 1.0);
  TripletBuffer k;
  k.reserve(9 * ne);
  for (std::size_t e = 0; e < ne; ++e) {
    const auto& t = mesh.triangles[e];
    const Vec2 &a = mesh.vertices[t[0]], &b = mesh.vertices[t[1]], &c = mesh.vertices[t[2]];
    geometry_[e] = triangle_geometry(a, b, c);
    Mat2 coeff = identity_matrix<2>();
    if (mode == CellMode::transformed) {
      const auto ev = eval_psi<2>(profile, r, centroid(a, b, c));
      if (!ev.identity) {
        inv_jacobian_[e] = inverse(ev.jacobian);
        det_[e] = ev.det;
        coeff = ev.det * (inv_jacobian_[e] * transpose(inv_jacobian_[e]));
      }
    }
    add_element_stiffness(k, element_dofs(mesh, t), geometry_[e], coeff);
  }
  const auto n = static_cast<std::size_t>(mesh.n_dofs);
  stiffness_ = k.finalize(n, n);
}

std::vector<double> CellProblem::load(int direction) const {
  std::vector<double> b(static_cast<std::size_t>(mesh_->n_dofs), 0.0);
  Vec2 ej{};
  ej[static_cast<std::size_t>(direction)] = 1.0;
  for (std::size_t e = 0; e < geometry_.size(); ++e) {
    const Vec2 flux = det_[e] * (inv_jacobian_[e] * ej);
    const auto dofs = element_dofs(*mesh_, mesh_->triangles[e]);
    for (int i = 0; i < 3; ++i)
      b[static_cast<std::size_t>(dofs[i])] -= geometry_[e].area * dot(flux, geometry_[e].grad[i]);
  }
  return b;
}

CellSolution CellProblem::solve(int direction, double tol) const {
  if (direction < 0 || direction > 1)
    throw DomainError("cell problem direction must be 0 or 1");
  const auto b = load(direction);
  CgOptions opt;
  opt.tol = tol;
  opt.zero_mean_constraint = true;
  auto [x, report] = solve_cg(stiffness_, b, opt);
  if (!report.converged)
    throw NumericalError("cell problem at r=" + radius_text(radius_) + " (" + to_string(mode_) +
                         ") did not converge: residual " + std::to_string(report.final_residual));
  CellSolution s;
  s.direction = direction;
  s.radius = radius_;
  s.mode = mode_;
  s.report = report;
  s.w.resize(mesh_->vertices.size());
  for (std::size_t v = 0; v < s.w.size(); ++v)
    s.w[v] = x[static_cast<std::size_t>(mesh_->dof[v])];
  return s;
}

Mat2 CellProblem::effective_tensor(const std::array<CellSolution, 2>& w) const {
  Mat2 a{};
  for (std::size_t e = 0; e < geometry_.size(); ++e) {
    const auto& t = mesh_->triangles[e];
    const Mat2 inv_t = transpose(inv_jacobian_[e]);
    std::array<Vec2, 2> field{};
    for (std::size_t i = 0; i < 2; ++i) {
      Vec2 grad{};
      for (int k = 0; k < 3; ++k)
        grad = grad + w[i].w[static_cast<std::size_t>(t[k])] * geometry_[e].grad[k];
      field[i] = inv_t * grad;
      field[i][i] += 1.0;
    }
    const double weight = geometry_[e].area * det_[e];
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        a[i][j] += weight * dot(field[i], field[j]);
  }
  a[1][0] = a[0][1];
  return a;
}

double CellProblem::residual_against(const CellSolution& w, std::span<const double> phi) const {
  std::vector<double> x(static_cast<std::size_t>(mesh_->n_dofs), 0.0);
  for (std::size_t v = 0; v < w.w.size(); ++v)
    x[static_cast<std::size_t>(mesh_->dof[v])] = w.w[v];
  const auto kx = stiffness_.multiply(x);
  const auto b = load(w.direction);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    s += phi[i] * (kx[i] - b[i]);
  return s;
}

double CellProblem::pore_measure() const {
  double s = 0.0;
  for (std::size_t e = 0; e < geometry_.size(); ++e)
    s += geometry_[e].area * det_[e];
  return s;
}

CellSolution solve_cell_problem(const PeriodicMesh& mesh, const RadialProfile& profile, double r, CellMode mode,
                                int direction) {
  return CellProblem(mesh, profile, r, mode).solve(direction);
}

Mat2 compute_A_hom(const PeriodicMesh& mesh, const RadialProfile& profile, double r, CellMode mode,
                   const std::array<CellSolution, 2>& w) {
  for (const auto& s : w)
    if (s.radius != r || s.mode != mode || s.w.size() != mesh.vertices.size())
      throw DomainError("cell solutions do not belong to this mesh, radius and mode");
  return CellProblem(mesh, profile, r, mode).effective_tensor(w);
}

EffectiveTensorTable::EffectiveTensorTable(std::vector<TensorEntry> entries) : entries_(std::move(entries)) {
  if (entries_.size() < 2)
    throw ConfigError("effective tensor table needs at least two radii");
  for (std::size_t i = 1; i < entries_.size(); ++i)
    if (!(entries_[i].r > entries_[i - 1].r))
      throw ConfigError("effective tensor table radii must be strictly increasing");
}

EffectiveTensorTable EffectiveTensorTable::isotropic(double a, const std::vector<double>& radii) {
  std::vector<TensorEntry> e;
  for (double r : radii)
    e.push_back({r, {{{a, 0.0}, {0.0, a}}}, porosity(r), obstacle_surface(r)});
  return EffectiveTensorTable(std::move(e));
}

TableLookup EffectiveTensorTable::lookup(double r) const {
  TableLookup out;
  double rc = r;
  if (r < r_lo() || r > r_hi() || !std::isfinite(r)) {
    rc = std::clamp(std::isfinite(r) ? r : r_lo(), r_lo(), r_hi());
    out.clamped = true;
    if (clamp_count_++ == 0)
      log_warning("tensor table lookup at r=" + radius_text(r) + " clamped to [" + radius_text(r_lo()) + ", " +
                  radius_text(r_hi()) + "]");
  }
  auto it = std::upper_bound(entries_.begin(), entries_.end(), rc,
                             [](double v, const TensorEntry& e) { return v < e.r; });
  std::size_t hi = static_cast<std::size_t>(it - entries_.begin());
  if (hi == 0)
    hi = 1;
  if (hi >= entries_.size())
    hi = entries_.size() - 1;
  const auto& e0 = entries_[hi - 1];
  const auto& e1 = entries_[hi];
  if (rc == e0.r) {
    out.a_hom = e0.a_hom;
  } else if (rc == e1.r) {
    out.a_hom = e1.a_hom;
  } else {
    const double s = (rc - e0.r) / (e1.r - e0.r);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        out.a_hom[i][j] = (1.0 - s) * e0.a_hom[i][j] + s * e1.a_hom[i][j];
  }
  out.theta = porosity(rc);
  out.dtheta_dr = -obstacle_surface(rc);
  return out;
}

void EffectiveTensorTable::write_csv(std::ostream& os) const {
  os << "r,A11,A12,A22,theta\n";
  char buf[256];
  for (const auto& e : entries_) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", e.r, e.a_hom[0][0], e.a_hom[0][1],
                  e.a_hom[1][1], e.theta);
    os << buf;
  }
}

void EffectiveTensorTable::write_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f)
    throw ConfigError("cannot write tensor table " + path);
  write_csv(f);
}

EffectiveTensorTable EffectiveTensorTable::read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "r,A11,A12,A22,theta")
    throw ConfigError("tensor table header must be r,A11,A12,A22,theta");
  std::vector<TensorEntry> out;
  while (std::getline(is, line)) {
    if (line.empty())
      continue;
    std::istringstream row(line);
    std::array<double, 5> v{};
    for (std::size_t i = 0; i < 5; ++i) {
      std::string cell;
      if (!std::getline(row, cell, ','))
        throw ConfigError("tensor table row has fewer than five columns: " + line);
      std::size_t used = 0;
      try {
        v[i] = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != cell.size() || cell.empty())
        throw ConfigError("tensor table entry is not a number: " + cell);
    }
    out.push_back({v[0], {{{v[1], v[2]}, {v[2], v[3]}}}, v[4], obstacle_surface(v[0])});
  }
  return EffectiveTensorTable(std::move(out));
}

EffectiveTensorTable EffectiveTensorTable::read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f)
    throw ConfigError("cannot read tensor table " + path);
  return read_csv(f);
}

EffectiveTensorTable tabulate(const TransformParams& params, const std::vector<double>& radii,
                              const MeshSettings& settings) {
  params.validate();
  if (radii.size() < 5)
    throw ConfigError("tensor table grid needs at least five radii");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (radii[i] < params.r_min || radii[i] > params.r_max)
      throw ConfigError("tensor table radius " + radius_text(radii[i]) + " outside [r_min, r_max]");
    if (i > 0 && !(radii[i] > radii[i - 1]))
      throw ConfigError("tensor table radii must be strictly increasing");
  }
  const RadialProfile profile(params);
  const auto mesh = build_reference_mesh(params.r0, settings);
  std::vector<TensorEntry> entries;
  for (double r : radii) {
    try {
      const CellProblem problem(mesh, profile, r, CellMode::transformed);
      const std::array<CellSolution, 2> w{problem.solve(0), problem.solve(1)};
      entries.push_back({r, problem.effective_tensor(w), porosity(r), obstacle_surface(r)});
    } catch (const NumericalError& e) {
      throw NumericalError("tabulation failed at r=" + radius_text(r) + ": " + e.what());
    }
  }
  return EffectiveTensorTable(std::move(entries));
}

CheckList check_table(const EffectiveTensorTable& table, double offdiag_tol) {
  CheckList out;
  double asym = 0.0, offdiag = 0.0, voigt = -1e300, min_eig = 1e300, rise = -1e300, theta_rise = -1e300;
  std::string w_asym, w_off, w_voigt, w_eig, w_rise, w_theta;
  const auto& e = table.entries();
  for (std::size_t i = 0; i < e.size(); ++i) {
    const auto& a = e[i].a_hom;
    const std::string at = "r=" + radius_text(e[i].r);
    if (std::fabs(a[0][1] - a[1][0]) >= asym) {
      asym = std::fabs(a[0][1] - a[1][0]);
      w_asym = at;
    }
    if (std::fabs(a[0][1]) >= offdiag) {
      offdiag = std::fabs(a[0][1]);
      w_off = at;
    }
    const double excess = std::max(a[0][0], a[1][1]) - porosity(e[i].r);
    if (excess >= voigt) {
      voigt = excess;
      w_voigt = at;
    }
    const double tr = a[0][0] + a[1][1], det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    const double eig = 0.5 * tr - std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
    if (eig <= min_eig) {
      min_eig = eig;
      w_eig = at;
    }
    if (i > 0) {
      const double d = std::max(a[0][0] - e[i - 1].a_hom[0][0], a[1][1] - e[i - 1].a_hom[1][1]);
      if (d >= rise) {
        rise = d;
        w_rise = at;
      }
      const double dt = e[i].theta - e[i - 1].theta;
      if (dt >= theta_rise) {
        theta_rise = dt;
        w_theta = at;
      }
    }
  }
  out.add(bounded_check("tensor_symmetric", asym, 1e-12, w_asym));
  CheckResult spd{"tensor_positive_definite", min_eig > 0.0, min_eig, 0.0, {}};
  if (!spd.passed)
    spd.witness = w_eig;
  out.add(spd);
  out.add(bounded_check("tensor_offdiagonal", offdiag, offdiag_tol, w_off));
  CheckResult v{"voigt_bound", voigt <= 0.0, voigt, 0.0, {}};
  if (!v.passed)
    v.witness = w_voigt;
  out.add(v);
  CheckResult dec{"tensor_decreasing", rise < 0.0, rise, 0.0, {}};
  if (!dec.passed)
    dec.witness = w_rise;
  out.add(dec);
  CheckResult th{"porosity_decreasing", theta_rise < 0.0, theta_rise, 0.0, {}};
  if (!th.passed)
    th.witness = w_theta;
  out.add(th);
  return out;
}

std::vector<double> linear_grid(double lo, double hi, int count) {
  if (count < 2)
    throw ConfigError("a radius grid needs at least two points");
  std::vector<double> g(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    g[static_cast<std::size_t>(i)] = i == count - 1 ? hi : lo + (hi - lo) * i / (count - 1);
  return g;
}

} // namespace evohom
