#pragma once

// Periodic cell problems on the perforated cell and the radius-dependent effective tensor.

#include "evohom/cell_transform.hpp"
#include "evohom/mesh.hpp"
#include "evohom/report.hpp"
#include "evohom/sparse.hpp"

#include <array>
#include <atomic>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace evohom {

// direct: the mesh resolves the hole of radius r itself and the coefficient is the identity.
// transformed: the mesh resolves the reference hole r0 and carries the pulled-back coefficient
// J Psi^-1 Psi^-T of the cell map towards radius r.
enum class CellMode { direct, transformed };

const char* to_string(CellMode mode);

struct CellSolution {
  int direction = 0;
  double radius = 0.0;
  CellMode mode = CellMode::transformed;
  std::vector<double> w; // per mesh vertex, periodic, zero mean over the degrees of freedom
  SolveReport report;
};

// Assembled cell problem for one (mesh, radius, mode). Element coefficients use one-point
// quadrature at the centroid.
class CellProblem {
public:
  // Throws DomainError if r is outside [r_min, r_max], or in direct mode if the mesh was not
  // built for radius r; transformed mode requires a mesh built for r0.
  CellProblem(const PeriodicMesh& mesh, const RadialProfile& profile, double r, CellMode mode);

  // Solves for the corrector w_j (j = 0, 1). Throws NumericalError if CG does not converge.
  CellSolution solve(int direction, double tol = 1e-12) const;

  // Energy form of the effective tensor, symmetric by construction.
  Mat2 effective_tensor(const std::array<CellSolution, 2>& w) const;

  // phi . (K w - b_j) for a test vector given on the degrees of freedom.
  double residual_against(const CellSolution& w, std::span<const double> phi) const;

  // Measure of the pore space represented by the mesh and coefficient.
  double pore_measure() const;
  const SparseMatrix& stiffness() const { return stiffness_; }
  const PeriodicMesh& mesh() const { return *mesh_; }

private:
  std::vector<double> load(int direction) const;

  const PeriodicMesh* mesh_;
  double radius_;
  CellMode mode_;
  std::vector<TriangleGeometry> geometry_;
  std::vector<Mat2> inv_jacobian_; // Psi^-1 at the element centroid
  std::vector<double> det_;        // J at the element centroid
  SparseMatrix stiffness_;
};

CellSolution solve_cell_problem(const PeriodicMesh& mesh, const RadialProfile& profile, double r, CellMode mode,
                                int direction);
Mat2 compute_A_hom(const PeriodicMesh& mesh, const RadialProfile& profile, double r, CellMode mode,
                   const std::array<CellSolution, 2>& w);

// Porosity 1 - V_2(r) and its surface S_1(r) = 2 pi r.
double porosity(double r);
double obstacle_surface(double r);

struct TensorEntry {
  double r = 0.0;
  Mat2 a_hom{};
  double theta = 0.0;
  double surface = 0.0;
};

struct TableLookup {
  Mat2 a_hom{};
  double theta = 0.0;
  double dtheta_dr = 0.0;
  bool clamped = false;
};

class EffectiveTensorTable {
public:
  EffectiveTensorTable() = default;
  // Radii must be strictly increasing with at least two entries; throws ConfigError otherwise.
  explicit EffectiveTensorTable(std::vector<TensorEntry> entries);
  EffectiveTensorTable(const EffectiveTensorTable& other) : entries_(other.entries_) {}
  EffectiveTensorTable& operator=(const EffectiveTensorTable& other) {
    entries_ = other.entries_;
    return *this;
  }

  // Isotropic table a I over the given radii with the closed-form porosity.
  static EffectiveTensorTable isotropic(double a, const std::vector<double>& radii);

  const std::vector<TensorEntry>& entries() const { return entries_; }
  double r_lo() const { return entries_.front().r; }
  double r_hi() const { return entries_.back().r; }

  // Piecewise-linear in r, entrywise. Radii outside the table are clamped with a warning (the
  // first one per table is logged). Porosity and its derivative use the closed form.
  TableLookup lookup(double r) const;
  std::size_t clamp_count() const { return clamp_count_; }

  // Columns r,A11,A12,A22,theta with 17 significant digits.
  void write_csv(std::ostream& os) const;
  void write_csv(const std::string& path) const;
  static EffectiveTensorTable read_csv(std::istream& is);
  static EffectiveTensorTable read_csv(const std::string& path);

private:
  std::vector<TensorEntry> entries_;
  mutable std::atomic<std::size_t> clamp_count_{0};
};

// One transformed-mode solve pair per radius on a single reference mesh at r0. Requires at least
// five radii inside [r_min, r_max], strictly increasing.
EffectiveTensorTable tabulate(const TransformParams& params, const std::vector<double>& radii,
                              const MeshSettings& mesh);

// Symmetry, positive definiteness, isotropy, Voigt bound and monotonicity in r.
CheckList check_table(const EffectiveTensorTable& table, double offdiag_tol = 1e-6);

// Equally spaced radii on [lo, hi].
std::vector<double> linear_grid(double lo, double hi, int count);

} // namespace evohom
