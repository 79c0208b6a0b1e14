#pragma once

// Homogenised degenerate parabolic equation for u coupled to the pointwise radius ODE on the
// unit square with zero-flux boundary:
//   d_t(theta(r) u) - div(D A_hom(r) grad u) = theta(r) f_p - c_s d_t V(r),  d_t r = f(u, r) / c_s.

#include "evohom/fields.hpp"
#include "evohom/kinetics.hpp"
#include "evohom/sparse.hpp"
#include "evohom/unit_cell.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <vector>

namespace evohom {

// Uniform n x n squares, each split along the diagonal from (i, j) to (i+1, j+1).
struct MacroGrid {
  int n = 0;
  double h = 0.0;
  std::vector<Vec2> nodes;                 // node (i, j) at i + (n + 1) j
  std::vector<std::array<int, 3>> elements; // counter-clockwise
  std::vector<Vec2> centroids;
  double element_area = 0.0;

  int node(int i, int j) const { return i + (n + 1) * j; }
  // P1 interpolation of nodal values at x in the closed unit square.
  double interpolate(const std::vector<double>& nodal, const Vec2& x) const;
  // Area-weighted average of element values onto nodes.
  std::vector<double> element_to_nodes(const std::vector<double>& per_element) const;
};

MacroGrid make_macro_grid(int n);

// Running totals of the discrete balance
//   fluid = sum_i M^theta_ii u_i, solid = c_s sum_e |e| V(r_e), source = sum_steps dt sum_i M^theta_ii f_p(x_i).
struct MassLedger {
  double fluid = 0.0;
  double solid = 0.0;
  double source = 0.0; // cumulative since t = 0
  double total() const { return fluid + solid; }
};

struct MacroState {
  double t = 0.0;
  std::size_t step = 0;
  std::vector<double> u;     // per node
  std::vector<double> r;     // per element
  std::vector<double> theta; // per element
  MassLedger ledger;
  SolveReport last_solve;
  std::size_t clamped_radii = 0; // radius updates that hit the box in the last step
};

struct MacroOptions {
  double diffusion = 1.0; // scalar D multiplying A_hom
  double cg_tol = 1e-12;
};

class MacroSolver {
public:
  MacroSolver(MacroGrid grid, EffectiveTensorTable table, KineticsSpec spec, SpaceTimeField source,
              MacroOptions options = {});

  // Throws ConfigError if an initial radius lies outside [r_min, r_max] or a value is not finite.
  MacroState init(const SpaceField& u0, const SpaceField& r0) const;

  // One split step: explicit radius update, then backward Euler for u with the new porosity.
  // Throws NumericalError on CG failure or non-finite values.
  MacroState step(const MacroState& state, double dt) const;

  const MacroGrid& grid() const { return grid_; }
  const EffectiveTensorTable& table() const { return table_; }
  const KineticsSpec& kinetics() const { return spec_; }

  // Lumped theta-weighted mass per node for the given element radii.
  std::vector<double> lumped_mass(const std::vector<double>& theta) const;
  double fluid_mass(const std::vector<double>& u, const std::vector<double>& theta) const;
  double solid_mass(const std::vector<double>& r) const;

private:
  MacroGrid grid_;
  EffectiveTensorTable table_;
  KineticsSpec spec_;
  SpaceTimeField source_;
  MacroOptions options_;
  std::vector<TriangleGeometry> geometry_;
};

struct MassBalanceReport {
  std::vector<double> defects; // per step |Delta(fluid + solid) - Delta source|
  double max_defect = 0.0;
};

// Requires at least two consecutive states.
MassBalanceReport mass_balance(const std::vector<MacroState>& states);

// L2 distance between the P1 field and a function, by the edge-midpoint rule.
double l2_error(const MacroGrid& grid, const std::vector<double>& u, const std::function<double(const Vec2&)>& exact);

// Node rows x1,x2,u,r,theta (r and theta averaged onto nodes) and the ledger row format.
void write_macro_snapshot(std::ostream& os, const MacroGrid& grid, const MacroState& state);
void write_ledger_header(std::ostream& os);
void write_ledger_row(std::ostream& os, const MacroState& state);

} // namespace evohom
