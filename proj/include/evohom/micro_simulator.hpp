#pragma once

// Transformed microscale problem on the fixed perforated domain Omega_eps: eps-scaled copies of
// the reference cell mesh tiled over the unit square, the pulled-back coefficients
//   A_eps = J Psi^-1 D Psi^-T,  B_eps = J Psi^-1 d_t psi_eps,
// an explicit surface reaction on every hole boundary and one radius ODE per cell.

#include "evohom/cell_transform.hpp"
#include "evohom/fields.hpp"
#include "evohom/kinetics.hpp"
#include "evohom/macro_solver.hpp"
#include "evohom/mesh.hpp"
#include "evohom/sparse.hpp"

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

namespace evohom {

struct GammaFacet {
  std::array<int, 2> nodes{};   // global node ids, counter-clockwise around the hole
  double reference_length = 0.0; // length of the edge in cell coordinates
};

struct MicroMesh {
  double epsilon = 1.0;
  int cells_per_side = 1;
  PeriodicMesh reference;
  std::vector<Vec2> nodes;
  std::vector<std::array<int, 3>> elements;
  std::vector<int> cell_of_element;      // cell k1 + n k2
  std::vector<int> reference_element;    // triangle of the reference mesh
  std::vector<std::vector<GammaFacet>> gamma_facets; // per cell
  std::vector<int> node_cell;            // one cell containing the node
  std::vector<Vec2> node_local;          // the node in that cell's coordinates

  std::size_t n_cells() const { return gamma_facets.size(); }
  std::array<int, 2> cell_index(int cell) const { return {cell % cells_per_side, cell / cells_per_side}; }
  Vec2 cell_centre_of(int cell) const;
  double area() const;
  double reference_perimeter() const { return reference.hole_perimeter(); }
};

// 1/epsilon must be an integer in [1, 64]. Nodes on shared faces are merged through a hash of
// their coordinates rounded to 1e-12; throws ConstructionError if an interface node finds no
// partner or two distinct nodes collide.
MicroMesh build_micro_mesh(const PeriodicMesh& reference, double epsilon);

// Fixed CSR pattern of the global P1 system. Both the transformed stepper and the plain heat
// solver assemble through it, so identical coefficients give bit-identical matrices.
class MicroSystem {
public:
  explicit MicroSystem(const MicroMesh& mesh);

  std::size_t size() const { return n_; }
  const std::vector<TriangleGeometry>& geometry() const { return geometry_; }

  // sum_e |e| (A_e grad_b) . grad_a plus mass_i / dt on the diagonal.
  SparseMatrix assemble(std::span<const Mat2> coefficients, std::span<const double> lumped_mass, double dt) const;
  // Lumped mass with element weights w_e |e|.
  std::vector<double> lumped_mass(std::span<const double> element_weight) const;

private:
  std::vector<std::array<int, 3>> elements_;
  std::size_t n_ = 0;
  std::vector<std::size_t> offsets_, columns_;
  std::vector<std::size_t> slots_; // 9 per element
  std::vector<std::size_t> diagonal_;
  std::vector<TriangleGeometry> geometry_;
};

// Running totals of fluid = sum_i M^J_ii u_i, solid = c_s eps^2 sum_k V(r_k) and the cumulative
// forcing sum_steps dt sum_i M^J_ii f_p(psi_eps(x_i)).
struct MicroLedger {
  double fluid = 0.0;
  double solid = 0.0;
  double source = 0.0;
  double total() const { return fluid + solid; }
};

struct MicroState {
  double t = 0.0;
  std::size_t step = 0;
  std::vector<double> u_hat;      // per node
  std::vector<double> radii;      // per cell
  std::vector<double> radii_rate; // per cell, (r^{n+1} - r^n) / dt of the last step
  std::vector<double> det;        // J_eps per element at the current radii
  MicroLedger ledger;
  SolveReport last_solve;
  std::size_t clamped_radii = 0;
};

struct MicroOptions {
  double diffusion = 1.0;
  double cg_tol = 1e-12;
  // Radii held at the reference radius and the surface reaction switched off.
  bool pin_radii = false;
  // Evaluate f_p at the transformed point psi_eps(x); false evaluates it at x.
  bool source_at_mapped_point = true;
};

class MicroSimulator {
public:
  // Throws ConfigError if the kinetics box leaves the transform box or the reference mesh was
  // not built at the transform's reference radius.
  MicroSimulator(MicroMesh mesh, TransformParams transform, KineticsSpec spec, SpaceTimeField source,
                 MicroOptions options = {});

  // Radii from r0 at the cell centres, u_hat from u0 at psi_eps(0, x).
  MicroState init(const SpaceField& u0, const SpaceField& r0) const;

  // Radius update from the surface average of f(u^n, r^n), then backward Euler for u_hat with
  // the new coefficients and explicit B and surface terms. Throws NumericalError on CG failure.
  MicroState step(const MicroState& state, double dt) const;

  const MicroMesh& mesh() const { return mesh_; }
  const MicroSystem& system() const { return system_; }
  const RadialProfile& profile() const { return profile_; }
  const KineticsSpec& kinetics() const { return spec_; }

  // Surface average over the hole polygon of cell k, by two-point Gauss on each facet.
  double surface_average_f(const MicroState& state, int cell) const;

  double fluid_mass(const std::vector<double>& u_hat, const std::vector<double>& det) const;
  double solid_mass(const std::vector<double>& radii) const;
  // sum_e J_e |e|, the measure of the transformed pore space.
  double pore_measure(const std::vector<double>& det) const;

  // sqrt(sum_i M^J_ii u_i^2) and sum_e |e| |grad u_hat|^2.
  double l2_norm(const MicroState& state) const;
  double gradient_norm_sq(const MicroState& state) const;

private:
  struct ElementCoefficients {
    std::vector<Mat2> a;
    std::vector<Vec2> b;
    std::vector<double> det;
    bool any_b = false;
  };
  ElementCoefficients coefficients(const std::vector<double>& radii, const std::vector<double>& rates) const;
  Vec2 mapped_node(int node, const std::vector<double>& radii) const;

  MicroMesh mesh_;
  TransformParams transform_;
  RadialProfile profile_;
  KineticsSpec spec_;
  SpaceTimeField source_;
  MicroOptions options_;
  MicroSystem system_;
  std::vector<Vec2> reference_centroids_;
};

// Perforated-domain heat equation with Neumann holes, A = D I and lumped mass, on the same mesh.
class PerforatedHeatSolver {
public:
  PerforatedHeatSolver(MicroMesh mesh, double diffusion, SpaceTimeField source, double cg_tol = 1e-12);

  std::vector<double> init(const SpaceField& u0) const;
  // Backward Euler from time t to t + dt.
  std::vector<double> step(const std::vector<double>& u, double t, double dt) const;

private:
  MicroMesh mesh_;
  double diffusion_;
  SpaceTimeField source_;
  double cg_tol_;
  MicroSystem system_;
};

struct UnfoldingError {
  double epsilon = 1.0;
  double l2_error = 0.0;   // sqrt(sum_k eps^2 (mean_k - u_0(centre_k))^2)
  double r_l2_error = 0.0; // sqrt(sum_k eps^2 (r_k - r(centre_k))^2)
  std::vector<double> per_cell_means;
  std::vector<double> macro_at_centres;
};

// Pore means are J-weighted; the macro radius is averaged onto macro nodes before interpolation.
// Throws DomainError if the two states are not at the same time.
UnfoldingError unfold_compare(const MicroSimulator& micro, const MicroState& state, const MacroGrid& grid,
                              const MacroState& macro);

// Node rows x1,x2,u_hat; cell rows t,k1,k2,r,r_rate.
void write_micro_snapshot(std::ostream& os, const MicroMesh& mesh, const MicroState& state);
void write_cell_series_header(std::ostream& os);
void write_cell_series_rows(std::ostream& os, const MicroMesh& mesh, const MicroState& state);

} // namespace evohom
