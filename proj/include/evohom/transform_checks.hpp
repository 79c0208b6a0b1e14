#pragma once

// Sampled property suite for the cell transformation, shared by `evohom validate` and the
// acceptance tests.

#include "evohom/cell_transform.hpp"
#include "evohom/report.hpp"

#include <cstdint>
#include <vector>

namespace evohom {

// psi(r0, .) = id, R(r_Gamma, r0) = r_Gamma and R(r_Gamma, r) = r outside the annulus.
CheckList check_transform_identities(const TransformParams& params, double tol = 1e-12);

struct JacobianSummary {
  double max_jacobian_error = 0.0;  // analytic vs central differences in y
  double max_rgamma_error = 0.0;    // d psi / d r_Gamma vs central differences in r_Gamma
  double det_min = 0.0;             // measured c_J
  double det_max = 0.0;             // measured C
  double min_radial_slope = 0.0;    // min d_r R over the sample
};

// Samples `samples` pairs (r_Gamma, y) with the given seed.
JacobianSummary measure_jacobian(const TransformParams& params, int samples, double h, std::uint64_t seed);

CheckList check_transform_jacobian(const TransformParams& params, int samples = 500, double h = 1e-5,
                                   std::uint64_t seed = 20240611, double tol = 1e-7, double det_floor = 0.1);

// Sup-norm constants of psi_eps measured on one eps-resolution.
struct EpsConstants {
  double epsilon = 0.0;
  double displacement = 0.0; // max |psi_eps(x) - x| / eps
  double jacobian = 0.0;     // max Frobenius norm of Psi_eps
  double det = 0.0;          // max J_eps
  double lipschitz = 0.0;    // max |Psi_eps,2 - Psi_eps,1| / max |r_2 - r_1|
};

// Each cell carries one of four radii (r_min, r_max and two interior values) in a fixed pattern,
// so every resolution sees the same set of cell maps. The perturbed field shifts all radii by
// `perturbation` towards the box interior.
EpsConstants measure_eps_constants(const TransformParams& params, double epsilon, int points_per_cell = 24,
                                   double perturbation = 1e-3);

// Relative spread (max/min - 1) of each constant across the given resolutions.
CheckList check_eps_uniformity(const TransformParams& params, const std::vector<double>& epsilons,
                               double max_spread = 0.05, std::vector<EpsConstants>* constants = nullptr);

} // namespace evohom
