#pragma once

// Radial cell transformation of the periodic reference cell Y = (0,1)^N.
//
// The obstacle of reference radius r0 centred at x_M is mapped to an obstacle of radius r_Gamma
// by rescaling the distance to x_M with a mollified piecewise-linear profile R(r_Gamma, .).
// The map is the identity outside the annulus r_min - delta < |y - x_M| < r_max + delta, so the
// cell maps of neighbouring cells with different radii glue continuously.

#include "evohom/linalg.hpp"

#include <array>
#include <memory>
#include <span>
#include <vector>

namespace evohom {

struct TransformParams {
  double r_min = 0.15;
  double r_max = 0.35;
  double r0 = 0.25;
  double delta = 0.09;
  // Gauss-Legendre order used to tabulate the mollifier primitives.
  int quadrature_points = 32;
  // When false the mollifier is used without the 1/delta_tilde scaling, i.e. the kernel no
  // longer integrates to one. Only useful as a regression target for the validator.
  bool normalize_mollifier = true;

  double delta_tilde() const { return delta / 3.0; }

  // Throws ConfigError naming the first violated inequality.
  void validate() const;
};

// Cell centre x_M = (0.5, ..., 0.5).
template <std::size_t N> constexpr Vec<N> cell_centre() {
  Vec<N> c{};
  c.fill(0.5);
  return c;
}

// Slopes of the outer linear pieces of the unsmoothed profile.
double profile_slope_inner(const TransformParams& p, double r_gamma);
double profile_slope_outer(const TransformParams& p, double r_gamma);

// Breakpoints r_min - 2dt, r0 - dt, r0 + dt, r_max + 2dt of the unsmoothed profile (dt = delta/3).
std::array<double, 4> profile_breakpoints(const TransformParams& p);

// Evaluates branch 0..4 of the unsmoothed profile at s, ignoring the branch's interval.
double profile_raw_branch(const TransformParams& p, double r_gamma, double s, int branch);

// Unsmoothed piecewise-linear profile. Throws DomainError if r_gamma is outside [r_min, r_max].
double profile_raw(const TransformParams& p, double r_gamma, double s);

struct ProfileValue {
  double value = 0.0;
  double d_r = 0.0;      // partial derivative in the distance r
  double d_rgamma = 0.0; // partial derivative in the target radius r_Gamma
};

class MollifierTable;

// The mollified profile R(r_Gamma, r).
//
// The unsmoothed profile is r plus a sum of ramps (r - b_k)_+ whose slope jumps are affine in
// r_Gamma, so its convolution with the bump kernel reduces to one tabulated primitive of the
// kernel evaluated at (r - b_k)/dt. Values and both derivatives are then exact up to the
// tabulation error (well below 1e-12).
class RadialProfile {
public:
  explicit RadialProfile(const TransformParams& params);

  const TransformParams& params() const { return params_; }

  // Throws DomainError if r_gamma is outside [r_min, r_max] or r < 0.
  ProfileValue operator()(double r_gamma, double r) const;

  // Solves R(r_gamma, rho) = target for rho >= 0. R is strictly increasing in rho.
  double inverse(double r_gamma, double target) const;

  // True where R(r_gamma, .) is exactly the identity at distance r.
  bool is_identity(double r_gamma, double r) const;

  void check_radius(double r_gamma) const;

private:
  TransformParams params_;
  std::shared_ptr<const MollifierTable> table_;
};

template <std::size_t N> struct TransformEval {
  Vec<N> mapped_point{};
  Mat<N> jacobian = identity_matrix<N>();
  double det = 1.0;
  Vec<N> dr_derivative{}; // d psi / d r_Gamma
  bool identity = true;   // mapped_point == y and jacobian == I exactly
};

// psi(r_Gamma, y) = x_M + R(r_Gamma, rho) (y - x_M) / rho with rho = |y - x_M|, its Jacobian
// R'(rho) P + R(rho)/rho (I - P) (P the radial projector), det R'(rho) (R(rho)/rho)^(N-1), and
// the derivative with respect to r_Gamma.
template <std::size_t N>
TransformEval<N> eval_psi(const RadialProfile& profile, double r_gamma, const Vec<N>& y) {
  profile.check_radius(r_gamma);
  const auto& p = profile.params();
  const Vec<N> d = y - cell_centre<N>();
  const double rho = norm(d);

  TransformEval<N> ev;
  ev.mapped_point = y;
  if (rho <= p.r_min - p.delta || rho >= p.r_max + p.delta)
    return ev;

  const ProfileValue pv = profile(r_gamma, rho);
  const Vec<N> e = (1.0 / rho) * d;
  ev.dr_derivative = pv.d_rgamma * e;
  if (profile.is_identity(r_gamma, rho))
    return ev;

  const double ratio = pv.value / rho;
  ev.identity = false;
  ev.mapped_point = cell_centre<N>() + pv.value * e;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j)
      ev.jacobian[i][j] = (i == j ? ratio : 0.0) + (pv.d_r - ratio) * e[i] * e[j];
  ev.det = pv.d_r * std::pow(ratio, N - 1);
  return ev;
}

template <std::size_t N>
Vec<N> eval_psi_inverse(const RadialProfile& profile, double r_gamma, const Vec<N>& z) {
  profile.check_radius(r_gamma);
  const Vec<N> d = z - cell_centre<N>();
  const double target = norm(d);
  const double rho = profile.inverse(r_gamma, target);
  if (rho == target)
    return z;
  return cell_centre<N>() + (rho / target) * d;
}

// Decomposition x = [x] + eps {x} into the cell origin [x] = eps k and the cell-local
// coordinate {x} in [0,1)^2.
struct CellIndexing {
  double epsilon = 1.0;
  std::array<int, 2> cell{};
  Vec2 macro_part{};
  Vec2 micro_part{};
};

// Requires 1/epsilon integral; points on the far faces x_i = 1 are assigned to the last cell.
CellIndexing cell_decompose(double epsilon, const Vec2& x);

// One radius (and radius rate) per eps-cell, cell (k1, k2) stored at k1 + n k2.
struct CellRadii {
  int cells_per_side = 1;
  std::vector<double> radii;
  std::vector<double> rates; // empty means zero

  std::size_t index(int k1, int k2) const {
    return static_cast<std::size_t>(k1) + static_cast<std::size_t>(cells_per_side) * static_cast<std::size_t>(k2);
  }
};

struct EpsTransformEval {
  CellIndexing indexing;
  Vec2 mapped_point{};   // psi_eps(x)
  Mat2 jacobian{};       // Psi_eps(x), equal to the cell-level Jacobian
  double det = 1.0;      // J_eps(x)
  Vec2 velocity{};       // d_t psi_eps = eps d_{r_Gamma} psi(r_k, {x}) d_t r_k
  bool identity = true;
};

// psi_eps(x) = [x] + eps psi(r_k, {x}). Throws DomainError for x outside the closed unit square.
EpsTransformEval eval_psi_eps(const RadialProfile& profile, double epsilon, const CellRadii& radii,
                              const Vec2& x);

} // namespace evohom
