#include "evohom/cell_transform.hpp"

#include "evohom/errors.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <map>
#include <mutex>
#include <string>

namespace evohom {

void TransformParams::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("transform parameters: " + what); };
  if (!(r_min > 0.0))
    fail("r_min > 0 violated");
  if (!(r_min < r0))
    fail("r_min < r0 violated");
  if (!(r0 < r_max))
    fail("r0 < r_max violated");
  if (!(r_max < 0.5))
    fail("r_max < 0.5 violated");
  if (!(delta > 0.0))
    fail("delta > 0 violated");
  if (!(r_min - delta > 0.0))
    fail("r_min - delta > 0 violated");
  if (!(r_max + delta < 0.5))
    fail("r_max + delta < 0.5 violated");
  if (quadrature_points != 8 && quadrature_points != 16 && quadrature_points != 32 &&
      quadrature_points != 64)
    fail("quadrature_points must be one of 8, 16, 32, 64");
}

double profile_slope_inner(const TransformParams& p, double r_gamma) {
  const double dt = p.delta_tilde();
  return (r_gamma - p.r_min + dt) / (p.r0 - p.r_min + dt);
}

double profile_slope_outer(const TransformParams& p, double r_gamma) {
  const double dt = p.delta_tilde();
  return (p.r_max - r_gamma + dt) / (p.r_max - p.r0 + dt);
}

std::array<double, 4> profile_breakpoints(const TransformParams& p) {
  const double dt = p.delta_tilde();
  return {p.r_min - 2.0 * dt, p.r0 - dt, p.r0 + dt, p.r_max + 2.0 * dt};
}

double profile_raw_branch(const TransformParams& p, double r_gamma, double s, int branch) {
  const auto b = profile_breakpoints(p);
  switch (branch) {
  case 0:
    return s;
  case 1:
    return profile_slope_inner(p, r_gamma) * (s - b[0]) + b[0];
  case 2:
    return (s - p.r0) + r_gamma;
  case 3:
    return profile_slope_outer(p, r_gamma) * (s - b[3]) + b[3];
  case 4:
    return s;
  default:
    throw DomainError("profile_raw_branch: branch index must be in 0..4");
  }
}

double profile_raw(const TransformParams& p, double r_gamma, double s) {
  if (!(r_gamma >= p.r_min && r_gamma <= p.r_max))
    throw DomainError("profile_raw: r_gamma " + std::to_string(r_gamma) + " outside [r_min, r_max]");
  const auto b = profile_breakpoints(p);
  int branch = 4;
  if (s <= b[0])
    branch = 0;
  else if (s <= b[1])
    branch = 1;
  else if (s <= b[2])
    branch = 2;
  else if (s <= b[3])
    branch = 3;
  return profile_raw_branch(p, r_gamma, s, branch);
}

// Primitives of the normalised bump kernel eta on [-1, 1]:
//   phi0(z) = int_{-1}^z eta(t) dt,   phi1(z) = int_{-1}^z t eta(t) dt.
// Stored on a uniform grid with first and second derivatives (known in closed form) and
// evaluated by quintic Hermite interpolation.
class MollifierTable {
public:
  explicit MollifierTable(int quadrature_points) {
    switch (quadrature_points) {
    case 8:
      build<8>();
      break;
    case 16:
      build<16>();
      break;
    case 32:
      build<32>();
      break;
    default:
      build<64>();
      break;
    }
  }

  struct Primitives {
    double phi0;
    double phi1;
  };

  Primitives operator()(double z) const {
    if (z <= -1.0)
      return {0.0, 0.0};
    if (z >= 1.0)
      return {1.0, 0.0};
    const double u = (z + 1.0) / h_;
    std::size_t j = static_cast<std::size_t>(u);
    if (j >= kIntervals)
      j = kIntervals - 1;
    const double t = u - static_cast<double>(j);
    const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
    const double h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    const double h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    const double h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
    const double h3 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    const double h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    const double h5 = 0.5 * (t3 - 2.0 * t4 + t5);
    const double hh = h_ * h_;
    auto interp = [&](const Node& a, const Node& b) {
      return a.f * h0 + h_ * a.df * h1 + hh * a.ddf * h2 + b.f * h3 + h_ * b.df * h4 + hh * b.ddf * h5;
    };
    return {interp(phi0_[j], phi0_[j + 1]), interp(phi1_[j], phi1_[j + 1])};
  }

private:
  static constexpr std::size_t kIntervals = 2048;

  struct Node {
    double f;
    double df;
    double ddf;
  };

  static double raw_bump(double t) {
    const double q = 1.0 - t * t;
    return q > 0.0 ? std::exp(-1.0 / q) : 0.0;
  }
  // d/dt log(bump) = -2t / (1-t^2)^2
  static double log_slope(double t) {
    const double q = 1.0 - t * t;
    return -2.0 * t / (q * q);
  }

  template <int Q> void build() {
    using rule = boost::math::quadrature::gauss<double, Q>;
    h_ = 2.0 / static_cast<double>(kIntervals);
    std::vector<double> a0(kIntervals + 1, 0.0), a1(kIntervals + 1, 0.0);
    for (std::size_t j = 0; j < kIntervals; ++j) {
      const double lo = -1.0 + h_ * static_cast<double>(j);
      const double mid = lo + 0.5 * h_;
      double s0 = 0.0, s1 = 0.0;
      // Symmetric rule: abscissae stored for the non-negative half.
      const auto& x = rule::abscissa();
      const auto& w = rule::weights();
      for (std::size_t k = 0; k < x.size(); ++k) {
        const int copies = (x[k] == 0.0) ? 1 : 2;
        for (int c = 0; c < copies; ++c) {
          const double t = mid + (c == 0 ? 1.0 : -1.0) * 0.5 * h_ * x[k];
          const double f = raw_bump(t) * 0.5 * h_ * w[k];
          s0 += f;
          s1 += t * f;
        }
      }
      a0[j + 1] = a0[j] + s0;
      a1[j + 1] = a1[j] + s1;
    }
    norm_ = a0[kIntervals];
    phi0_.resize(kIntervals + 1);
    phi1_.resize(kIntervals + 1);
    for (std::size_t j = 0; j <= kIntervals; ++j) {
      const double t = -1.0 + h_ * static_cast<double>(j);
      const double e = (j == 0 || j == kIntervals) ? 0.0 : raw_bump(t) / norm_;
      const double de = (j == 0 || j == kIntervals) ? 0.0 : e * log_slope(t);
      phi0_[j] = {a0[j] / norm_, e, de};
      phi1_[j] = {a1[j] / norm_, t * e, e + t * de};
    }
    phi0_[kIntervals].f = 1.0;
    phi1_[kIntervals].f = 0.0;
  }

  double h_ = 0.0;
  double norm_ = 1.0;
  std::vector<Node> phi0_;
  std::vector<Node> phi1_;
};

namespace {

std::shared_ptr<const MollifierTable> shared_table(int quadrature_points) {
  static std::mutex mutex;
  static std::map<int, std::shared_ptr<const MollifierTable>> cache;
  std::lock_guard lock(mutex);
  auto& entry = cache[quadrature_points];
  if (!entry)
    entry = std::make_shared<const MollifierTable>(quadrature_points);
  return entry;
}

} // namespace

RadialProfile::RadialProfile(const TransformParams& params) : params_(params) {
  params_.validate();
  table_ = shared_table(params_.quadrature_points);
}

void RadialProfile::check_radius(double r_gamma) const {
  constexpr double slack = 1e-12;
  if (!(r_gamma >= params_.r_min - slack && r_gamma <= params_.r_max + slack))
    throw DomainError("cell transform: radius " + std::to_string(r_gamma) + " outside [r_min, r_max]");
}

bool RadialProfile::is_identity(double r_gamma, double r) const {
  if (!params_.normalize_mollifier)
    return false;
  return r_gamma == params_.r0 || r <= params_.r_min - params_.delta || r >= params_.r_max + params_.delta;
}

ProfileValue RadialProfile::operator()(double r_gamma, double r) const {
  check_radius(r_gamma);
  if (!(r >= 0.0))
    throw DomainError("cell transform: negative distance");
  const auto& p = params_;
  const double dt = p.delta_tilde();
  const auto b = profile_breakpoints(p);
  const double c1 = profile_slope_inner(p, r_gamma);
  const double c2 = profile_slope_outer(p, r_gamma);
  const double dc1 = 1.0 / (p.r0 - p.r_min + dt);
  const double dc2 = -1.0 / (p.r_max - p.r0 + dt);
  // Slope jumps of the unsmoothed profile at b_k and their r_Gamma-derivatives.
  const std::array<double, 4> jump{c1 - 1.0, 1.0 - c1, c2 - 1.0, 1.0 - c2};
  const std::array<double, 4> djump{dc1, -dc1, dc2, -dc2};

  double ramp_sum = 0.0, slope_sum = 0.0, dgamma_sum = 0.0;
  for (int k = 0; k < 4; ++k) {
    const double z = (r - b[k]) / dt;
    double m = 0.0, dm = 0.0;
    if (z >= 1.0) {
      m = z;
      dm = 1.0;
    } else if (z > -1.0) {
      // m(z) = int (z - t)_+ eta(t) dt = z phi0(z) - phi1(z),  m'(z) = phi0(z)
      const auto prim = (*table_)(z);
      m = z * prim.phi0 - prim.phi1;
      dm = prim.phi0;
    }
    ramp_sum += jump[k] * m;
    slope_sum += jump[k] * dm;
    dgamma_sum += djump[k] * m;
  }

  ProfileValue pv{r + dt * ramp_sum, 1.0 + slope_sum, dt * dgamma_sum};
  if (!p.normalize_mollifier) {
    pv.value *= dt;
    pv.d_r *= dt;
    pv.d_rgamma *= dt;
  }
  return pv;
}

double RadialProfile::inverse(double r_gamma, double target) const {
  check_radius(r_gamma);
  if (!(target >= 0.0))
    throw DomainError("cell transform inverse: negative distance");
  const auto& p = params_;
  double lo = p.r_min - p.delta;
  double hi = p.r_max + p.delta;
  if (p.normalize_mollifier && (r_gamma == p.r0 || target <= lo || target >= hi))
    return target;
  if (!p.normalize_mollifier) {
    lo = 0.0;
    hi = 1.0;
    while ((*this)(r_gamma, hi).value < target)
      hi *= 2.0;
  }

  // Safeguarded Newton on the strictly increasing R(r_gamma, .).
  double x = target;
  if (x <= lo || x >= hi)
    x = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const ProfileValue pv = (*this)(r_gamma, x);
    const double f = pv.value - target;
    if (std::fabs(f) <= 1e-15)
      return x;
    if (f > 0.0)
      hi = x;
    else
      lo = x;
    double next = x - f / pv.d_r;
    if (!(next > lo && next < hi))
      next = 0.5 * (lo + hi);
    if (std::fabs(next - x) <= 1e-16)
      return next;
    x = next;
  }
  throw NumericalError("cell transform inverse: no convergence for r_gamma=" + std::to_string(r_gamma) +
                       " target=" + std::to_string(target));
}

CellIndexing cell_decompose(double epsilon, const Vec2& x) {
  const double inv = 1.0 / epsilon;
  const long n = std::lround(inv);
  if (n < 1 || std::fabs(static_cast<double>(n) * epsilon - 1.0) > 1e-12)
    throw DomainError("cell_decompose: 1/epsilon must be an integer");
  CellIndexing c;
  c.epsilon = epsilon;
  for (int i = 0; i < 2; ++i) {
    const double scaled = x[i] * static_cast<double>(n);
    long k = static_cast<long>(std::floor(scaled));
    if (k >= n)
      k = n - 1;
    if (k < 0)
      k = 0;
    c.cell[i] = static_cast<int>(k);
    c.macro_part[i] = epsilon * static_cast<double>(k);
    c.micro_part[i] = scaled - static_cast<double>(k);
  }
  return c;
}

EpsTransformEval eval_psi_eps(const RadialProfile& profile, double epsilon, const CellRadii& radii,
                              const Vec2& x) {
  if (!(x[0] >= 0.0 && x[0] <= 1.0 && x[1] >= 0.0 && x[1] <= 1.0))
    throw DomainError("eval_psi_eps: point outside the unit square");
  EpsTransformEval out;
  out.indexing = cell_decompose(epsilon, x);
  if (radii.cells_per_side != static_cast<int>(std::lround(1.0 / epsilon)))
    throw DomainError("eval_psi_eps: radius field does not match epsilon");
  const std::size_t k = radii.index(out.indexing.cell[0], out.indexing.cell[1]);
  const double r = radii.radii.at(k);
  const double rate = radii.rates.empty() ? 0.0 : radii.rates.at(k);

  const auto ev = eval_psi<2>(profile, r, out.indexing.micro_part);
  out.identity = ev.identity;
  out.jacobian = ev.jacobian;
  out.det = ev.det;
  out.mapped_point = ev.identity ? x : out.indexing.macro_part + epsilon * ev.mapped_point;
  out.velocity = (epsilon * rate) * ev.dr_derivative;
  return out;
}

} // namespace evohom
