#include "evohom/mesh.hpp"

#include "evohom/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

namespace evohom {

MeshSettings MeshSettings::for_spacing(double h) {
  if (!(h > 0.0 && h < 0.25))
    throw DomainError("mesh spacing must lie in (0, 0.25), got " + std::to_string(h));
  MeshSettings s;
  s.n_boundary = 8 * static_cast<int>(std::ceil(0.5 / h - 1e-9));
  s.target_h = h;
  return s;
}

double PeriodicMesh::area() const {
  double a = 0.0;
  for (const auto& t : triangles)
    a += triangle_geometry(vertices[t[0]], vertices[t[1]], vertices[t[2]]).area;
  return a;
}

double PeriodicMesh::hole_perimeter() const {
  double p = 0.0;
  for (const auto& e : hole_edges)
    p += norm(vertices[e[1]] - vertices[e[0]]);
  return p;
}

double PeriodicMesh::hole_area() const {
  const Vec2 c = Vec2{0.5, 0.5};
  double a = 0.0;
  for (const auto& e : hole_edges) {
    const Vec2 p = vertices[e[0]] - c, q = vertices[e[1]] - c;
    a += 0.5 * (p[0] * q[1] - p[1] * q[0]);
  }
  return a;
}

TriangleGeometry triangle_geometry(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
  TriangleGeometry g;
  g.area = 0.5 * det;
  const std::array<const Vec2*, 3> p{&a, &b, &c};
  for (int i = 0; i < 3; ++i) {
    const Vec2& q1 = *p[(i + 1) % 3];
    const Vec2& q2 = *p[(i + 2) % 3];
    g.grad[i] = {(q1[1] - q2[1]) / det, (q2[0] - q1[0]) / det};
  }
  return g;
}

double min_angle_deg(const Vec2& a, const Vec2& b, const Vec2& c) {
  const std::array<Vec2, 3> p{a, b, c};
  double m = 180.0;
  for (int i = 0; i < 3; ++i) {
    const Vec2 u = p[(i + 1) % 3] - p[i], v = p[(i + 2) % 3] - p[i];
    const double cosv = std::clamp(dot(u, v) / (norm(u) * norm(v)), -1.0, 1.0);
    m = std::min(m, std::acos(cosv) * 180.0 / std::numbers::pi);
  }
  return m;
}

namespace {

// Unit direction of ray j out of n. Built from the first octant by exact reflections so that
// mirror-image rays have bit-identical (swapped or negated) components.
class RayDirections {
public:
  explicit RayDirections(int n) : n_(n), m_(n / 8), base_(static_cast<std::size_t>(m_ + 1)) {
    for (int j = 0; j <= m_; ++j) {
      const double t = 2.0 * std::numbers::pi * j / n;
      base_[j] = {std::cos(t), std::sin(t)};
    }
    base_[0] = {1.0, 0.0};
    base_[m_] = {std::sqrt(0.5), std::sqrt(0.5)};
  }

  Vec2 operator()(int j) const {
    const int quarter = 2 * m_;
    const int quadrant = j / quarter, k = j % quarter;
    Vec2 d = k <= m_ ? base_[k] : Vec2{base_[quarter - k][1], base_[quarter - k][0]};
    for (int i = 0; i < quadrant; ++i)
      d = {-d[1], d[0]};
    return d;
  }

private:
  int n_, m_;
  std::vector<Vec2> base_;
};

// Integer position (numerators over q = n/4) of the j-th point on the outer square, walking
// counter-clockwise from (1, 1/2) with uniform spacing.
std::array<int, 2> square_point(int j, int q) {
  const int s = (j + q / 2) % (4 * q); // arc length from (1,0) in units of 1/q
  const int side = s / q, t = s % q;
  switch (side) {
  case 0: return {q, t};
  case 1: return {q - t, q};
  case 2: return {0, q - t};
  default: return {t, 0};
  }
}

} // namespace

PeriodicMesh build_reference_mesh(double radius, int n_boundary, double target_h) {
  if (n_boundary < 16 || n_boundary % 8 != 0)
    throw DomainError("n_boundary must be a multiple of 8 and at least 16, got " + std::to_string(n_boundary));
  if (!(target_h > 0.0 && target_h < 0.25))
    throw DomainError("target_h must lie in (0, 0.25), got " + std::to_string(target_h));
  if (!(radius > 0.0 && radius < 0.5))
    throw DomainError("hole radius must lie in (0, 0.5), got " + std::to_string(radius));

  const int n = n_boundary, q = n / 4;
  const Vec2 centre = Vec2{0.5, 0.5};
  const RayDirections dirs(n);

  std::vector<Vec2> inner(n), outer(n);
  std::vector<std::array<int, 2>> outer_int(n);
  std::vector<double> ray_length(n);
  double mean_length = 0.0;
  for (int j = 0; j < n; ++j) {
    const Vec2 d = dirs(j);
    inner[j] = {centre[0] + radius * d[0], centre[1] + radius * d[1]};
    outer_int[j] = square_point(j, q);
    outer[j] = {static_cast<double>(outer_int[j][0]) / q, static_cast<double>(outer_int[j][1]) / q};
    ray_length[j] = norm(outer[j] - inner[j]);
    mean_length += ray_length[j] / n;
  }
  const double longest = *std::max_element(ray_length.begin(), ray_length.end());

  // Geometric grading from the tangential spacing at the hole to the one at the square.
  const double h_in = 2.0 * std::numbers::pi * radius / n, h_out = 4.0 / n;
  const double log_mean = std::fabs(h_out - h_in) < 1e-14 ? h_in : (h_out - h_in) / std::log(h_out / h_in);
  int layers = std::max(1, static_cast<int>(std::lround(mean_length / log_mean)));
  std::vector<double> t;
  for (;; ++layers) {
    t.assign(static_cast<std::size_t>(layers + 1), 0.0);
    const double g = layers > 1 ? std::pow(h_out / h_in, 1.0 / (layers - 1)) : 1.0;
    double total = 0.0, step = 1.0;
    for (int l = 1; l <= layers; ++l) {
      total += step;
      t[l] = total;
      step *= g;
    }
    double widest = 0.0;
    for (int l = 1; l <= layers; ++l) {
      t[l] /= total;
      widest = std::max(widest, t[l] - t[l - 1]);
    }
    t[layers] = 1.0;
    if (widest * longest <= target_h)
      break;
  }

  PeriodicMesh mesh;
  mesh.radius = radius;
  mesh.n_boundary = n;
  mesh.layers = layers;

  // Layer vertices (j, l) at index l * n + j, followed by the centres of quads split into four.
  const int L = layers;
  mesh.vertices.resize(static_cast<std::size_t>(n * (L + 1)));
  for (int l = 0; l <= L; ++l)
    for (int j = 0; j < n; ++j) {
      const Vec2& a = inner[j];
      const Vec2& b = outer[j];
      Vec2 p{a[0] + t[l] * (b[0] - a[0]), a[1] + t[l] * (b[1] - a[1])};
      if (l == L)
        p = b;
      mesh.vertices[l * n + j] = p;
    }
  auto node = [&](int j, int l) { return l * n + (j % n); };
  const int centre_offset = n * (L + 1);

  // Each quad takes whichever diagonal gives the larger minimum angle. The centre split is used on
  // ties, which keeps the choice equivariant under the square's reflections.
  mesh.min_angle_deg = 180.0;
  auto emit = [&](std::array<int, 3> tri) {
    const auto& va = mesh.vertices[tri[0]];
    const auto& vb = mesh.vertices[tri[1]];
    const auto& vc = mesh.vertices[tri[2]];
    if (triangle_geometry(va, vb, vc).area < 0.0)
      std::swap(tri[0], tri[1]);
    mesh.min_angle_deg = std::min(mesh.min_angle_deg, min_angle_deg(va, vb, vc));
    mesh.triangles.push_back(tri);
  };
  for (int l = 0; l < L; ++l)
    for (int j = 0; j < n; ++j) {
      const std::array<int, 4> quad{node(j, l), node(j + 1, l), node(j + 1, l + 1), node(j, l + 1)};
      const auto& a = mesh.vertices[quad[0]];
      const auto& b = mesh.vertices[quad[1]];
      const auto& c = mesh.vertices[quad[2]];
      const auto& d = mesh.vertices[quad[3]];
      const Vec2 centre_pt{((a[0] + b[0]) + (c[0] + d[0])) / 4.0, ((a[1] + b[1]) + (c[1] + d[1])) / 4.0};
      double split_centre = 180.0;
      for (int k = 0; k < 4; ++k)
        split_centre = std::min(split_centre, min_angle_deg(mesh.vertices[quad[k]], mesh.vertices[quad[(k + 1) % 4]], centre_pt));
      const double split_ac = std::min(min_angle_deg(a, b, c), min_angle_deg(a, c, d));
      const double split_bd = std::min(min_angle_deg(a, b, d), min_angle_deg(b, c, d));
      const bool tie = std::fabs(split_ac - split_bd) < 1e-9;
      if (!tie && std::max(split_ac, split_bd) >= split_centre) {
        if (split_ac > split_bd) {
          emit({quad[0], quad[1], quad[2]});
          emit({quad[0], quad[2], quad[3]});
        } else {
          emit({quad[0], quad[1], quad[3]});
          emit({quad[1], quad[2], quad[3]});
        }
      } else {
        const int ci = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(centre_pt);
        for (int k = 0; k < 4; ++k)
          emit({quad[k], quad[(k + 1) % 4], ci});
      }
    }
  if (mesh.min_angle_deg < 10.0)
    throw MeshQualityError("reference mesh has a triangle with minimum angle " +
                           std::to_string(mesh.min_angle_deg) + " degrees");

  for (int j = 0; j < n; ++j)
    mesh.hole_edges.push_back({node(j, 0), node(j + 1, 0)});

  // Periodic identification of outer vertices through their integer coordinates mod q.
  mesh.dof.assign(mesh.vertices.size(), -1);
  std::map<std::pair<int, int>, int> outer_dof;
  std::map<std::pair<int, int>, int> outer_vertex;
  int next = 0;
  for (int l = 0; l < L; ++l)
    for (int j = 0; j < n; ++j)
      mesh.dof[node(j, l)] = next++;
  for (int j = 0; j < n; ++j) {
    const auto& xy = outer_int[j];
    outer_vertex[{xy[0], xy[1]}] = node(j, L);
    const std::pair<int, int> key{xy[0] % q, xy[1] % q};
    auto [it, inserted] = outer_dof.try_emplace(key, next);
    if (inserted)
      ++next;
    mesh.dof[node(j, L)] = it->second;
  }
  for (int i = centre_offset; i < static_cast<int>(mesh.vertices.size()); ++i)
    mesh.dof[i] = next++;
  mesh.n_dofs = next;

  for (const auto& [xy, v] : outer_vertex) {
    if (xy.first == q)
      mesh.periodic_pairs.emplace_back(v, outer_vertex.at({0, xy.second}));
    if (xy.second == q)
      mesh.periodic_pairs.emplace_back(v, outer_vertex.at({xy.first, 0}));
  }
  return mesh;
}

} // namespace evohom
