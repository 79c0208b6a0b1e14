#include "evohom/errors.hpp"
#include "evohom/mesh.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <set>

using namespace evohom;

namespace {

double polygon_area(double r, int n) { return 0.5 * n * r * r * std::sin(2.0 * std::numbers::pi / n); }

} // namespace

TEST(ReferenceMesh, OrientationAndQuality) {
  const auto m = build_reference_mesh(0.25, 64, 0.05);
  double worst = 180.0;
  for (const auto& t : m.triangles) {
    const auto g = triangle_geometry(m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]);
    EXPECT_GT(g.area, 0.0);
    worst = std::min(worst, min_angle_deg(m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]));
  }
  EXPECT_GE(worst, 20.0);
  EXPECT_DOUBLE_EQ(worst, m.min_angle_deg);
}

TEST(ReferenceMesh, AreaMatchesPolygonalHole) {
  for (int n : {32, 64}) {
    const auto m = build_reference_mesh(0.25, n, 0.05);
    EXPECT_NEAR(m.area(), 1.0 - polygon_area(0.25, n), 1e-12);
    EXPECT_NEAR(m.hole_area(), polygon_area(0.25, n), 1e-14);
    EXPECT_NEAR(m.hole_perimeter(), 2.0 * n * 0.25 * std::sin(std::numbers::pi / n), 1e-14);
  }
  const double exact = 1.0 - std::numbers::pi * 0.0625;
  const double e32 = std::fabs(build_reference_mesh(0.25, 32, 0.05).area() - exact) / exact;
  const double e64 = std::fabs(build_reference_mesh(0.25, 64, 0.05).area() - exact) / exact;
  EXPECT_NEAR(e32 / e64, 4.0, 0.1);
}

TEST(ReferenceMesh, PeriodicTracesMatch) {
  const auto m = build_reference_mesh(0.2, 80, 0.05);
  const int q = 80 / 4;
  std::set<int> left, bottom;
  for (std::size_t v = 0; v < m.vertices.size(); ++v) {
    if (m.vertices[v][0] == 0.0)
      left.insert(static_cast<int>(v));
    if (m.vertices[v][1] == 0.0)
      bottom.insert(static_cast<int>(v));
  }
  EXPECT_EQ(left.size(), static_cast<std::size_t>(q + 1));
  std::set<int> partnered_left, partnered_bottom;
  for (const auto& [hi, lo] : m.periodic_pairs) {
    const auto& a = m.vertices[hi];
    const auto& b = m.vertices[lo];
    EXPECT_EQ(m.dof[hi], m.dof[lo]);
    if (a[0] == 1.0 && b[0] == 0.0) {
      EXPECT_EQ(a[1], b[1]);
      partnered_left.insert(lo);
    } else {
      EXPECT_EQ(a[1], 1.0);
      EXPECT_EQ(b[1], 0.0);
      EXPECT_EQ(a[0], b[0]);
      partnered_bottom.insert(lo);
    }
  }
  EXPECT_EQ(partnered_left, left);
  EXPECT_EQ(partnered_bottom, bottom);
  // The outer square carries 4q vertices and 2q - 1 periodic classes.
  EXPECT_EQ(m.n_dofs, static_cast<int>(m.vertices.size()) - 2 * q - 1);
}

TEST(ReferenceMesh, Conforming) {
  const auto m = build_reference_mesh(0.3, 64, 0.05);
  std::map<std::pair<int, int>, int> edge_use;
  for (const auto& t : m.triangles)
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3];
      edge_use[{std::min(a, b), std::max(a, b)}]++;
    }
  int boundary = 0;
  for (const auto& [e, c] : edge_use) {
    EXPECT_LE(c, 2);
    if (c == 1)
      ++boundary;
  }
  EXPECT_EQ(boundary, 64 + 64);
  for (const auto& e : m.hole_edges)
    EXPECT_EQ(edge_use[std::make_pair(std::min(e[0], e[1]), std::max(e[0], e[1]))], 1);
}

TEST(ReferenceMesh, MirrorSymmetricVertexSet) {
  const auto m = build_reference_mesh(0.22, 80, 0.05);
  std::set<std::pair<double, double>> pts;
  for (const auto& v : m.vertices)
    pts.insert({v[0], v[1]});
  for (const auto& v : m.vertices) {
    EXPECT_TRUE(pts.count({v[1], v[0]})) << v[0] << " " << v[1];
    double nearest = 1.0;
    for (const auto& w : m.vertices)
      nearest = std::min(nearest, std::hypot(w[0] - (1.0 - v[0]), w[1] - v[1]));
    EXPECT_LT(nearest, 1e-15);
  }
}

TEST(ReferenceMesh, RejectsBadSettings) {
  EXPECT_THROW(build_reference_mesh(0.25, 12, 0.05), DomainError);
  EXPECT_THROW(build_reference_mesh(0.25, 60, 0.05), DomainError);
  EXPECT_THROW(build_reference_mesh(0.25, 64, 0.3), DomainError);
  EXPECT_THROW(build_reference_mesh(0.35, 32, 0.03), MeshQualityError);
}

TEST(ReferenceMesh, SpacingHelper) {
  EXPECT_EQ(MeshSettings::for_spacing(0.05).n_boundary, 80);
  EXPECT_EQ(MeshSettings::for_spacing(0.03).n_boundary, 136);
  EXPECT_EQ(MeshSettings::for_spacing(0.01).n_boundary, 400);
}

TEST(TriangleGeometry, GradientsOfBarycentrics) {
  const Vec2 a{0.1, 0.2}, b{0.7, 0.3}, c{0.2, 0.9};
  const auto g = triangle_geometry(a, b, c);
  EXPECT_NEAR(g.area, 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])), 1e-15);
  const std::array<Vec2, 3> p{a, b, c};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      // lambda_i(p_j) = delta_ij and lambda_i is affine, so grad_i . (p_j - p_i) = delta_ij - 1.
      const Vec2 d = p[j] - p[i];
      EXPECT_NEAR(dot(g.grad[i], d), (i == j ? 0.0 : -1.0), 1e-13);
    }
}
