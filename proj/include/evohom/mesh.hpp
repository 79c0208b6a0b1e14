#pragma once

// Structured P1 triangulation of the perforated periodic cell (0,1)^2 minus a polygonal disc.

#include "evohom/linalg.hpp"

#include <array>
#include <utility>
#include <vector>

namespace evohom {

struct MeshSettings {
  int n_boundary = 80;   // polygon segments on the hole boundary, a multiple of 8
  double target_h = 0.05; // upper bound for the radial spacing

  // n_boundary = 8 ceil(0.5 / h), so the spacing along the outer square is at most h.
  static MeshSettings for_spacing(double h);
};

// Rays from the hole polygon to the outer square are split into graded layers. Each quad between
// two rays and two layers is cut along its better diagonal, or into four triangles around its
// centre when both diagonals tie, which keeps the mesh invariant under the symmetries of the square. Outer vertices sit at exact multiples of
// 1/(n_boundary/4), so opposite faces carry identical node traces.
struct PeriodicMesh {
  double radius = 0.0;
  int n_boundary = 0;
  int layers = 0;
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;    // counter-clockwise
  std::vector<std::array<int, 2>> hole_edges;   // polygon edges around the hole, counter-clockwise
  std::vector<std::pair<int, int>> periodic_pairs; // (node on x_i = 1, partner on x_i = 0)
  std::vector<int> dof;                         // vertex -> periodic degree of freedom
  int n_dofs = 0;
  double min_angle_deg = 0.0;

  double area() const;
  double hole_perimeter() const;
  // Area of the inscribed polygon bounding the hole.
  double hole_area() const;
};

// Throws DomainError for n_boundary < 16 or not a multiple of 8 and for target_h outside
// (0, 0.25); throws MeshQualityError if a triangle has an angle below 10 degrees.
PeriodicMesh build_reference_mesh(double radius, int n_boundary, double target_h);
inline PeriodicMesh build_reference_mesh(double radius, const MeshSettings& s) {
  return build_reference_mesh(radius, s.n_boundary, s.target_h);
}

struct TriangleGeometry {
  double area = 0.0;
  std::array<Vec2, 3> grad{}; // gradients of the three barycentric basis functions
};

TriangleGeometry triangle_geometry(const Vec2& a, const Vec2& b, const Vec2& c);

// Smallest interior angle of the triangle in degrees.
double min_angle_deg(const Vec2& a, const Vec2& b, const Vec2& c);

} // namespace evohom
