#pragma once

// P1 element kernels shared by the cell, macro and micro assemblies.

#include "evohom/linalg.hpp"
#include "evohom/mesh.hpp"
#include "evohom/sparse.hpp"

#include <array>
#include <span>

namespace evohom {

// K_ab += |T| (A grad_b) . grad_a for the three local basis functions.
inline void add_element_stiffness(TripletBuffer& k, const std::array<int, 3>& dofs, const TriangleGeometry& g,
                                  const Mat2& a) {
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const Vec2 flux = a * g.grad[j];
      k.add(static_cast<std::size_t>(dofs[i]), static_cast<std::size_t>(dofs[j]), g.area * dot(flux, g.grad[i]));
    }
  }
}

// Lumped mass: each vertex receives a third of the element weight.
inline void add_element_lumped_mass(std::span<double> diag, const std::array<int, 3>& dofs, double weight) {
  for (int i = 0; i < 3; ++i)
    diag[static_cast<std::size_t>(dofs[i])] += weight / 3.0;
}

inline Vec2 centroid(const Vec2& a, const Vec2& b, const Vec2& c) {
  return {(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0};
}

} // namespace evohom
