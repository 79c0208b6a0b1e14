#pragma once

// Small fixed-size vectors and matrices for pointwise geometry.

#include <array>
#include <cmath>
#include <numbers>

namespace evohom {

template <std::size_t N> using Vec = std::array<double, N>;
template <std::size_t N> using Mat = std::array<std::array<double, N>, N>;

using Vec2 = Vec<2>;
using Mat2 = Mat<2>;

template <std::size_t N> constexpr Vec<N> operator+(const Vec<N>& a, const Vec<N>& b) {
  Vec<N> c{};
  for (std::size_t i = 0; i < N; ++i)
    c[i] = a[i] + b[i];
  return c;
}

template <std::size_t N> constexpr Vec<N> operator-(const Vec<N>& a, const Vec<N>& b) {
  Vec<N> c{};
  for (std::size_t i = 0; i < N; ++i)
    c[i] = a[i] - b[i];
  return c;
}

template <std::size_t N> constexpr Vec<N> operator*(double s, const Vec<N>& a) {
  Vec<N> c{};
  for (std::size_t i = 0; i < N; ++i)
    c[i] = s * a[i];
  return c;
}

template <std::size_t N> constexpr double dot(const Vec<N>& a, const Vec<N>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < N; ++i)
    s += a[i] * b[i];
  return s;
}

template <std::size_t N> inline double norm(const Vec<N>& a) { return std::sqrt(dot(a, a)); }

template <std::size_t N> constexpr Mat<N> identity_matrix() {
  Mat<N> m{};
  for (std::size_t i = 0; i < N; ++i)
    m[i][i] = 1.0;
  return m;
}

template <std::size_t N> constexpr Vec<N> operator*(const Mat<N>& m, const Vec<N>& v) {
  Vec<N> c{};
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j)
      c[i] += m[i][j] * v[j];
  return c;
}

template <std::size_t N> constexpr Mat<N> operator*(const Mat<N>& a, const Mat<N>& b) {
  Mat<N> c{};
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t k = 0; k < N; ++k)
      for (std::size_t j = 0; j < N; ++j)
        c[i][j] += a[i][k] * b[k][j];
  return c;
}

template <std::size_t N> constexpr Mat<N> operator*(double s, const Mat<N>& a) {
  Mat<N> c{};
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j)
      c[i][j] = s * a[i][j];
  return c;
}

template <std::size_t N> constexpr Mat<N> operator-(const Mat<N>& a, const Mat<N>& b) {
  Mat<N> c{};
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j)
      c[i][j] = a[i][j] - b[i][j];
  return c;
}

template <std::size_t N> constexpr Mat<N> transpose(const Mat<N>& a) {
  Mat<N> c{};
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j)
      c[i][j] = a[j][i];
  return c;
}

// Largest absolute entry.
template <std::size_t N> inline double max_abs(const Mat<N>& a) {
  double m = 0.0;
  for (const auto& row : a)
    for (double v : row)
      m = std::fmax(m, std::fabs(v));
  return m;
}

template <std::size_t N> inline double max_abs(const Vec<N>& a) {
  double m = 0.0;
  for (double v : a)
    m = std::fmax(m, std::fabs(v));
  return m;
}

inline double determinant(const Mat<2>& a) { return a[0][0] * a[1][1] - a[0][1] * a[1][0]; }

inline double determinant(const Mat<3>& a) {
  return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
         a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
         a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
}

inline Mat<2> inverse(const Mat<2>& a) {
  const double d = determinant(a);
  return {{{a[1][1] / d, -a[0][1] / d}, {-a[1][0] / d, a[0][0] / d}}};
}

inline Mat<3> inverse(const Mat<3>& a) {
  const double d = determinant(a);
  Mat<3> c{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const int i1 = (j + 1) % 3, i2 = (j + 2) % 3;
      const int j1 = (i + 1) % 3, j2 = (i + 2) % 3;
      c[i][j] = (a[i1][j1] * a[i2][j2] - a[i1][j2] * a[i2][j1]) / d;
    }
  }
  return c;
}

// Volume of the N-ball of radius r.
inline double ball_volume(int dim, double r) {
  return std::pow(std::numbers::pi, 0.5 * dim) / std::tgamma(0.5 * dim + 1.0) * std::pow(r, dim);
}

// Surface measure S_{N-1}(r) of the (N-1)-sphere bounding the N-ball; d/dr of ball_volume.
inline double sphere_surface(int dim, double r) {
  return dim * std::pow(std::numbers::pi, 0.5 * dim) / std::tgamma(0.5 * dim + 1.0) *
         std::pow(r, dim - 1);
}

} // namespace evohom
