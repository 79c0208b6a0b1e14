#include "evohom/sparse.hpp"

#include "evohom/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace evohom {

SparseMatrix::SparseMatrix(std::size_t n_rows, std::size_t n_cols, std::vector<std::size_t> row_offsets,
                           std::vector<std::size_t> col_indices, std::vector<double> values)
    : n_rows_(n_rows), n_cols_(n_cols), row_offsets_(std::move(row_offsets)),
      col_indices_(std::move(col_indices)), values_(std::move(values)) {
  if (row_offsets_.size() != n_rows_ + 1 || row_offsets_.front() != 0 ||
      row_offsets_.back() != values_.size() || col_indices_.size() != values_.size())
    throw ConstructionError("SparseMatrix: inconsistent CSR array sizes");
  for (std::size_t i = 0; i < n_rows_; ++i) {
    if (row_offsets_[i] > row_offsets_[i + 1])
      throw ConstructionError("SparseMatrix: row offsets decrease at row " + std::to_string(i));
    for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
      if (col_indices_[k] >= n_cols_)
        throw ConstructionError("SparseMatrix: column index out of range in row " + std::to_string(i));
      if (k > row_offsets_[i] && col_indices_[k] <= col_indices_[k - 1])
        throw ConstructionError("SparseMatrix: columns not strictly increasing in row " +
                                std::to_string(i));
      if (!std::isfinite(values_[k]))
        throw ConstructionError("SparseMatrix: non-finite value in row " + std::to_string(i));
    }
  }
}

void SparseMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  for (std::size_t i = 0; i < n_rows_; ++i) {
    double s = 0.0;
    for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k)
      s += values_[k] * x[col_indices_[k]];
    y[i] = s;
  }
}

std::vector<double> SparseMatrix::multiply(std::span<const double> x) const {
  std::vector<double> y(n_rows_);
  multiply(x, y);
  return y;
}

double SparseMatrix::diagonal(std::size_t row) const {
  const auto first = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[row]);
  const auto last = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[row + 1]);
  const auto it = std::lower_bound(first, last, row);
  if (it == last || *it != row)
    return 0.0;
  return values_[static_cast<std::size_t>(it - col_indices_.begin())];
}

SparseMatrix TripletBuffer::finalize(std::size_t n_rows, std::size_t n_cols) const {
  std::vector<std::size_t> count(n_rows + 1, 0);
  for (const auto& e : entries_) {
    if (e.row >= n_rows || e.col >= n_cols)
      throw ConstructionError("TripletBuffer: entry (" + std::to_string(e.row) + "," +
                              std::to_string(e.col) + ") outside " + std::to_string(n_rows) + "x" +
                              std::to_string(n_cols));
    ++count[e.row + 1];
  }
  std::partial_sum(count.begin(), count.end(), count.begin());

  // Bucket by row preserving insertion order, then sort each row by column. The summation
  // order of duplicates is therefore the insertion order, independent of the sort.
  std::vector<std::size_t> order(entries_.size());
  {
    std::vector<std::size_t> fill(count.begin(), count.end() - 1);
    for (std::size_t k = 0; k < entries_.size(); ++k)
      order[fill[entries_[k].row]++] = k;
  }

  std::vector<std::size_t> offsets(n_rows + 1, 0);
  std::vector<std::size_t> cols;
  std::vector<double> vals;
  cols.reserve(entries_.size());
  vals.reserve(entries_.size());
  for (std::size_t i = 0; i < n_rows; ++i) {
    auto first = order.begin() + static_cast<std::ptrdiff_t>(count[i]);
    auto last = order.begin() + static_cast<std::ptrdiff_t>(count[i + 1]);
    std::stable_sort(first, last,
                     [this](std::size_t a, std::size_t b) { return entries_[a].col < entries_[b].col; });
    for (auto it = first; it != last; ++it) {
      const auto& e = entries_[*it];
      if (!cols.empty() && vals.size() > offsets[i] && cols.back() == e.col)
        vals.back() += e.value;
      else {
        cols.push_back(e.col);
        vals.push_back(e.value);
      }
    }
    offsets[i + 1] = vals.size();
  }
  return SparseMatrix(n_rows, n_cols, std::move(offsets), std::move(cols), std::move(vals));
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double mean(std::span<const double> a) {
  if (a.empty())
    return 0.0;
  return std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
}

namespace {

void remove_mean(std::span<double> v) {
  const double m = mean(v);
  for (double& x : v)
    x -= m;
}

void check_symmetry_sampled(const SparseMatrix& a) {
  const std::size_t n = a.n_rows();
  std::mt19937_64 gen(0x5eed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = dist(gen);
    y[i] = dist(gen);
  }
  const auto ax = a.multiply(x);
  const auto ay = a.multiply(y);
  const double lhs = dot(ax, y);
  const double rhs = dot(ay, x);
  const double scale = norm2(ax) * norm2(y) + norm2(ay) * norm2(x);
  if (std::fabs(lhs - rhs) > 1e-10 * scale)
    throw DomainError("solve_cg: matrix fails the sampled symmetry test");
}

} // namespace

std::pair<std::vector<double>, SolveReport> solve_cg(const SparseMatrix& a, std::span<const double> b,
                                                     const CgOptions& options,
                                                     std::span<const double> initial_guess) {
  const std::size_t n = a.n_rows();
  if (a.n_cols() != n || b.size() != n)
    throw DomainError("solve_cg: dimension mismatch");
  if (!initial_guess.empty() && initial_guess.size() != n)
    throw DomainError("solve_cg: initial guess has wrong size");
  check_symmetry_sampled(a);

  const bool project = options.zero_mean_constraint;
  const std::size_t max_iter = options.max_iter == 0 ? 3 * std::max<std::size_t>(n, 1) : options.max_iter;

  std::vector<double> rhs(b.begin(), b.end());
  if (project)
    remove_mean(rhs);

  std::vector<double> x(n, 0.0);
  if (!initial_guess.empty())
    std::copy(initial_guess.begin(), initial_guess.end(), x.begin());
  if (project)
    remove_mean(x);

  SolveReport report;
  const double bnorm = norm2(rhs);
  if (!std::isfinite(bnorm))
    throw NumericalError("solve_cg: non-finite right-hand side");
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    report.converged = true;
    return {std::move(x), report};
  }

  std::vector<double> inv_diag(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a.diagonal(i);
    inv_diag[i] = d > 0.0 ? 1.0 / d : 1.0;
  }

  std::vector<double> r(n), z(n), p(n), ap(n);
  auto true_residual = [&]() {
    a.multiply(x, ap);
    for (std::size_t i = 0; i < n; ++i)
      r[i] = rhs[i] - ap[i];
    if (project)
      remove_mean(r);
    return norm2(r) / bnorm;
  };

  double rel = true_residual();
  report.final_residual = rel;
  // The recurrence residual drifts from the true one; a pass that claims convergence is
  // verified against the true residual and restarted from the current iterate if needed.
  for (int pass = 0; pass < 4 && rel > options.tol && report.iterations < max_iter; ++pass) {
    for (std::size_t i = 0; i < n; ++i)
      z[i] = inv_diag[i] * r[i];
    if (project)
      remove_mean(z);
    p = z;
    double rz = dot(r, z);
    while (report.iterations < max_iter) {
      a.multiply(p, ap);
      const double pap = dot(p, ap);
      if (!std::isfinite(pap) || !std::isfinite(rz))
        throw NumericalError("solve_cg: non-finite value at iteration " +
                             std::to_string(report.iterations));
      if (pap <= 0.0)
        break;
      const double alpha = rz / pap;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += alpha * p[i];
        r[i] -= alpha * ap[i];
      }
      if (project)
        remove_mean(r);
      ++report.iterations;
      rel = norm2(r) / bnorm;
      if (!std::isfinite(rel))
        throw NumericalError("solve_cg: non-finite residual at iteration " +
                             std::to_string(report.iterations));
      if (rel <= options.tol)
        break;
      for (std::size_t i = 0; i < n; ++i)
        z[i] = inv_diag[i] * r[i];
      if (project)
        remove_mean(z);
      const double rz_new = dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < n; ++i)
        p[i] = z[i] + beta * p[i];
    }
    if (project)
      remove_mean(x);
    rel = true_residual();
  }
  report.final_residual = rel;
  report.converged = rel <= options.tol;
  return {std::move(x), report};
}

} // namespace evohom
