#pragma once

// Compressed sparse row matrices and a Jacobi-preconditioned conjugate gradient solver.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace evohom {

class SparseMatrix {
public:
  SparseMatrix() = default;
  // Takes ownership of a CSR structure; validates the invariants and throws ConstructionError.
  SparseMatrix(std::size_t n_rows, std::size_t n_cols, std::vector<std::size_t> row_offsets,
               std::vector<std::size_t> col_indices, std::vector<double> values);

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cols() const { return n_cols_; }
  std::size_t nnz() const { return values_.size(); }

  const std::vector<std::size_t>& row_offsets() const { return row_offsets_; }
  const std::vector<std::size_t>& col_indices() const { return col_indices_; }
  const std::vector<double>& values() const { return values_; }

  // y = A x
  void multiply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> multiply(std::span<const double> x) const;

  double diagonal(std::size_t row) const;

private:
  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<std::size_t> col_indices_;
  std::vector<double> values_;
};

// Coordinate-format accumulator; duplicates are summed by finalize().
class TripletBuffer {
public:
  struct Entry {
    std::size_t row;
    std::size_t col;
    double value;
  };

  void reserve(std::size_t n) { entries_.reserve(n); }
  void add(std::size_t row, std::size_t col, double value) { entries_.push_back({row, col, value}); }
  void clear() { entries_.clear(); }
  const std::vector<Entry>& entries() const { return entries_; }

  // Row-sorted CSR with duplicates summed. Throws ConstructionError on out-of-range indices.
  SparseMatrix finalize(std::size_t n_rows, std::size_t n_cols) const;

private:
  std::vector<Entry> entries_;
};

struct SolveReport {
  std::size_t iterations = 0;
  double final_residual = 0.0; // relative 2-norm ||Ax-b|| / ||b||
  bool converged = false;
};

struct CgOptions {
  double tol = 1e-10;
  std::size_t max_iter = 0; // 0 selects 3n
  bool zero_mean_constraint = false;
};

// Solves A x = b for symmetric positive (semi)definite A. With the zero-mean constraint the
// right-hand side, the preconditioned residuals and the result are projected onto the
// mean-free subspace, which solves singular pure-Neumann/periodic systems on the quotient space.
// Throws DomainError if A is not square or fails a sampled symmetry test, NumericalError on
// non-finite iterates. An empty `initial_guess` starts from zero.
std::pair<std::vector<double>, SolveReport> solve_cg(const SparseMatrix& a, std::span<const double> b,
                                                     const CgOptions& options,
                                                     std::span<const double> initial_guess = {});

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double mean(std::span<const double> a);

} // namespace evohom
