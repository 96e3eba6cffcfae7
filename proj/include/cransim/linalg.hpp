#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "cransim/kern.hpp"

// Small dense complex matrices, row-major. Sized for per-user beamforming
// subproblems (tens of rows), not for large-scale linear algebra.

namespace cransim {

using cd = std::complex<double>;
using CVector = std::vector<cd>;

class CMatrix {
 public:
  CMatrix() = default;
  CMatrix(int rows, int cols) : rows_(rows), cols_(cols), a_(std::size_t(rows) * cols) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  cd& operator()(int i, int j) { return a_[std::size_t(i) * cols_ + j]; }
  const cd& operator()(int i, int j) const { return a_[std::size_t(i) * cols_ + j]; }
  cd* row(int i) { return a_.data() + std::size_t(i) * cols_; }
  const cd* row(int i) const { return a_.data() + std::size_t(i) * cols_; }
  cd* data() { return a_.data(); }
  const cd* data() const { return a_.data(); }
  void set_zero() { a_.assign(a_.size(), cd{}); }

 private:
  int rows_ = 0;
  int cols_ = 0;
  CVector a_;
};

// A += s * x * y^H  (outer-product update on a full row-major matrix)
void rank1_update(CMatrix& a, cd s, std::span<const cd> x, std::span<const cd> y);

// y = A x and y = A^H x
void matvec(const CMatrix& a, std::span<const cd> x, std::span<cd> y);
void matvec_adjoint(const CMatrix& a, std::span<const cd> x, std::span<cd> y);

// In-place lower Cholesky of a Hermitian positive-definite matrix.
// Returns false (leaving the matrix clobbered) when a pivot is not
// strictly positive.
bool cholesky_factor(CMatrix& a);

// Solve L L^H x = b with the factor from cholesky_factor.
void cholesky_solve(const CMatrix& l, std::span<const cd> b, std::span<cd> x);

// Solve A x = b for Hermitian positive-semidefinite A; adds an increasing
// trace-scaled ridge until the factorization succeeds.
void hermitian_solve(const CMatrix& a, std::span<const cd> b, std::span<cd> x,
                     double ridge_rel = 1e-12);

// Quadratic form x^H A x (real part; A Hermitian)
double quad_form(const CMatrix& a, std::span<const cd> x);

}  // namespace cransim
