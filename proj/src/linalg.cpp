#include "cransim/linalg.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace cransim {

void rank1_update(CMatrix& a, cd s, std::span<const cd> x, std::span<const cd> y) {
  const int m = a.rows();
  const int n = a.cols();
  // row i gets (s * x_i) * conj(y); stage conj(y) once
  thread_local CVector ybar;
  ybar.resize(n);
  for (int j = 0; j < n; ++j) ybar[j] = std::conj(y[j]);
  for (int i = 0; i < m; ++i) {
    kern::axpy(n, s * x[i], ybar.data(), a.row(i));
  }
}

void matvec(const CMatrix& a, std::span<const cd> x, std::span<cd> y) {
  const int m = a.rows();
  const int n = a.cols();
  for (int i = 0; i < m; ++i) {
    y[i] = kern::cdotu(n, a.row(i), x.data());
  }
}

void matvec_adjoint(const CMatrix& a, std::span<const cd> x, std::span<cd> y) {
  const int m = a.rows();
  const int n = a.cols();
  for (int j = 0; j < n; ++j) y[j] = cd{};
  for (int i = 0; i < m; ++i) {
    kern::axpy(n, std::conj(x[i]), a.row(i), y.data());
  }
  for (int j = 0; j < n; ++j) y[j] = std::conj(y[j]);
}

bool cholesky_factor(CMatrix& a) {
  const int n = a.rows();
  for (int j = 0; j < n; ++j) {
    double d = a(j, j).real() - kern::sqnorm(j, a.row(j));
    if (!(d > 0.0)) return false;
    const double ljj = std::sqrt(d);
    a(j, j) = ljj;
    for (int i = j + 1; i < n; ++i) {
      // L[i][j] = (A[i][j] - sum_k L[i][k] conj(L[j][k])) / L[j][j]
      cd s = std::conj(kern::cdotc(j, a.row(i), a.row(j)));
      a(i, j) = (a(i, j) - s) / ljj;
    }
    for (int i = 0; i < j; ++i) a(i, j) = cd{};  // keep upper part clean
  }
  return true;
}

void cholesky_solve(const CMatrix& l, std::span<const cd> b, std::span<cd> x) {
  const int n = l.rows();
  // forward: L y = b
  for (int i = 0; i < n; ++i) {
    cd s = kern::cdotu(i, l.row(i), x.data());
    x[i] = (b[i] - s) / l(i, i);
  }
  // backward: L^H x = y (strided column access; n is small)
  for (int i = n - 1; i >= 0; --i) {
    cd s{};
    for (int k = i + 1; k < n; ++k) s += std::conj(l(k, i)) * x[k];
    x[i] = (x[i] - s) / std::conj(l(i, i));
  }
}

void hermitian_solve(const CMatrix& a, std::span<const cd> b, std::span<cd> x,
                     double ridge_rel) {
  const int n = a.rows();
  double tr = 0.0;
  for (int i = 0; i < n; ++i) tr += a(i, i).real();
  double ridge = 0.0;
  for (int attempt = 0; attempt < 40; ++attempt) {
    CMatrix m = a;
    if (ridge > 0.0) {
      for (int i = 0; i < n; ++i) m(i, i) += ridge;
    }
    if (cholesky_factor(m)) {
      cholesky_solve(m, b, x);
      return;
    }
    ridge = (ridge == 0.0) ? std::max(ridge_rel * tr, 1e-300) : ridge * 10.0;
  }
  throw std::runtime_error("hermitian_solve: matrix not factorizable");
}

double quad_form(const CMatrix& a, std::span<const cd> x) {
  const int n = a.rows();
  thread_local CVector ax;
  ax.resize(n);
  matvec(a, x, ax);
  return kern::cdotc(n, x.data(), ax.data()).real();
}

}  // namespace cransim
