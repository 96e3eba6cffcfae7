#include "cransim/kern.hpp"

namespace cransim::kern::detail {

namespace {

cd cdotc_scalar(std::size_t n, const cd* x, const cd* y) {
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double xr = x[i].real(), xi = x[i].imag();
    const double yr = y[i].real(), yi = y[i].imag();
    re += xr * yr + xi * yi;
    im += xr * yi - xi * yr;
  }
  return {re, im};
}

cd cdotu_scalar(std::size_t n, const cd* x, const cd* y) {
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double xr = x[i].real(), xi = x[i].imag();
    const double yr = y[i].real(), yi = y[i].imag();
    re += xr * yr - xi * yi;
    im += xr * yi + xi * yr;
  }
  return {re, im};
}

double sqnorm_scalar(std::size_t n, const cd* x) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s += x[i].real() * x[i].real() + x[i].imag() * x[i].imag();
  }
  return s;
}

void axpy_scalar(std::size_t n, cd a, const cd* x, cd* y) {
  const double ar = a.real(), ai = a.imag();
  for (std::size_t i = 0; i < n; ++i) {
    const double xr = x[i].real(), xi = x[i].imag();
    y[i] += cd(ar * xr - ai * xi, ar * xi + ai * xr);
  }
}

}  // namespace

const Ops scalar_ops = {cdotc_scalar, cdotu_scalar, sqnorm_scalar, axpy_scalar};

}  // namespace cransim::kern::detail
