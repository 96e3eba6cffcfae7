#pragma once

#include <complex>
#include <cstddef>
#include <string>

// Data-parallel complex kernels behind a runtime-dispatched backend.
// The scalar implementations are the reference; SIMD variants must match
// them within floating-point reassociation noise (see tests/test_kern.cpp).

namespace cransim::kern {

using cd = std::complex<double>;

enum class Backend { scalar, avx2 };

// Backend chosen at first use: AVX2 when the CPU supports it, otherwise
// scalar. Overridable via CRANSIM_KERN=scalar|avx2 or force_backend().
Backend active_backend();
bool backend_supported(Backend b);
void force_backend(Backend b);  // throws std::runtime_error if unsupported
const char* backend_name(Backend b);

// sum_i conj(x[i]) * y[i]
cd cdotc(std::size_t n, const cd* x, const cd* y);
// sum_i x[i] * y[i]
cd cdotu(std::size_t n, const cd* x, const cd* y);
// sum_i |x[i]|^2
double sqnorm(std::size_t n, const cd* x);
// y[i] += a * x[i]
void axpy(std::size_t n, cd a, const cd* x, cd* y);

namespace detail {

struct Ops {
  cd (*cdotc)(std::size_t, const cd*, const cd*);
  cd (*cdotu)(std::size_t, const cd*, const cd*);
  double (*sqnorm)(std::size_t, const cd*);
  void (*axpy)(std::size_t, cd, const cd*, cd*);
};

extern const Ops scalar_ops;
extern const Ops avx2_ops;  // null members when built without AVX2 support

const Ops& active_ops();

}  // namespace detail

inline cd cdotc(std::size_t n, const cd* x, const cd* y) {
  return detail::active_ops().cdotc(n, x, y);
}
inline cd cdotu(std::size_t n, const cd* x, const cd* y) {
  return detail::active_ops().cdotu(n, x, y);
}
inline double sqnorm(std::size_t n, const cd* x) {
  return detail::active_ops().sqnorm(n, x);
}
inline void axpy(std::size_t n, cd a, const cd* x, cd* y) {
  detail::active_ops().axpy(n, a, x, y);
}

}  // namespace cransim::kern
