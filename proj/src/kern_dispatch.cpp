#include "cransim/kern.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace cransim::kern {

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend resolve_initial() {
  if (const char* env = std::getenv("CRANSIM_KERN")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
    if (std::strcmp(env, "avx2") == 0 && backend_supported(Backend::avx2)) {
      return Backend::avx2;
    }
  }
  return backend_supported(Backend::avx2) ? Backend::avx2 : Backend::scalar;
}

std::atomic<int> g_backend{-1};

Backend current() {
  int b = g_backend.load(std::memory_order_acquire);
  if (b < 0) {
    b = static_cast<int>(resolve_initial());
    g_backend.store(b, std::memory_order_release);
  }
  return static_cast<Backend>(b);
}

}  // namespace

bool backend_supported(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
      return detail::avx2_ops.cdotc != nullptr && cpu_has_avx2();
  }
  return false;
}

Backend active_backend() { return current(); }

void force_backend(Backend b) {
  if (!backend_supported(b)) {
    throw std::runtime_error(std::string("kern backend not supported: ") +
                             backend_name(b));
  }
  g_backend.store(static_cast<int>(b), std::memory_order_release);
}

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
  }
  return "?";
}

namespace detail {

const Ops& active_ops() {
  return current() == Backend::avx2 ? avx2_ops : scalar_ops;
}

}  // namespace detail

}  // namespace cransim::kern
