#include "ddc/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <mutex>

namespace ddc::kernels {

namespace detail {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void matvec_scalar(const double* m, std::size_t rows, std::size_t cols,
                   const double* x, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    out[r] = dot_scalar(m + r * cols, x, cols);
  }
}

double max_abs_diff_scalar(const double* a, const double* b, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = std::fabs(a[i] - b[i]);
    if (d > m) m = d;
  }
  return m;
}

double posterior_accumulate_scalar(const double* w, const double* l, double* acc,
                                   std::size_t n, double scale) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += w[i] * l[i];
  if (s > 0.0) {
    double inv = scale / s;
    for (std::size_t i = 0; i < n; ++i) acc[i] += w[i] * l[i] * inv;
  }
  return s;
}

// Provided by kernels_avx2.cpp when the build compiles that TU.
#if defined(DDC_HAVE_AVX2_TU)
double dot_avx2(const double* a, const double* b, std::size_t n);
void matvec_avx2(const double* m, std::size_t rows, std::size_t cols,
                 const double* x, double* out);
double max_abs_diff_avx2(const double* a, const double* b, std::size_t n);
double posterior_accumulate_avx2(const double* w, const double* l, double* acc,
                                 std::size_t n, double scale);
#endif

}  // namespace detail

namespace {

struct Dispatch {
  double (*dot)(const double*, const double*, std::size_t);
  void (*matvec)(const double*, std::size_t, std::size_t, const double*, double*);
  double (*max_abs_diff)(const double*, const double*, std::size_t);
  double (*posterior_accumulate)(const double*, const double*, double*, std::size_t,
                                 double);
};

constexpr Dispatch kScalar{detail::dot_scalar, detail::matvec_scalar,
                           detail::max_abs_diff_scalar,
                           detail::posterior_accumulate_scalar};

#if defined(DDC_HAVE_AVX2_TU)
const Dispatch kAvx2{detail::dot_avx2, detail::matvec_avx2,
                     detail::max_abs_diff_avx2,
                     detail::posterior_accumulate_avx2};
#endif

std::atomic<const Dispatch*> g_dispatch{nullptr};
std::atomic<Backend> g_backend{Backend::scalar};
std::once_flag g_init_flag;

bool cpu_has_avx2() {
#if defined(DDC_HAVE_AVX2_TU) && defined(__GNUC__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

void apply(Backend b) {
#if defined(DDC_HAVE_AVX2_TU)
  if (b == Backend::avx2) {
    g_dispatch.store(&kAvx2);
    g_backend.store(Backend::avx2);
    return;
  }
#endif
  g_dispatch.store(&kScalar);
  g_backend.store(Backend::scalar);
}

void init_once() {
  std::call_once(g_init_flag, [] {
    Backend pick = cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
    if (const char* env = std::getenv("DDC_KERNELS")) {
      if (std::strcmp(env, "scalar") == 0) pick = Backend::scalar;
      if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) pick = Backend::avx2;
    }
    apply(pick);
  });
}

const Dispatch& table() {
  const Dispatch* d = g_dispatch.load();
  if (d) return *d;
  init_once();
  return *g_dispatch.load();
}

}  // namespace

Backend active_backend() {
  init_once();
  return g_backend.load();
}

const char* backend_name(Backend b) {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

bool backend_available(Backend b) {
  if (b == Backend::scalar) return true;
  return cpu_has_avx2();
}

bool set_backend(Backend b) {
  init_once();
  if (!backend_available(b)) return false;
  apply(b);
  return true;
}

double dot(const double* a, const double* b, std::size_t n) {
  return table().dot(a, b, n);
}

void matvec(const double* m, std::size_t rows, std::size_t cols, const double* x,
            double* out) {
  table().matvec(m, rows, cols, x, out);
}

double max_abs_diff(const double* a, const double* b, std::size_t n) {
  return table().max_abs_diff(a, b, n);
}

double posterior_accumulate(const double* w, const double* l, double* acc,
                            std::size_t n, double scale) {
  return table().posterior_accumulate(w, l, acc, n, scale);
}

}  // namespace ddc::kernels
