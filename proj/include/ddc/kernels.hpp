#pragma once

#include <cstddef>

// Low-level array kernels behind the solver and EM inner loops. Each op has a
// scalar reference implementation and, on x86-64, an AVX2+FMA variant picked
// at runtime (cpuid). Override with set_backend() or the DDC_KERNELS
// environment variable ("scalar" or "avx2").
//
// The variants are equivalent up to floating-point reassociation of the
// accumulators, not bit-identical; tests pin them together at tight relative
// tolerance. Within one process the active backend is fixed at first use, so
// results do not depend on thread count.

namespace ddc::kernels {

enum class Backend { scalar, avx2 };

Backend active_backend();
const char* backend_name(Backend b);
bool backend_available(Backend b);
// Returns false (and leaves the dispatch untouched) if unsupported here.
bool set_backend(Backend b);

double dot(const double* a, const double* b, std::size_t n);

// Row-major m (rows x cols) times x into out[rows].
void matvec(const double* m, std::size_t rows, std::size_t cols, const double* x,
            double* out);

double max_abs_diff(const double* a, const double* b, std::size_t n);

// One posterior-accumulation step: s = sum_j w[j]*l[j]; if s > 0 then
// acc[j] += scale * w[j]*l[j]/s for all j. Returns s.
double posterior_accumulate(const double* w, const double* l, double* acc,
                            std::size_t n, double scale = 1.0);

namespace detail {
double dot_scalar(const double* a, const double* b, std::size_t n);
void matvec_scalar(const double* m, std::size_t rows, std::size_t cols,
                   const double* x, double* out);
double max_abs_diff_scalar(const double* a, const double* b, std::size_t n);
double posterior_accumulate_scalar(const double* w, const double* l, double* acc,
                                   std::size_t n, double scale);
}  // namespace detail

}  // namespace ddc::kernels
