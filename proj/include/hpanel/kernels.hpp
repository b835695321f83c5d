#pragma once

// Data-parallel inner loops with a scalar reference implementation and an
// AVX2/FMA variant. The variant is chosen once at startup from CPUID; set
// HPANEL_KERNELS=scalar in the environment to force the reference path.
//
// All matrices are column-major with an explicit leading dimension.

#include <cstddef>
#include <span>
#include <string_view>

namespace hpanel::kernels {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
  Isa isa;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] = alpha * x[i] + beta * y[i]
  void (*axpby)(double alpha, const double* x, double beta, double* y, std::size_t n);
  // out[i] = base[i] + e[i] * w[i]
  void (*hadamard_add)(const double* base, const double* e, const double* w, double* out,
                       std::size_t n);
  // out[t] = scale * sum_{k < window} in[t + k], for t < n_out
  void (*moving_sum)(const double* in, std::size_t n_out, std::size_t window, double scale,
                     double* out);
  // Lower triangle of S += A A^T, A is rows x cols (lda), S is rows x rows (lds).
  void (*gram_lower)(const double* a, std::size_t rows, std::size_t cols, std::size_t lda,
                     double* s, std::size_t lds);
};

const KernelTable& scalar_table();
// Null when the translation unit was built without AVX2 support.
const KernelTable* avx2_table();

bool cpu_supports(Isa isa);
const KernelTable& table(Isa isa);
// The process-wide selection.
const KernelTable& active();
std::string_view isa_name(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

}  // namespace hpanel::kernels
