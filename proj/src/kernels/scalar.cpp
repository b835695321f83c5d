// Reference kernels. Built with auto-vectorization disabled so that this file
// stays the plain-loop baseline the SIMD variants are checked against.

#include "hpanel/kernels.hpp"

namespace hpanel::kernels {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpby(double alpha, const double* x, double beta, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = alpha * x[i] + beta * y[i];
}

void hadamard_add(const double* base, const double* e, const double* w, double* out,
                  std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = base[i] + e[i] * w[i];
}

void moving_sum(const double* in, std::size_t n_out, std::size_t window, double scale,
                double* out) {
  for (std::size_t t = 0; t < n_out; ++t) {
    double s = 0.0;
    for (std::size_t k = 0; k < window; ++k) s += in[t + k];
    out[t] = scale * s;
  }
}

void gram_lower(const double* a, std::size_t rows, std::size_t cols, std::size_t lda, double* s,
                std::size_t lds) {
  for (std::size_t b = 0; b < cols; ++b) {
    const double* col = a + b * lda;
    for (std::size_t c = 0; c < rows; ++c) {
      const double ac = col[c];
      double* sc = s + c * lds;
      for (std::size_t r = c; r < rows; ++r) sc[r] += col[r] * ac;
    }
  }
}

constexpr KernelTable kScalar{Isa::Scalar, dot, axpby, hadamard_add, moving_sum, gram_lower};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace hpanel::kernels
