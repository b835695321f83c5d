// AVX2/FMA kernels. Compiled with -mavx2 -mfma only on x86-64; callers reach
// them through the dispatch table after a CPUID check.

#include "hpanel/kernels.hpp"

#if defined(HPANEL_HAVE_AVX2_TU) && defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

namespace hpanel::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpby(double alpha, const double* x, double beta, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  const __m256d vb = _mm256_set1_pd(beta);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_mul_pd(vb, _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy));
  }
  for (; i < n; ++i) y[i] = alpha * x[i] + beta * y[i];
}

void hadamard_add(const double* base, const double* e, const double* w, double* out,
                  std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d r = _mm256_fmadd_pd(_mm256_loadu_pd(e + i), _mm256_loadu_pd(w + i),
                                _mm256_loadu_pd(base + i));
    _mm256_storeu_pd(out + i, r);
  }
  for (; i < n; ++i) out[i] = base[i] + e[i] * w[i];
}

// Vectorized across output positions; each lane sums its window in the same
// order as the reference, so results are bit-identical to it.
void moving_sum(const double* in, std::size_t n_out, std::size_t window, double scale,
                double* out) {
  const __m256d vs = _mm256_set1_pd(scale);
  std::size_t t = 0;
  for (; t + 4 <= n_out; t += 4) {
    __m256d s = _mm256_setzero_pd();
    for (std::size_t k = 0; k < window; ++k) s = _mm256_add_pd(s, _mm256_loadu_pd(in + t + k));
    _mm256_storeu_pd(out + t, _mm256_mul_pd(vs, s));
  }
  for (; t < n_out; ++t) {
    double s = 0.0;
    for (std::size_t k = 0; k < window; ++k) s += in[t + k];
    out[t] = scale * s;
  }
}

// Rank-4 updates keep each S column in registers/L1 across four source
// columns before writing it back.
void gram_lower(const double* a, std::size_t rows, std::size_t cols, std::size_t lda, double* s,
                std::size_t lds) {
  std::size_t b = 0;
  for (; b + 4 <= cols; b += 4) {
    const double* a0 = a + b * lda;
    const double* a1 = a0 + lda;
    const double* a2 = a1 + lda;
    const double* a3 = a2 + lda;
    for (std::size_t c = 0; c < rows; ++c) {
      const __m256d w0 = _mm256_set1_pd(a0[c]);
      const __m256d w1 = _mm256_set1_pd(a1[c]);
      const __m256d w2 = _mm256_set1_pd(a2[c]);
      const __m256d w3 = _mm256_set1_pd(a3[c]);
      double* sc = s + c * lds;
      std::size_t r = c;
      for (; r + 4 <= rows; r += 4) {
        __m256d acc = _mm256_loadu_pd(sc + r);
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a0 + r), w0, acc);
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a1 + r), w1, acc);
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a2 + r), w2, acc);
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a3 + r), w3, acc);
        _mm256_storeu_pd(sc + r, acc);
      }
      for (; r < rows; ++r) {
        sc[r] += a0[r] * a0[c] + a1[r] * a1[c] + a2[r] * a2[c] + a3[r] * a3[c];
      }
    }
  }
  for (; b < cols; ++b) {
    const double* col = a + b * lda;
    for (std::size_t c = 0; c < rows; ++c) {
      const __m256d w = _mm256_set1_pd(col[c]);
      double* sc = s + c * lds;
      std::size_t r = c;
      for (; r + 4 <= rows; r += 4) {
        _mm256_storeu_pd(sc + r,
                         _mm256_fmadd_pd(_mm256_loadu_pd(col + r), w, _mm256_loadu_pd(sc + r)));
      }
      for (; r < rows; ++r) sc[r] += col[r] * col[c];
    }
  }
}

constexpr KernelTable kAvx2{Isa::Avx2, dot, axpby, hadamard_add, moving_sum, gram_lower};

}  // namespace

const KernelTable* avx2_table() { return &kAvx2; }

}  // namespace hpanel::kernels

#else

namespace hpanel::kernels {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace hpanel::kernels

#endif
