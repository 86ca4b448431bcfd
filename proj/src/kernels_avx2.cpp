// AVX2+FMA kernel variants. Built with -mavx2 -mfma on x86-64 only; the
// dispatcher checks cpuid before handing out this table. Loads are unaligned
// (vectors come from std::vector storage). Masked tails use scalar cleanup.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>
#include <cstddef>

#include "pdl/kernels.hpp"

namespace pdl::kernels {
namespace {

void k_add(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void k_sub(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void k_mul(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void k_scale(const double* a, double s, double* out, std::size_t n) {
  const __m256d sv = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(sv, _mm256_loadu_pd(a + i)));
  }
  for (; i < n; ++i) out[i] = s * a[i];
}

void k_add_scalar(const double* a, double s, double* out, std::size_t n) {
  const __m256d sv = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(sv, _mm256_loadu_pd(a + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + s;
}

void k_axpy(double s, const double* x, double* y, std::size_t n) {
  const __m256d sv = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(
        y + i, _mm256_fmadd_pd(sv, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += s * x[i];
}

void k_mul_acc(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i,
                     _mm256_fmadd_pd(_mm256_loadu_pd(a + i),
                                     _mm256_loadu_pd(b + i),
                                     _mm256_loadu_pd(out + i)));
  }
  for (; i < n; ++i) out[i] += a[i] * b[i];
}

double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

double k_dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double k_sum(const double* a, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + i));
  }
  double acc = hsum(acc0);
  for (; i < n; ++i) acc += a[i];
  return acc;
}

// Not a file-scope constant: a static initializer would run AVX code on
// load even when dispatch later picks the scalar table.
inline __m256d abs_mask() {
  return _mm256_castsi256_pd(_mm256_set1_epi64x(0x7FFFFFFFFFFFFFFFLL));
}

double k_abs_sum(const double* a, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_add_pd(acc0, _mm256_and_pd(abs_mask(), _mm256_loadu_pd(a + i)));
  }
  double acc = hsum(acc0);
  for (; i < n; ++i) acc += std::fabs(a[i]);
  return acc;
}

double k_max_abs(const double* a, std::size_t n) {
  __m256d m = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    m = _mm256_max_pd(m, _mm256_and_pd(abs_mask(), _mm256_loadu_pd(a + i)));
  }
  __m128d lo = _mm_max_pd(_mm256_castpd256_pd128(m), _mm256_extractf128_pd(m, 1));
  double r = _mm_cvtsd_f64(_mm_max_sd(lo, _mm_unpackhi_pd(lo, lo)));
  for (; i < n; ++i) r = std::max(r, std::fabs(a[i]));
  return r;
}

void k_relu(const double* a, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_max_pd(zero, _mm256_loadu_pd(a + i)));
  }
  for (; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void k_maximum(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] > b[i] ? a[i] : b[i];
}

void k_square(const double* a, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(a + i);
    _mm256_storeu_pd(out + i, _mm256_mul_pd(v, v));
  }
  for (; i < n; ++i) out[i] = a[i] * a[i];
}

void k_abs_val(const double* a, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_and_pd(abs_mask(), _mm256_loadu_pd(a + i)));
  }
  for (; i < n; ++i) out[i] = std::fabs(a[i]);
}

void k_relu_mask_acc(const double* x, const double* g, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    const __m256d gv = _mm256_and_pd(mask, _mm256_loadu_pd(g + i));
    _mm256_storeu_pd(out + i, _mm256_add_pd(gv, _mm256_loadu_pd(out + i)));
  }
  for (; i < n; ++i) {
    if (x[i] > 0.0) out[i] += g[i];
  }
}

void k_gt_mask_acc(const double* a, const double* b, const double* g,
                   double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask =
        _mm256_cmp_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), _CMP_GT_OQ);
    const __m256d gv = _mm256_and_pd(mask, _mm256_loadu_pd(g + i));
    _mm256_storeu_pd(out + i, _mm256_add_pd(gv, _mm256_loadu_pd(out + i)));
  }
  for (; i < n; ++i) {
    if (a[i] > b[i]) out[i] += g[i];
  }
}

void k_sign_mul_acc(const double* x, const double* g, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d xv = _mm256_loadu_pd(x + i);
    const __m256d gv = _mm256_loadu_pd(g + i);
    const __m256d pos = _mm256_and_pd(_mm256_cmp_pd(xv, zero, _CMP_GT_OQ), gv);
    const __m256d neg = _mm256_and_pd(_mm256_cmp_pd(xv, zero, _CMP_LT_OQ), gv);
    const __m256d upd = _mm256_sub_pd(pos, neg);
    _mm256_storeu_pd(out + i, _mm256_add_pd(upd, _mm256_loadu_pd(out + i)));
  }
  for (; i < n; ++i) {
    if (x[i] > 0.0) {
      out[i] += g[i];
    } else if (x[i] < 0.0) {
      out[i] -= g[i];
    }
  }
}

bool k_all_finite(const double* a, std::size_t n) {
  // finite iff |x| < inf; NaN compares false, so accumulate "bad" with GE.
  const __m256d inf = _mm256_set1_pd(__builtin_inf());
  __m256d bad = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d av = _mm256_and_pd(abs_mask(), _mm256_loadu_pd(a + i));
    bad = _mm256_or_pd(bad, _mm256_cmp_pd(av, inf, _CMP_GE_OQ));
    const __m256d v = _mm256_loadu_pd(a + i);
    bad = _mm256_or_pd(bad, _mm256_cmp_pd(v, v, _CMP_NEQ_UQ));
  }
  if (_mm256_movemask_pd(bad) != 0) return false;
  for (; i < n; ++i) {
    if (!std::isfinite(a[i])) return false;
  }
  return true;
}

void k_gemm_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool acc) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    if (!acc) {
      std::size_t j = 0;
      const __m256d zero = _mm256_setzero_pd();
      for (; j + 4 <= n; j += 4) _mm256_storeu_pd(crow + j, zero);
      for (; j < n; ++j) crow[j] = 0.0;
    }
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d av = _mm256_set1_pd(a[i * k + p]);
      const double* brow = b + p * n;
      std::size_t j = 0;
      for (; j + 8 <= n; j += 8) {
        _mm256_storeu_pd(crow + j,
                         _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j),
                                         _mm256_loadu_pd(crow + j)));
        _mm256_storeu_pd(crow + j + 4,
                         _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j + 4),
                                         _mm256_loadu_pd(crow + j + 4)));
      }
      for (; j + 4 <= n; j += 4) {
        _mm256_storeu_pd(crow + j,
                         _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j),
                                         _mm256_loadu_pd(crow + j)));
      }
      const double as = a[i * k + p];
      for (; j < n; ++j) crow[j] += as * brow[j];
    }
  }
}

void k_gemm_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool acc) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = k_dot(arow, b + j * k, k);
      double* cv = c + i * n + j;
      *cv = acc ? *cv + v : v;
    }
  }
}

void k_gemm_tn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool acc) {
  if (!acc) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= m * n; i += 4) _mm256_storeu_pd(c + i, zero);
    for (; i < m * n; ++i) c[i] = 0.0;
  }
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const __m256d av = _mm256_set1_pd(arow[i]);
      double* crow = c + i * n;
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        _mm256_storeu_pd(crow + j,
                         _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j),
                                         _mm256_loadu_pd(crow + j)));
      }
      const double as = arow[i];
      for (; j < n; ++j) crow[j] += as * brow[j];
    }
  }
}

void k_adam_update(double* p, double* m, double* v, const double* g,
                   std::size_t n, double lr, double beta1, double beta2,
                   double eps, double bc1, double bc2) {
  const __m256d b1 = _mm256_set1_pd(beta1);
  const __m256d b2 = _mm256_set1_pd(beta2);
  const __m256d omb1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d omb2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d bc1v = _mm256_set1_pd(bc1);
  const __m256d bc2v = _mm256_set1_pd(bc2);
  const __m256d lrv = _mm256_set1_pd(lr);
  const __m256d epsv = _mm256_set1_pd(eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gv = _mm256_loadu_pd(g + i);
    __m256d mv = _mm256_loadu_pd(m + i);
    __m256d vv = _mm256_loadu_pd(v + i);
    mv = _mm256_fmadd_pd(omb1, gv, _mm256_mul_pd(b1, mv));
    vv = _mm256_fmadd_pd(omb2, _mm256_mul_pd(gv, gv), _mm256_mul_pd(b2, vv));
    _mm256_storeu_pd(m + i, mv);
    _mm256_storeu_pd(v + i, vv);
    const __m256d mhat = _mm256_mul_pd(mv, bc1v);
    const __m256d vhat = _mm256_mul_pd(vv, bc2v);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), epsv);
    const __m256d upd = _mm256_div_pd(_mm256_mul_pd(lrv, mhat), denom);
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), upd));
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    p[i] -= lr * (m[i] * bc1) / (std::sqrt(v[i] * bc2) + eps);
  }
}

}  // namespace

const Ops* avx2_ops_table() {
  static const Ops table = {
      .add = k_add,
      .sub = k_sub,
      .mul = k_mul,
      .scale = k_scale,
      .add_scalar = k_add_scalar,
      .axpy = k_axpy,
      .mul_acc = k_mul_acc,
      .dot = k_dot,
      .sum = k_sum,
      .abs_sum = k_abs_sum,
      .max_abs = k_max_abs,
      .relu = k_relu,
      .maximum = k_maximum,
      .square = k_square,
      .abs_val = k_abs_val,
      .relu_mask_acc = k_relu_mask_acc,
      .gt_mask_acc = k_gt_mask_acc,
      .sign_mul_acc = k_sign_mul_acc,
      .all_finite = k_all_finite,
      .gemm_nn = k_gemm_nn,
      .gemm_nt = k_gemm_nt,
      .gemm_tn = k_gemm_tn,
      .adam_update = k_adam_update,
  };
  return &table;
}

}  // namespace pdl::kernels

#endif  // x86-64
