#include <cmath>
#include <cstddef>

#include "pdl/kernels.hpp"

// Reference kernels. Straight loops, no tricks: these define the semantics
// the SIMD variants are tested against.

namespace pdl::kernels {
namespace {

void k_add(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void k_sub(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void k_mul(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void k_scale(const double* a, double s, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = s * a[i];
}

void k_add_scalar(const double* a, double s, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + s;
}

void k_axpy(double s, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += s * x[i];
}

void k_mul_acc(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] += a[i] * b[i];
}

double k_dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double k_sum(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

double k_abs_sum(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::fabs(a[i]);
  return acc;
}

double k_max_abs(const double* a, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::fabs(a[i]));
  return m;
}

void k_relu(const double* a, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void k_maximum(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] > b[i] ? a[i] : b[i];
}

void k_square(const double* a, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * a[i];
}

void k_abs_val(const double* a, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::fabs(a[i]);
}

void k_relu_mask_acc(const double* x, const double* g, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > 0.0) out[i] += g[i];
  }
}

void k_gt_mask_acc(const double* a, const double* b, const double* g,
                   double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] > b[i]) out[i] += g[i];
  }
}

void k_sign_mul_acc(const double* x, const double* g, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > 0.0) {
      out[i] += g[i];
    } else if (x[i] < 0.0) {
      out[i] -= g[i];
    }
  }
}

bool k_all_finite(const double* a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(a[i])) return false;
  }
  return true;
}

void k_gemm_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool acc) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    if (!acc) {
      for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
    }
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void k_gemm_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool acc) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc_v = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc_v += arow[p] * brow[p];
      double* cv = c + i * n + j;
      *cv = acc ? *cv + acc_v : acc_v;
    }
  }
}

void k_gemm_tn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool acc) {
  if (!acc) {
    for (std::size_t i = 0; i < m * n; ++i) c[i] = 0.0;
  }
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void k_adam_update(double* p, double* m, double* v, const double* g,
                   std::size_t n, double lr, double beta1, double beta2,
                   double eps, double bc1, double bc2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double mhat = m[i] * bc1;
    const double vhat = v[i] * bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

const Ops& scalar_ops() {
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
  return table;
}

}  // namespace pdl::kernels
