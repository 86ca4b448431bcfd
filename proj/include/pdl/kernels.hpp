#pragma once

#include <cstddef>
#include <string>

namespace pdl::kernels {

// Dense real64 inner loops behind everything numeric: elementwise arithmetic,
// reductions, row-major GEMM and the Adam update. Two implementations exist,
// a portable scalar reference and an AVX2+FMA variant; one is selected at
// runtime. Elementwise kernels produce bitwise-identical results on both
// backends; reductions and GEMM reassociate and agree to rounding only, so
// determinism guarantees hold per backend.
struct Ops {
  // out = a op b, elementwise over n
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  // out = s * a; out = a + s
  void (*scale)(const double* a, double s, double* out, std::size_t n);
  void (*add_scalar)(const double* a, double s, double* out, std::size_t n);
  // y += s * x
  void (*axpy)(double s, const double* x, double* y, std::size_t n);
  // out += a .* b
  void (*mul_acc)(const double* a, const double* b, double* out, std::size_t n);

  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* a, std::size_t n);
  double (*abs_sum)(const double* a, std::size_t n);
  double (*max_abs)(const double* a, std::size_t n);

  // out = max(a, 0); out = max(a, b)
  void (*relu)(const double* a, double* out, std::size_t n);
  void (*maximum)(const double* a, const double* b, double* out, std::size_t n);
  void (*square)(const double* a, double* out, std::size_t n);
  void (*abs_val)(const double* a, double* out, std::size_t n);
  // Subgradient helpers; ties (a == b, x == 0) propagate nothing.
  // out += g where x > 0
  void (*relu_mask_acc)(const double* x, const double* g, double* out, std::size_t n);
  // out += g where a > b
  void (*gt_mask_acc)(const double* a, const double* b, const double* g, double* out, std::size_t n);
  // out += sign(x) * g, with sign(0) = 0
  void (*sign_mul_acc)(const double* x, const double* g, double* out, std::size_t n);

  bool (*all_finite)(const double* a, std::size_t n);

  // Row-major GEMM family. acc=false overwrites C, acc=true accumulates.
  //   nn: C[m x n] = A[m x k] * B[k x n]
  //   nt: C[m x n] = A[m x k] * B[n x k]^T
  //   tn: C[m x n] = A[k x m]^T * B[k x n]
  void (*gemm_nn)(const double* a, const double* b, double* c,
                  std::size_t m, std::size_t k, std::size_t n, bool acc);
  void (*gemm_nt)(const double* a, const double* b, double* c,
                  std::size_t m, std::size_t k, std::size_t n, bool acc);
  void (*gemm_tn)(const double* a, const double* b, double* c,
                  std::size_t m, std::size_t k, std::size_t n, bool acc);

  // In-place Adam step with precomputed bias corrections
  // bc1 = 1/(1-beta1^t), bc2 = 1/(1-beta2^t).
  void (*adam_update)(double* p, double* m, double* v, const double* g,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, double bc1, double bc2);
};

enum class Backend { scalar, avx2 };

const Ops& scalar_ops();
// Null when this build/CPU cannot run AVX2+FMA.
const Ops* avx2_ops();

bool avx2_available();
Backend active_backend();
// Throws pdl::config_error when the requested backend is unavailable.
void set_backend(Backend b);
std::string backend_name(Backend b);

// Kernel table currently in effect.
const Ops& active();

}  // namespace pdl::kernels
