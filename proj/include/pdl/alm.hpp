#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "pdl/autodiff.hpp"
#include "pdl/problems.hpp"
#include "pdl/tensor.hpp"

namespace pdl::alm {

// Reference augmented-Lagrangian solver: inner minimization by Polak-Ribiere
// nonlinear CG with Armijo backtracking, first-order dual updates, and
// violation-driven penalty growth.

struct AlmConfig {
  double rho0 = 1.0;
  double alpha = 10.0;            // penalty multiplier, > 1
  double tau = 0.5;               // violation tolerance ratio, in (0,1)
  double rho_max = 1e8;
  int max_outer = 20;
  double eps = 1e-4;              // stop when v_k < eps
  double inner_tol = 1e-4;        // inner ||grad||_inf target
  std::size_t inner_cap_mult = 1000;  // inner iteration cap = mult * n

  void validate() const;
};

// Appendix-style defaults per family.
AlmConfig qp_defaults();    // alpha 10, rho 1, tau 0.5, K 20
AlmConfig qcqp_defaults();  // alpha 1.2, rho 0.1, tau 0.5, K 50

struct DualEstimates {
  Tensor lam_g;  // inequality multipliers, >= 0
  Tensor lam_h;  // equality multipliers

  static DualEstimates zeros(const problems::ProblemFamily& f);
};

// L_rho(y) = f + lam_g'g + lam_h'h + rho/2 (||max(g,0)||^2 + ||h||^2),
// differentiable in y.
ad::Value augmented_lagrangian(const problems::ProblemFamily& f, const Tensor& x,
                               const ad::Value& y, const DualEstimates& duals,
                               double rho);

// Graph-free value, used by the line search.
double lagrangian_value(const problems::ProblemFamily& f, const Tensor& x,
                        const Tensor& y, const DualEstimates& duals, double rho);

// Gradient (and value) at y via the reverse-mode path.
Tensor lagrangian_grad(const problems::ProblemFamily& f, const Tensor& x,
                       const Tensor& y, const DualEstimates& duals, double rho,
                       double* value_out = nullptr);

struct InnerResult {
  Tensor y;
  double grad_inf = 0.0;
  std::size_t iters = 0;
  bool converged = false;
};

InnerResult inner_solve(const problems::ProblemFamily& f, const Tensor& x,
                        Tensor y0, const DualEstimates& duals, double rho,
                        double tol, std::size_t max_iters);

// lam_g' = max(lam_g + rho g, 0); lam_h' = lam_h + rho h.
DualEstimates dual_update(const DualEstimates& duals, const Tensor& g,
                          const Tensor& h, double rho);

// v = max(||h||_inf, ||sigma||_inf) with sigma_j = max(g_j, -lam_j / rho):
// feasibility plus complementarity in one scalar.
double violation(const Tensor& g, const Tensor& h, const Tensor& lam_g,
                 double rho);
double violation(const problems::ProblemFamily& f, const Tensor& x,
                 const Tensor& y, const Tensor& lam_g, double rho);

// rho' = min(alpha rho, rho_max) when v_k > tau v_prev; k = 1 never updates.
double update_rho(double rho, double v_k, double v_prev, int k,
                  const AlmConfig& cfg);

struct TraceRow {
  int k = 0;
  double f = 0.0;
  double v = 0.0;
  double rho = 0.0;
  std::size_t inner_iters = 0;
};

void trace_write_csv(std::ostream& out, const std::vector<TraceRow>& trace);

struct AlmResult {
  Tensor y;
  DualEstimates duals;
  std::vector<TraceRow> trace;
  bool converged = false;
  bool diverged = false;  // v grew 5 outer iterations in a row at rho_max
  double objective = 0.0;
  double final_violation = 0.0;
};

AlmResult alm_solve(const problems::ProblemFamily& f, const Tensor& x,
                    const AlmConfig& cfg, Tensor y0, DualEstimates dual0);

struct MultistartResult {
  Tensor y;
  double f = 0.0;
  double violation = 0.0;
  std::size_t best_start = 0;
  bool converged = false;
  std::vector<TraceRow> best_trace;
};

// Independent restarts with per-start derived seeds; QP starts are
// U(-1,1)^n with zero duals, QCQP starts and equality duals U(-2,2).
// Feasible runs (violation <= cfg.eps) rank by objective; when none
// converges the least-violating run wins.
MultistartResult alm_multistart(const problems::ProblemFamily& f, const Tensor& x,
                                const AlmConfig& cfg, std::size_t num_starts,
                                std::uint64_t seed, unsigned jobs = 1);

}  // namespace pdl::alm
