#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pdl/alm.hpp"
#include "pdl/mlp.hpp"
#include "pdl/problems.hpp"

namespace pdl::schemes {

enum class SchemeTag {
  pdl,
  naive_mae,
  naive_mse,
  mae_penalty,
  mse_penalty,
  ld,
  ssl_penalty,
};

const char* scheme_name(SchemeTag t);
SchemeTag scheme_from_name(const std::string& name);
bool scheme_is_supervised(SchemeTag t);

enum class Norm { l1, l2sq };
enum class ViolationKind { abs_hinge, square };

// Per-constraint penalty weights for the penalty/LD schemes, plus the LD
// subgradient step settings.
struct PenaltyWeights {
  Tensor rho_g;  // [n_ineq]
  Tensor rho_h;  // [n_eq]
  double ld_step = 1e-3;  // gamma
  int ld_period = 50;     // epochs between multiplier updates
  ViolationKind kind = ViolationKind::abs_hinge;

  static PenaltyWeights uniform(const problems::ProblemFamily& f, double w);
};

struct PdlConfig {
  double rho0 = 0.5;
  double alpha = 10.0;
  double tau = 0.8;
  double rho_max = 5000.0;
  int outer = 10;           // K
  int inner = 500;          // L: epochs, or iterations when on_the_fly
  std::size_t batch = 200;
  double lr = 1e-4;
  Norm dual_norm = Norm::l1;
  std::vector<std::size_t> hidden = {500, 500};
  bool on_the_fly = false;  // sample fresh batches instead of epoch sweeps
  int valid_every = 0;      // 0: every epoch (or every 500 iterations otf)

  void validate() const;
};

struct BaselineConfig {
  int epochs = 10000;       // iterations when on_the_fly
  std::size_t batch = 200;
  double lr = 1e-4;
  std::vector<std::size_t> hidden = {500, 500};
  PenaltyWeights weights;   // penalty/ld schemes
  bool on_the_fly = false;  // self-supervised schemes may sample on the fly
};

struct TraceRow {
  int outer_k = 0;
  int inner_step = 0;
  std::string scheme;
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double v_k = 0.0;
  double rho = 0.0;
  double lr = 0.0;
};

void trace_write_csv(std::ostream& out, const std::vector<TraceRow>& rows);

struct TrainedModel {
  nn::Mlp primal;
  std::optional<nn::Mlp> dual;  // present iff scheme == pdl
  SchemeTag tag = SchemeTag::pdl;
  std::vector<TraceRow> trace;
  double final_rho = 0.0;
};

// Splits a raw dual-network output row-block into (lam_g, lam_h) and clamps
// the inequality part at zero. Raw outputs stay raw inside the dual loss;
// the clamp applies wherever multipliers are consumed.
struct DualReadout {
  Tensor lam_g;  // [B x n_ineq], >= 0
  Tensor lam_h;  // [B x n_eq]
};
DualReadout dual_readout(const problems::ProblemFamily& f, const Tensor& raw);

// Primal loss (mean over the batch):
//   f(y) + lam_g'g(y) + lam_h'h(y) + rho/2 (sum max(g,0)^2 + sum h^2)
// with instance-specific multipliers given as constants.
ad::Value primal_loss_pdl(const problems::ProblemFamily& f, const Tensor& X,
                          const ad::Value& Y, const Tensor& lam_g,
                          const Tensor& lam_h, double rho);

// Proximal-step targets for the dual network, computed from frozen primal
// outputs and frozen duals; no gradients flow through them.
struct DualTargets {
  Tensor target_g;  // max(lam_gk + rho g, 0)
  Tensor target_h;  // lam_hk + rho h
};
DualTargets dual_targets(const problems::ProblemFamily& f, const Tensor& X,
                         const Tensor& Y, const DualReadout& frozen, double rho);

// Dual loss: batch mean of ||lam_g - target_g|| + ||lam_h - target_h|| in the
// chosen norm; raw_out is the trainable dual-network output [B x (mg+mh)].
ad::Value dual_loss_pdl(const problems::ProblemFamily& f, const ad::Value& raw_out,
                        const DualTargets& targets, Norm norm);

// Supervised losses; norm l1 = MAE, l2sq = MSE (component means).
ad::Value naive_supervised_loss(const ad::Value& Y, const Tensor& Y_gt, Norm norm);
ad::Value supervised_penalty_loss(const problems::ProblemFamily& f,
                                  const Tensor& X, const ad::Value& Y,
                                  const Tensor& Y_gt, Norm norm,
                                  const PenaltyWeights& w);
ad::Value ssl_penalty_loss(const problems::ProblemFamily& f, const Tensor& X,
                           const ad::Value& Y, const PenaltyWeights& w);

// LD subgradient step: rho_j += gamma * mean violation_j (non-decreasing).
void ld_update(PenaltyWeights& w, const Tensor& mean_viol_g,
               const Tensor& mean_viol_h);

// Whole-training-set violation maximum v_k (Eq.-(7) style) with the current
// networks; lam_g comes clamped from the dual readout.
double dataset_violation(const problems::ProblemFamily& f, const nn::Mlp& primal,
                         const nn::Mlp& dual, const problems::Dataset& data,
                         double rho, std::size_t batch);

// QCQP rounding at inference: sign(y) with sign(0) = +1.
Tensor round_to_signs(const Tensor& Y);

// Builds the primal/dual networks for a family (primal head per family, dual
// final layer zero-initialized).
nn::Mlp make_primal_net(const problems::ProblemFamily& f,
                        const std::vector<std::size_t>& hidden, std::uint64_t seed);
nn::Mlp make_dual_net(const problems::ProblemFamily& f,
                      const std::vector<std::size_t>& hidden, std::uint64_t seed);

// Alternating primal/dual training following the ALM template.
// live_trace, when given, receives rows as training progresses so a caller
// can flush them if a non-finite loss aborts the run.
TrainedModel pdl_train(const problems::ProblemFamily& f,
                       const problems::Dataset& train,
                       const problems::Dataset& valid, const PdlConfig& cfg,
                       std::uint64_t seed,
                       std::vector<TraceRow>* live_trace = nullptr);

// Supervised and self-supervised baselines under one epoch loop. Supervised
// schemes require the ground-truth sidecar.
TrainedModel baseline_train(const problems::ProblemFamily& f,
                            const problems::Dataset& train,
                            const problems::Dataset& valid,
                            const problems::Sidecar* train_gt,
                            const problems::Sidecar* valid_gt, SchemeTag tag,
                            const BaselineConfig& cfg, std::uint64_t seed,
                            std::vector<TraceRow>* live_trace = nullptr);

}  // namespace pdl::schemes
