#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "pdl/problems.hpp"
#include "pdl/schemes.hpp"

namespace pdl::eval {

// 100 * |f_ref - f_pred| / |f_ref|; undefined at f_ref = 0.
double optimality_gap(double f_ref, double f_pred);

struct GapResult {
  double value = 0.0;
  bool absolute_fallback = false;  // f_ref == 0: value is |f_ref - f_pred|
};
GapResult gap_or_absolute(double f_ref, double f_pred);

struct Violations {
  double max_eq = 0.0;
  double mean_eq = 0.0;
  double max_ineq = 0.0;
  double mean_ineq = 0.0;
};
// eq violations are |h_j(y)|, ineq violations max(g_j(y), 0).
Violations violations(const problems::ProblemFamily& f, const Tensor& x,
                      const Tensor& y);

struct InstanceRecord {
  double objective = 0.0;
  double gap_pct = 0.0;
  bool gap_absolute = false;
  Violations viol;
};

struct EvalReport {
  std::string scheme;
  std::vector<InstanceRecord> rows;

  // aggregates: means over instances; "max eq" aggregates the per-instance
  // maxima (Table-1 convention)
  double mean_objective = 0.0;
  double mean_gap = 0.0;
  double gap_min = 0.0;
  double gap_median = 0.0;
  double gap_max = 0.0;
  double mean_max_eq = 0.0;
  double mean_mean_eq = 0.0;
  double mean_max_ineq = 0.0;
  double mean_mean_ineq = 0.0;
  std::size_t gap_fallback_count = 0;
  double inference_seconds = 0.0;

  void recompute_aggregates();
};

// A model is anything that maps a parameter batch [B x p] to solutions
// [B x n]; neural checkpoints bind through predictor_of.
using Predictor = std::function<Tensor(const Tensor&)>;
Predictor predictor_of(const nn::Mlp& net);

// Per-instance metrics against the reference sidecar. With several models the
// per-instance best objective wins (stochastic multi-start reading); QCQP
// outputs are rounded to signs before scoring.
EvalReport evaluate(const problems::ProblemFamily& f,
                    const problems::Dataset& test,
                    const std::vector<Predictor>& models,
                    const problems::Sidecar& reference,
                    const std::string& scheme_label);

// Table-style CSV: Method,Type,Obj.,Opt. Gap(%),Max eq.,Max ineq.,
// Mean eq.,Mean ineq.
void report_write_csv(std::ostream& out,
                      const std::vector<EvalReport>& reports);
void report_write_per_instance_csv(std::ostream& out, const EvalReport& report);
void report_write_summary(std::ostream& out, const EvalReport& report);

// SSL/SL/opt column for a scheme label.
std::string scheme_type_label(const std::string& scheme);

}  // namespace pdl::eval
