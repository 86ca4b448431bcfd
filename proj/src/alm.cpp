#include "pdl/alm.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "pdl/common.hpp"
#include "pdl/kernels.hpp"
#include "pdl/parallel.hpp"
#include "pdl/rng.hpp"

namespace pdl::alm {

namespace {

const kernels::Ops& K() { return kernels::active(); }

Tensor as_row(const Tensor& v) {
  return Tensor::unchecked({1, v.numel()}, v.vec());
}

Tensor flat(Tensor t, std::size_t n) {
  return Tensor::unchecked({n}, std::move(t.vec()));
}

}  // namespace

void AlmConfig::validate() const {
  if (!(tau > 0.0 && tau < 1.0)) throw config_error("alm: tau must be in (0,1)");
  if (!(alpha > 1.0)) throw config_error("alm: alpha must exceed 1");
  if (!(rho0 > 0.0 && rho0 <= rho_max)) {
    throw config_error("alm: need 0 < rho0 <= rho_max");
  }
  if (max_outer < 1) throw config_error("alm: max_outer must be >= 1");
  if (!(inner_tol > 0.0)) throw config_error("alm: inner_tol must be positive");
  if (!(eps > 0.0)) throw config_error("alm: eps must be positive");
}

AlmConfig qp_defaults() {
  AlmConfig cfg;
  cfg.rho0 = 1.0;
  cfg.alpha = 10.0;
  cfg.tau = 0.5;
  cfg.max_outer = 20;
  return cfg;
}

AlmConfig qcqp_defaults() {
  AlmConfig cfg;
  cfg.rho0 = 0.1;
  cfg.alpha = 1.2;
  cfg.tau = 0.5;
  cfg.max_outer = 50;
  return cfg;
}

DualEstimates DualEstimates::zeros(const problems::ProblemFamily& f) {
  return {Tensor::zeros({f.ineq_count()}), Tensor::zeros({f.eq_count()})};
}

ad::Value augmented_lagrangian(const problems::ProblemFamily& f, const Tensor& x,
                               const ad::Value& y, const DualEstimates& duals,
                               double rho) {
  if (duals.lam_g.numel() != f.ineq_count() ||
      duals.lam_h.numel() != f.eq_count()) {
    throw dim_error("augmented_lagrangian: dual length mismatch");
  }
  for (std::size_t j = 0; j < duals.lam_g.numel(); ++j) {
    if (duals.lam_g[j] < 0.0) {
      throw contract_error("augmented_lagrangian: lam_g must be nonnegative");
    }
  }
  if (y.tensor().rank() != 2 || y.tensor().rows() != 1) {
    throw contract_error("augmented_lagrangian expects y as a [1 x n] value");
  }
  const Tensor xrow = as_row(x);
  const ad::Value& Y = y;

  auto fv = ad::sum(problems::objective_batch(f, Y, xrow));
  auto g = problems::ineq_batch(f, Y);
  auto h = problems::eq_batch(f, Y, xrow);
  auto lin_g = ad::sum(ad::mul(g, ad::Value::constant(as_row(duals.lam_g))));
  auto lin_h = ad::sum(ad::mul(h, ad::Value::constant(as_row(duals.lam_h))));
  auto pen = ad::scale(ad::add(ad::l2_norm_squared(ad::relu(g)),
                               ad::l2_norm_squared(h)),
                       rho / 2.0);
  return ad::add(ad::add(fv, ad::add(lin_g, lin_h)), pen);
}

double lagrangian_value(const problems::ProblemFamily& f, const Tensor& x,
                        const Tensor& y, const DualEstimates& duals, double rho) {
  const Tensor yrow = as_row(y);
  const Tensor xrow = as_row(x);
  const Tensor g = problems::ineq_batch(f, yrow);
  const Tensor h = problems::eq_batch(f, yrow, xrow);
  const double fv = problems::objective_batch(f, yrow, xrow)[0];
  const std::size_t mg = g.numel(), mh = h.numel();

  double acc = fv;
  acc += K().dot(duals.lam_g.data(), g.data(), mg);
  acc += K().dot(duals.lam_h.data(), h.data(), mh);
  double pen = K().dot(h.data(), h.data(), mh);
  if (mg > 0) {
    Tensor gp = Tensor::zeros({mg});
    K().relu(g.data(), gp.data(), mg);
    pen += K().dot(gp.data(), gp.data(), mg);
  }
  return acc + 0.5 * rho * pen;
}

Tensor lagrangian_grad(const problems::ProblemFamily& f, const Tensor& x,
                       const Tensor& y, const DualEstimates& duals, double rho,
                       double* value_out) {
  auto Y = ad::Value::leaf(as_row(y));
  auto L = augmented_lagrangian(f, x, Y, duals, rho);
  if (value_out) *value_out = L.item();
  ad::backward(L);
  return flat(Y.grad_or_zero(), y.numel());
}

InnerResult inner_solve(const problems::ProblemFamily& f, const Tensor& x,
                        Tensor y0, const DualEstimates& duals, double rho,
                        double tol, std::size_t max_iters) {
  if (!(tol > 0.0)) throw config_error("inner_solve: tol must be positive");
  const std::size_t n = y0.numel();
  InnerResult res;
  res.y = std::move(y0);

  double f0 = 0.0;
  Tensor grad = lagrangian_grad(f, x, res.y, duals, rho, &f0);
  res.grad_inf = K().max_abs(grad.data(), n);
  if (res.grad_inf <= tol) {
    res.converged = true;
    return res;
  }

  // Polak-Ribiere+ with restart on non-descent directions and Armijo
  // backtracking (c = 1e-4).
  constexpr double armijo_c = 1e-4;
  Tensor dir = Tensor::zeros({n});
  K().scale(grad.data(), -1.0, dir.data(), n);
  double step = 1.0 / (1.0 + res.grad_inf);

  Tensor trial = Tensor::zeros({n});
  while (res.iters < max_iters) {
    double gd = K().dot(grad.data(), dir.data(), n);
    if (gd >= 0.0) {  // restart: steepest descent
      K().scale(grad.data(), -1.0, dir.data(), n);
      gd = -K().dot(grad.data(), grad.data(), n);
    }

    double t = step;
    bool accepted = false;
    double f_trial = 0.0;
    for (int halvings = 0; halvings < 60; ++halvings) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = res.y[i] + t * dir[i];
      f_trial = lagrangian_value(f, x, trial, duals, rho);
      if (std::isfinite(f_trial) && f_trial <= f0 + armijo_c * t * gd) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // flat to machine precision along every direction we can build
      break;
    }
    std::swap(res.y, trial);
    if (!res.y.all_finite()) {
      std::ostringstream os;
      os << "non-finite iterate at inner iteration " << res.iters
         << " (rho = " << rho << ", step = " << t << ")";
      throw numeric_error("inner_solve", os.str());
    }
    f0 = f_trial;
    step = t * 2.0;  // try growing next time
    ++res.iters;

    Tensor grad_new = lagrangian_grad(f, x, res.y, duals, rho, nullptr);
    res.grad_inf = K().max_abs(grad_new.data(), n);
    if (res.grad_inf <= tol) {
      res.converged = true;
      break;
    }
    const double denom = K().dot(grad.data(), grad.data(), n);
    double beta = 0.0;
    if (denom > 0.0) {
      double num = K().dot(grad_new.data(), grad_new.data(), n) -
                   K().dot(grad_new.data(), grad.data(), n);
      beta = std::max(0.0, num / denom);
    }
    for (std::size_t i = 0; i < n; ++i) dir[i] = -grad_new[i] + beta * dir[i];
    grad = std::move(grad_new);
  }
  return res;
}

DualEstimates dual_update(const DualEstimates& duals, const Tensor& g,
                          const Tensor& h, double rho) {
  if (duals.lam_g.numel() != g.numel() || duals.lam_h.numel() != h.numel()) {
    throw dim_error("dual_update: shape mismatch");
  }
  DualEstimates next;
  next.lam_g = Tensor::zeros_like(duals.lam_g);
  const std::size_t mg = g.numel();
  K().axpy(rho, g.data(), next.lam_g.data(), mg);  // rho * g
  K().add(next.lam_g.data(), duals.lam_g.data(), next.lam_g.data(), mg);
  K().relu(next.lam_g.data(), next.lam_g.data(), mg);

  next.lam_h = Tensor::zeros_like(duals.lam_h);
  K().add(duals.lam_h.data(), next.lam_h.data(), next.lam_h.data(), h.numel());
  K().axpy(rho, h.data(), next.lam_h.data(), h.numel());
  return next;
}

double violation(const Tensor& g, const Tensor& h, const Tensor& lam_g,
                 double rho) {
  if (!(rho > 0.0)) throw config_error("violation: rho must be positive");
  if (lam_g.numel() != g.numel()) throw dim_error("violation: lam_g mismatch");
  double v = K().max_abs(h.data(), h.numel());
  for (std::size_t j = 0; j < g.numel(); ++j) {
    const double sigma = std::max(g[j], -lam_g[j] / rho);
    v = std::max(v, std::fabs(sigma));
  }
  return v;
}

double violation(const problems::ProblemFamily& f, const Tensor& x,
                 const Tensor& y, const Tensor& lam_g, double rho) {
  return violation(problems::ineq_one(f, y), problems::eq_one(f, x, y), lam_g,
                   rho);
}

double update_rho(double rho, double v_k, double v_prev, int k,
                  const AlmConfig& cfg) {
  if (k <= 1) return rho;
  if (v_k > cfg.tau * v_prev) return std::min(cfg.alpha * rho, cfg.rho_max);
  return rho;
}

void trace_write_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
  out << "k,f,v_k,rho,inner_iters\n";
  for (const auto& row : trace) {
    out << row.k << ',' << row.f << ',' << row.v << ',' << row.rho << ','
        << row.inner_iters << '\n';
  }
}

AlmResult alm_solve(const problems::ProblemFamily& f, const Tensor& x,
                    const AlmConfig& cfg, Tensor y0, DualEstimates dual0) {
  cfg.validate();
  if (y0.numel() != f.dims.n) throw dim_error("alm_solve: bad y0 length");

  AlmResult res;
  res.y = std::move(y0);
  res.duals = std::move(dual0);
  double rho = cfg.rho0;
  double v_prev = std::numeric_limits<double>::infinity();
  int growth_streak = 0;
  const std::size_t inner_cap = cfg.inner_cap_mult * f.dims.n;

  for (int k = 1; k <= cfg.max_outer; ++k) {
    InnerResult inner =
        inner_solve(f, x, std::move(res.y), res.duals, rho, cfg.inner_tol, inner_cap);
    res.y = std::move(inner.y);

    const Tensor g = problems::ineq_one(f, res.y);
    const Tensor h = problems::eq_one(f, x, res.y);
    const double v_k = violation(g, h, res.duals.lam_g, rho);  // pre-update duals
    res.objective = problems::objective_one(f, x, res.y);
    res.final_violation = v_k;
    res.trace.push_back({k, res.objective, v_k, rho, inner.iters});

    res.duals = dual_update(res.duals, g, h, rho);

    if (v_k < cfg.eps) {
      res.converged = true;
      break;
    }
    if (k > 1 && v_k > v_prev && rho >= cfg.rho_max) {
      if (++growth_streak >= 5) {
        res.diverged = true;
        break;
      }
    } else {
      growth_streak = 0;
    }
    rho = update_rho(rho, v_k, v_prev, k, cfg);
    v_prev = v_k;
  }
  return res;
}

MultistartResult alm_multistart(const problems::ProblemFamily& f, const Tensor& x,
                                const AlmConfig& cfg, std::size_t num_starts,
                                std::uint64_t seed, unsigned jobs) {
  if (num_starts == 0) throw config_error("alm_multistart: num_starts >= 1");
  const bool qcqp = f.kind == problems::Kind::qcqp;
  const std::size_t n = f.dims.n;

  std::vector<AlmResult> runs(num_starts);
  Rng base(seed);
  parallel_for(num_starts, jobs, [&](std::size_t s) {
    Rng rng = base.fork(s);
    Tensor y0 = Tensor::zeros({n});
    const double lim = qcqp ? 2.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) y0[i] = rng.uniform(-lim, lim);
    DualEstimates duals = DualEstimates::zeros(f);
    if (qcqp) {
      for (std::size_t i = 0; i < duals.lam_h.numel(); ++i) {
        duals.lam_h[i] = rng.uniform(-2.0, 2.0);
      }
    }
    runs[s] = alm_solve(f, x, cfg, std::move(y0), std::move(duals));
  });

  MultistartResult best;
  bool best_feasible = false;
  bool have = false;
  for (std::size_t s = 0; s < num_starts; ++s) {
    const AlmResult& r = runs[s];
    const bool feasible = r.final_violation <= cfg.eps;
    const bool better =
        !have ||
        (feasible && !best_feasible) ||
        (feasible == best_feasible &&
         (feasible ? r.objective < best.f
                   : r.final_violation < best.violation));
    if (better) {
      best.y = r.y;
      best.f = r.objective;
      best.violation = r.final_violation;
      best.best_start = s;
      best.converged = r.converged;
      best.best_trace = r.trace;
      best_feasible = feasible;
      have = true;
    }
  }
  return best;
}

}  // namespace pdl::alm
