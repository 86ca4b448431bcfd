#include "pdl/schemes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "pdl/common.hpp"
#include "pdl/kernels.hpp"
#include "pdl/rng.hpp"

namespace pdl::schemes {

namespace {

const kernels::Ops& K() { return kernels::active(); }

using problems::Dataset;
using problems::Kind;
using problems::ProblemFamily;
using problems::Sidecar;

Tensor gather_rows(const Tensor& X, const std::vector<std::size_t>& idx,
                   std::size_t begin, std::size_t count) {
  const std::size_t p = X.cols();
  Tensor out = Tensor::zeros({count, p});
  for (std::size_t b = 0; b < count; ++b) {
    const double* src = X.data() + idx[begin + b] * p;
    std::copy(src, src + p, out.data() + b * p);
  }
  return out;
}

ad::Value batch_mean_norm(const ad::Value& diff, Norm norm, std::size_t denom) {
  const double inv = 1.0 / static_cast<double>(denom);
  switch (norm) {
    case Norm::l1:
      return ad::scale(ad::l1_norm(diff), inv);
    case Norm::l2sq:
      return ad::scale(ad::l2_norm_squared(diff), inv);
  }
  throw config_error("unknown norm");
}

// batch mean of sum_j w_j * viol(residual_j); hinge for inequalities,
// absolute value for equalities, optionally squared.
ad::Value weighted_violation_term(const ad::Value& residual, const Tensor& w,
                                  bool inequality, ViolationKind kind) {
  ad::Value viol = inequality ? ad::relu(residual) : ad::abs(residual);
  if (kind == ViolationKind::square) viol = ad::square(viol);
  return ad::mean(ad::rowsum(ad::mul_rowvec(viol, ad::Value::constant(w))));
}

}  // namespace

const char* scheme_name(SchemeTag t) {
  switch (t) {
    case SchemeTag::pdl: return "pdl";
    case SchemeTag::naive_mae: return "naive_mae";
    case SchemeTag::naive_mse: return "naive_mse";
    case SchemeTag::mae_penalty: return "mae_penalty";
    case SchemeTag::mse_penalty: return "mse_penalty";
    case SchemeTag::ld: return "ld";
    case SchemeTag::ssl_penalty: return "ssl_penalty";
  }
  return "pdl";
}

SchemeTag scheme_from_name(const std::string& name) {
  for (SchemeTag t : {SchemeTag::pdl, SchemeTag::naive_mae, SchemeTag::naive_mse,
                      SchemeTag::mae_penalty, SchemeTag::mse_penalty,
                      SchemeTag::ld, SchemeTag::ssl_penalty}) {
    if (name == scheme_name(t)) return t;
  }
  throw config_error("unknown scheme '" + name + "'");
}

bool scheme_is_supervised(SchemeTag t) {
  switch (t) {
    case SchemeTag::naive_mae:
    case SchemeTag::naive_mse:
    case SchemeTag::mae_penalty:
    case SchemeTag::mse_penalty:
    case SchemeTag::ld:
      return true;
    default:
      return false;
  }
}

PenaltyWeights PenaltyWeights::uniform(const ProblemFamily& f, double w) {
  PenaltyWeights out;
  out.rho_g = Tensor::full({f.ineq_count()}, w);
  out.rho_h = Tensor::full({f.eq_count()}, w);
  return out;
}

void PdlConfig::validate() const {
  if (!(tau > 0.0 && tau < 1.0)) throw config_error("pdl: tau must be in (0,1)");
  if (!(alpha > 1.0)) throw config_error("pdl: alpha must exceed 1");
  if (!(rho0 > 0.0 && rho0 <= rho_max)) {
    throw config_error("pdl: need 0 < rho <= rho_max");
  }
  if (outer < 1 || inner < 1) throw config_error("pdl: K and L must be >= 1");
  if (batch < 1) throw config_error("pdl: batch size must be >= 1");
  if (!(lr > 0.0)) throw config_error("pdl: lr must be positive");
}

void trace_write_csv(std::ostream& out, const std::vector<TraceRow>& rows) {
  out << "outer_k,inner_step,scheme,train_loss,valid_loss,v_k,rho,lr\n";
  for (const auto& r : rows) {
    out << r.outer_k << ',' << r.inner_step << ',' << r.scheme << ','
        << r.train_loss << ',' << r.valid_loss << ',' << r.v_k << ',' << r.rho
        << ',' << r.lr << '\n';
  }
}

DualReadout dual_readout(const ProblemFamily& f, const Tensor& raw) {
  const std::size_t mg = f.ineq_count(), mh = f.eq_count();
  if (raw.cols() != mg + mh) {
    throw dim_error("dual_readout: raw width " + std::to_string(raw.cols()) +
                    " != " + std::to_string(mg + mh));
  }
  const std::size_t B = raw.rows();
  DualReadout out;
  out.lam_g = Tensor::zeros({B, mg});
  out.lam_h = Tensor::zeros({B, mh});
  for (std::size_t i = 0; i < B; ++i) {
    const double* src = raw.data() + i * (mg + mh);
    K().relu(src, out.lam_g.data() + i * mg, mg);  // clamp at zero
    std::copy(src + mg, src + mg + mh, out.lam_h.data() + i * mh);
  }
  return out;
}

ad::Value primal_loss_pdl(const ProblemFamily& f, const Tensor& X,
                          const ad::Value& Y, const Tensor& lam_g,
                          const Tensor& lam_h, double rho) {
  const std::size_t B = Y.tensor().rows();
  if (B == 0) throw config_error("primal_loss_pdl: empty batch");
  if (lam_g.rows() != B || lam_h.rows() != B) {
    throw dim_error("primal_loss_pdl: dual batch mismatch");
  }
  for (std::size_t i = 0; i < lam_g.numel(); ++i) {
    if (lam_g[i] < 0.0) {
      throw contract_error("primal_loss_pdl: lam_g must be clamped nonnegative");
    }
  }
  auto g = problems::ineq_batch(f, Y);
  auto h = problems::eq_batch(f, Y, X);
  auto fv = problems::objective_batch(f, Y, X);
  auto lin = ad::add(ad::rowsum(ad::mul(g, ad::Value::constant(lam_g))),
                     ad::rowsum(ad::mul(h, ad::Value::constant(lam_h))));
  auto pen = ad::scale(ad::add(ad::rowsum(ad::square(ad::relu(g))),
                               ad::rowsum(ad::square(h))),
                       rho / 2.0);
  return ad::mean(ad::add(ad::add(fv, lin), pen));
}

DualTargets dual_targets(const ProblemFamily& f, const Tensor& X,
                         const Tensor& Y, const DualReadout& frozen,
                         double rho) {
  const Tensor g = problems::ineq_batch(f, Y);
  const Tensor h = problems::eq_batch(f, Y, X);
  if (!frozen.lam_g.same_shape(g) || !frozen.lam_h.same_shape(h)) {
    throw dim_error("dual_targets: frozen dual shape mismatch");
  }
  DualTargets t;
  t.target_g = Tensor::zeros_like(g);
  K().scale(g.data(), rho, t.target_g.data(), g.numel());
  K().add(t.target_g.data(), frozen.lam_g.data(), t.target_g.data(), g.numel());
  K().relu(t.target_g.data(), t.target_g.data(), g.numel());
  t.target_h = Tensor::zeros_like(h);
  K().scale(h.data(), rho, t.target_h.data(), h.numel());
  K().add(t.target_h.data(), frozen.lam_h.data(), t.target_h.data(), h.numel());
  return t;
}

ad::Value dual_loss_pdl(const ProblemFamily& f, const ad::Value& raw_out,
                        const DualTargets& targets, Norm norm) {
  const std::size_t mg = f.ineq_count(), mh = f.eq_count();
  const std::size_t B = raw_out.tensor().rows();
  if (raw_out.tensor().cols() != mg + mh) {
    throw dim_error("dual_loss_pdl: raw output width mismatch");
  }
  auto out_g = ad::slice_cols(raw_out, 0, mg);
  auto out_h = ad::slice_cols(raw_out, mg, mh);
  auto dg = ad::sub(out_g, ad::Value::constant(targets.target_g));
  auto dh = ad::sub(out_h, ad::Value::constant(targets.target_h));
  return ad::add(batch_mean_norm(dg, norm, B), batch_mean_norm(dh, norm, B));
}

ad::Value naive_supervised_loss(const ad::Value& Y, const Tensor& Y_gt,
                                Norm norm) {
  if (!Y.tensor().same_shape(Y_gt)) {
    throw dim_error("naive_supervised_loss: prediction/target shape mismatch");
  }
  auto diff = ad::sub(Y, ad::Value::constant(Y_gt));
  // component mean, i.e. MAE / MSE
  return batch_mean_norm(diff, norm, Y_gt.numel());
}

ad::Value supervised_penalty_loss(const ProblemFamily& f, const Tensor& X,
                                  const ad::Value& Y, const Tensor& Y_gt,
                                  Norm norm, const PenaltyWeights& w) {
  if (w.rho_g.numel() != f.ineq_count() || w.rho_h.numel() != f.eq_count()) {
    throw dim_error("supervised_penalty_loss: weight length mismatch");
  }
  auto loss = naive_supervised_loss(Y, Y_gt, norm);
  auto g = problems::ineq_batch(f, Y);
  auto h = problems::eq_batch(f, Y, X);
  loss = ad::add(loss, weighted_violation_term(g, w.rho_g, true, w.kind));
  loss = ad::add(loss, weighted_violation_term(h, w.rho_h, false, w.kind));
  return loss;
}

ad::Value ssl_penalty_loss(const ProblemFamily& f, const Tensor& X,
                           const ad::Value& Y, const PenaltyWeights& w) {
  if (w.rho_g.numel() != f.ineq_count() || w.rho_h.numel() != f.eq_count()) {
    throw dim_error("ssl_penalty_loss: weight length mismatch");
  }
  auto loss = ad::mean(problems::objective_batch(f, Y, X));
  auto g = problems::ineq_batch(f, Y);
  auto h = problems::eq_batch(f, Y, X);
  loss = ad::add(loss, weighted_violation_term(g, w.rho_g, true, w.kind));
  loss = ad::add(loss, weighted_violation_term(h, w.rho_h, false, w.kind));
  return loss;
}

void ld_update(PenaltyWeights& w, const Tensor& mean_viol_g,
               const Tensor& mean_viol_h) {
  if (!(w.ld_step > 0.0)) throw config_error("ld_update: step must be positive");
  if (mean_viol_g.numel() != w.rho_g.numel() ||
      mean_viol_h.numel() != w.rho_h.numel()) {
    throw dim_error("ld_update: violation length mismatch");
  }
  K().axpy(w.ld_step, mean_viol_g.data(), w.rho_g.data(), w.rho_g.numel());
  K().axpy(w.ld_step, mean_viol_h.data(), w.rho_h.data(), w.rho_h.numel());
}

double dataset_violation(const ProblemFamily& f, const nn::Mlp& primal,
                         const nn::Mlp& dual, const Dataset& data, double rho,
                         std::size_t batch) {
  const std::size_t count = data.count();
  const std::size_t p = data.X.cols();
  double v = 0.0;
  for (std::size_t begin = 0; begin < count; begin += batch) {
    const std::size_t b = std::min(batch, count - begin);
    Tensor X = Tensor::zeros({b, p});
    std::copy(data.X.data() + begin * p, data.X.data() + (begin + b) * p,
              X.data());
    const Tensor Y = primal.predict(X);
    const DualReadout duals = dual_readout(f, dual.predict(X));
    const Tensor g = problems::ineq_batch(f, Y);
    const Tensor h = problems::eq_batch(f, Y, X);
    const std::size_t mg = g.cols(), mh = h.cols();
    for (std::size_t i = 0; i < b; ++i) {
      double vi = K().max_abs(h.data() + i * mh, mh);
      const double* grow = g.data() + i * mg;
      const double* lrow = duals.lam_g.data() + i * mg;
      for (std::size_t j = 0; j < mg; ++j) {
        vi = std::max(vi, std::fabs(std::max(grow[j], -lrow[j] / rho)));
      }
      v = std::max(v, vi);
    }
  }
  return v;
}

Tensor round_to_signs(const Tensor& Y) {
  Tensor out = Tensor::zeros_like(Y);
  for (std::size_t i = 0; i < Y.numel(); ++i) {
    out[i] = Y[i] >= 0.0 ? 1.0 : -1.0;  // ties round up
  }
  return out;
}

nn::Mlp make_primal_net(const ProblemFamily& f,
                        const std::vector<std::size_t>& hidden,
                        std::uint64_t seed) {
  std::vector<std::size_t> widths;
  widths.push_back(f.input_dim());
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(f.dims.n);
  const nn::OutputHead head = f.kind == Kind::qcqp
                                  ? nn::OutputHead::scaled_sigmoid
                                  : nn::OutputHead::identity;
  return nn::Mlp(widths, head, false, seed);
}

nn::Mlp make_dual_net(const ProblemFamily& f,
                      const std::vector<std::size_t>& hidden,
                      std::uint64_t seed) {
  std::vector<std::size_t> widths;
  widths.push_back(f.input_dim());
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(f.ineq_count() + f.eq_count());
  return nn::Mlp(widths, nn::OutputHead::identity, /*zero_final=*/true, seed);
}

namespace {

// One primal or dual inner phase: L epochs over the training set (or L
// freshly sampled iterations when on_the_fly), one Adam step per mini-batch,
// validation-driven lr decay with the best-loss tracker restarting per phase.
template <typename StepFn, typename ValidFn>
void run_phase(const ProblemFamily& f, const Dataset& train,
               const PdlConfig& cfg, std::vector<TraceRow>& trace, int outer_k,
               double rho, const char* phase_tag, Rng rng, nn::Adam& opt,
               StepFn&& step, ValidFn&& validate) {
  nn::LrSchedule sched;
  const std::size_t count = train.count();

  if (cfg.on_the_fly) {
    const int every = cfg.valid_every > 0 ? cfg.valid_every : 500;
    const std::size_t p = f.input_dim();
    double running = 0.0;
    int since = 0;
    for (int it = 1; it <= cfg.inner; ++it) {
      Tensor X = Tensor::zeros({cfg.batch, p});
      for (std::size_t i = 0; i < X.numel(); ++i) X[i] = rng.uniform(-1.0, 1.0);
      running += step(X);
      ++since;
      if (it % every == 0 || it == cfg.inner) {
        const double vloss = validate();
        opt.lr = sched.maybe_decay(opt.lr, vloss);
        trace.push_back({outer_k, it, phase_tag, running / since, vloss, 0.0,
                         rho, opt.lr});
        running = 0.0;
        since = 0;
      }
    }
    return;
  }

  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  const int every = cfg.valid_every > 0 ? cfg.valid_every : 1;
  for (int epoch = 1; epoch <= cfg.inner; ++epoch) {
    rng.shuffle(order);
    double running = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < count; begin += cfg.batch) {
      const std::size_t b = std::min(cfg.batch, count - begin);
      running += step(gather_rows(train.X, order, begin, b));
      ++batches;
    }
    if (epoch % every == 0 || epoch == cfg.inner) {
      const double vloss = validate();
      opt.lr = sched.maybe_decay(opt.lr, vloss);
      trace.push_back({outer_k, epoch, phase_tag, running / batches, vloss, 0.0,
                       rho, opt.lr});
    }
  }
}

}  // namespace

TrainedModel pdl_train(const ProblemFamily& f, const Dataset& train,
                       const Dataset& valid, const PdlConfig& cfg,
                       std::uint64_t seed, std::vector<TraceRow>* live_trace) {
  cfg.validate();
  if (train.count() == 0) throw config_error("pdl_train: empty training set");
  if (valid.count() == 0) throw config_error("pdl_train: empty validation set");

  Rng root(seed);
  nn::Mlp dual = make_dual_net(f, cfg.hidden, root.fork(2).root_seed());
  nn::Adam adam_d(dual.params(), cfg.lr);

  TrainedModel model{make_primal_net(f, cfg.hidden, root.fork(1).root_seed()),
                     std::nullopt,
                     SchemeTag::pdl,
                     {},
                     cfg.rho0};
  nn::Mlp& P = model.primal;
  nn::Adam adam_p(P.params(), cfg.lr);
  std::vector<TraceRow> local_trace;
  std::vector<TraceRow>& trace = live_trace ? *live_trace : local_trace;

  double rho = cfg.rho0;
  double v_prev = 0.0;

  for (int k = 1; k <= cfg.outer; ++k) {
    // primal learning; the dual network only gets read
    {
      auto step = [&](const Tensor& X) {
        const DualReadout duals = dual_readout(f, dual.predict(X));
        auto Y = P.forward(X);
        auto loss = primal_loss_pdl(f, X, Y, duals.lam_g, duals.lam_h, rho);
        const double lv = loss.item();
        ad::backward(loss);
        adam_p.step(P.params());
        ++P.step_count;
        return lv;
      };
      auto validate = [&] {
        const DualReadout duals = dual_readout(f, dual.predict(valid.X));
        auto Y = P.forward(valid.X);
        return primal_loss_pdl(f, valid.X, Y, duals.lam_g, duals.lam_h, rho)
            .item();
      };
      run_phase(f, train, cfg, trace, k, rho, "pdl_primal",
                root.fork(1000 + static_cast<std::uint64_t>(k)), adam_p, step,
                validate);
    }

    // whole-training-set violation, computed with the pre-update duals
    const double v_k = dataset_violation(f, P, dual, train, rho, cfg.batch);

    // dual learning toward the proximal targets; the primal stays frozen
    const nn::Mlp frozen_dual = dual.clone();
    {
      auto step = [&](const Tensor& X) {
        const Tensor Y = P.predict(X);
        const DualReadout frozen = dual_readout(f, frozen_dual.predict(X));
        const DualTargets targets = dual_targets(f, X, Y, frozen, rho);
        auto raw = dual.forward(X);
        auto loss = dual_loss_pdl(f, raw, targets, cfg.dual_norm);
        const double lv = loss.item();
        ad::backward(loss);
        adam_d.step(dual.params());
        ++dual.step_count;
        return lv;
      };
      auto validate = [&] {
        const Tensor Y = P.predict(valid.X);
        const DualReadout frozen = dual_readout(f, frozen_dual.predict(valid.X));
        const DualTargets targets = dual_targets(f, valid.X, Y, frozen, rho);
        auto raw = dual.forward(valid.X);
        return dual_loss_pdl(f, raw, targets, cfg.dual_norm).item();
      };
      run_phase(f, train, cfg, trace, k, rho, "pdl_dual",
                root.fork(2000 + static_cast<std::uint64_t>(k)), adam_d, step,
                validate);
    }

    for (auto it = trace.rbegin(); it != trace.rend() && it->outer_k == k;
         ++it) {
      it->v_k = v_k;
    }

    if (k > 1 && v_k > cfg.tau * v_prev) {
      rho = std::min(cfg.alpha * rho, cfg.rho_max);
    }
    v_prev = v_k;
  }

  model.dual = std::move(dual);
  model.final_rho = rho;
  model.trace = trace;
  return model;
}

TrainedModel baseline_train(const ProblemFamily& f, const Dataset& train,
                            const Dataset& valid, const Sidecar* train_gt,
                            const Sidecar* valid_gt, SchemeTag tag,
                            const BaselineConfig& cfg, std::uint64_t seed,
                            std::vector<TraceRow>* live_trace) {
  if (tag == SchemeTag::pdl) {
    throw config_error("baseline_train does not run the pdl scheme");
  }
  if (train.count() == 0) throw config_error("baseline_train: empty training set");
  const bool supervised = scheme_is_supervised(tag);
  if (supervised) {
    if (train_gt == nullptr || train_gt->Y.rows() != train.count()) {
      throw data_error(std::string("scheme '") + scheme_name(tag) +
                       "' needs a ground-truth sidecar for the training set");
    }
    if (valid_gt != nullptr && valid_gt->Y.rows() != valid.count()) {
      throw data_error("validation sidecar does not match the validation set");
    }
  }

  PenaltyWeights weights = cfg.weights;
  const bool needs_weights = tag != SchemeTag::naive_mae &&
                             tag != SchemeTag::naive_mse;
  if (needs_weights && (weights.rho_g.numel() != f.ineq_count() ||
                        weights.rho_h.numel() != f.eq_count())) {
    throw dim_error("baseline_train: penalty weight shapes do not match family");
  }

  Rng root(seed);
  TrainedModel model{make_primal_net(f, cfg.hidden, root.fork(1).root_seed()),
                     std::nullopt,
                     tag,
                     {},
                     0.0};
  nn::Mlp& net = model.primal;
  nn::Adam adam(net.params(), cfg.lr);
  std::vector<TraceRow> local_trace;
  std::vector<TraceRow>& trace = live_trace ? *live_trace : local_trace;

  const Norm norm = (tag == SchemeTag::naive_mae || tag == SchemeTag::mae_penalty ||
                     tag == SchemeTag::ld)
                        ? Norm::l1
                        : Norm::l2sq;

  auto loss_for = [&](const Tensor& X, const ad::Value& Y,
                      const Tensor* Ygt) -> ad::Value {
    switch (tag) {
      case SchemeTag::naive_mae:
      case SchemeTag::naive_mse:
        return naive_supervised_loss(Y, *Ygt, norm);
      case SchemeTag::mae_penalty:
      case SchemeTag::mse_penalty:
      case SchemeTag::ld:
        return supervised_penalty_loss(f, X, Y, *Ygt, norm, weights);
      case SchemeTag::ssl_penalty:
        return ssl_penalty_loss(f, X, Y, weights);
      default:
        throw config_error("unsupported baseline scheme");
    }
  };

  // mean per-constraint violations over the training set, for LD updates
  auto mean_violations = [&](Tensor& mg, Tensor& mh) {
    mg = Tensor::zeros({f.ineq_count()});
    mh = Tensor::zeros({f.eq_count()});
    const std::size_t count = train.count();
    const std::size_t p = train.X.cols();
    for (std::size_t begin = 0; begin < count; begin += cfg.batch) {
      const std::size_t b = std::min(cfg.batch, count - begin);
      Tensor X = Tensor::zeros({b, p});
      std::copy(train.X.data() + begin * p, train.X.data() + (begin + b) * p,
                X.data());
      const Tensor Y = net.predict(X);
      const Tensor g = problems::ineq_batch(f, Y);
      const Tensor h = problems::eq_batch(f, Y, X);
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < mg.numel(); ++j) {
          mg[j] += std::max(g.at(i, j), 0.0);
        }
        for (std::size_t j = 0; j < mh.numel(); ++j) {
          mh[j] += std::fabs(h.at(i, j));
        }
      }
    }
    K().scale(mg.data(), 1.0 / static_cast<double>(count), mg.data(), mg.numel());
    K().scale(mh.data(), 1.0 / static_cast<double>(count), mh.data(), mh.numel());
  };

  const std::size_t count = train.count();
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  Rng epoch_rng = root.fork(3);
  Rng otf_rng = root.fork(4);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double running = 0.0;
    std::size_t batches = 0;
    if (cfg.on_the_fly && !supervised) {
      // iteration mode: one fresh batch per step
      Tensor X = Tensor::zeros({cfg.batch, f.input_dim()});
      for (std::size_t i = 0; i < X.numel(); ++i) {
        X[i] = otf_rng.uniform(-1.0, 1.0);
      }
      auto loss = loss_for(X, net.forward(X), nullptr);
      running += loss.item();
      batches = 1;
      ad::backward(loss);
      adam.step(net.params());
      ++net.step_count;
    } else {
      epoch_rng.shuffle(order);
      for (std::size_t begin = 0; begin < count; begin += cfg.batch) {
        const std::size_t b = std::min(cfg.batch, count - begin);
        Tensor X = gather_rows(train.X, order, begin, b);
        Tensor Ygt;
        if (supervised) Ygt = gather_rows(train_gt->Y, order, begin, b);
        auto loss = loss_for(X, net.forward(X), supervised ? &Ygt : nullptr);
        running += loss.item();
        ++batches;
        ad::backward(loss);
        adam.step(net.params());
        ++net.step_count;
      }
    }

    if (tag == SchemeTag::ld && weights.ld_period > 0 &&
        epoch % weights.ld_period == 0) {
      Tensor mg, mh;
      mean_violations(mg, mh);
      ld_update(weights, mg, mh);
    }

    // no lr decay for baselines; record a trace row every few epochs
    if (epoch % 10 == 0 || epoch == cfg.epochs || epoch == 1) {
      double vloss = 0.0;
      if (valid.count() > 0 && (!supervised || valid_gt != nullptr)) {
        auto Y = net.forward(valid.X);
        vloss = loss_for(valid.X, Y, valid_gt ? &valid_gt->Y : nullptr).item();
      }
      trace.push_back({0, epoch, scheme_name(tag),
                       running / std::max<std::size_t>(batches, 1), vloss, 0.0,
                       0.0, adam.lr});
    }
  }
  model.trace = trace;
  return model;
}

}  // namespace pdl::schemes
