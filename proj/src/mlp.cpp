#include "pdl/mlp.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pdl/common.hpp"
#include "pdl/kernels.hpp"
#include "pdl/rng.hpp"

namespace pdl::nn {

namespace {

const kernels::Ops& K() { return kernels::active(); }

Tensor as_matrix(const Tensor& x, std::size_t expected_cols, const char* who) {
  if (x.rank() == 2) {
    if (x.cols() != expected_cols) {
      throw dim_error(std::string(who) + ": input width " +
                      std::to_string(x.cols()) + " != " +
                      std::to_string(expected_cols));
    }
    return x;
  }
  if (x.rank() == 1 && x.numel() == expected_cols) {
    return Tensor::unchecked({1, expected_cols}, x.vec());
  }
  throw dim_error(std::string(who) + ": expected [B x " +
                  std::to_string(expected_cols) + "], got " + x.shape_str());
}

}  // namespace

const char* head_name(OutputHead h) {
  switch (h) {
    case OutputHead::identity: return "identity";
    case OutputHead::scaled_sigmoid: return "scaled_sigmoid";
    case OutputHead::bound_mix: return "bound_mix";
  }
  return "identity";
}

OutputHead head_from_name(const std::string& name) {
  if (name == "identity") return OutputHead::identity;
  if (name == "scaled_sigmoid") return OutputHead::scaled_sigmoid;
  if (name == "bound_mix") return OutputHead::bound_mix;
  throw config_error("unknown output head '" + name + "'");
}

Mlp::Mlp(std::vector<std::size_t> widths, OutputHead head, bool zero_final,
         std::uint64_t seed, double bound_lo, double bound_hi)
    : widths_(std::move(widths)),
      head_(head),
      zero_final_(zero_final),
      seed_(seed),
      bound_lo_(bound_lo),
      bound_hi_(bound_hi) {
  if (widths_.size() < 2) {
    throw config_error("mlp needs at least input and output widths");
  }
  for (std::size_t w : widths_) {
    if (w == 0) throw config_error("mlp widths must be positive");
  }
  Rng rng(seed);
  const std::size_t layers = widths_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t fan_in = widths_[l];
    const std::size_t fan_out = widths_[l + 1];
    Tensor w = Tensor::zeros({fan_out, fan_in});
    const bool last = (l + 1 == layers);
    if (!(last && zero_final_)) {
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (std::size_t i = 0; i < w.numel(); ++i) {
        w[i] = rng.uniform(-bound, bound);
      }
    }
    params_.push_back(ad::Value::leaf(std::move(w)));
    params_.push_back(ad::Value::leaf(Tensor::zeros({fan_out})));
  }
}

ad::Value Mlp::forward(const ad::Value& x) const {
  Tensor xin = as_matrix(x.tensor(), input_width(), "mlp_forward");
  ad::Value h = xin.same_shape(x.tensor())
                    ? x
                    : ad::Value::constant(std::move(xin));
  const std::size_t layers = widths_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const ad::Value& w = params_[2 * l];
    const ad::Value& b = params_[2 * l + 1];
    h = ad::add_rowvec(ad::matmul_nt(h, w), b);
    if (l + 1 < layers) h = ad::relu(h);
  }
  switch (head_) {
    case OutputHead::identity:
      return h;
    case OutputHead::scaled_sigmoid:
      return ad::add_scalar(ad::scale(ad::sigmoid(h), 2.0), -1.0);
    case OutputHead::bound_mix:
      return ad::add_scalar(ad::scale(ad::hardsigmoid(h), bound_hi_ - bound_lo_),
                            bound_lo_);
  }
  return h;
}

Tensor Mlp::predict(const Tensor& x) const {
  Tensor h = as_matrix(x, input_width(), "mlp_predict");
  const std::size_t layers = widths_.size() - 1;
  const std::size_t batch = h.rows();
  for (std::size_t l = 0; l < layers; ++l) {
    const Tensor& w = params_[2 * l].tensor();
    const Tensor& b = params_[2 * l + 1].tensor();
    const std::size_t out_w = w.rows();
    Tensor next = Tensor::zeros({batch, out_w});
    K().gemm_nt(h.data(), w.data(), next.data(), batch, w.cols(), out_w, false);
    for (std::size_t i = 0; i < batch; ++i) {
      K().add(next.data() + i * out_w, b.data(), next.data() + i * out_w, out_w);
    }
    if (l + 1 < layers) K().relu(next.data(), next.data(), next.numel());
    h = std::move(next);
  }
  switch (head_) {
    case OutputHead::identity:
      break;
    case OutputHead::scaled_sigmoid:
      // same operation order as the graph path (sigmoid, x2, -1) so that
      // predict stays bitwise equal to forward
      for (std::size_t i = 0; i < h.numel(); ++i) {
        const double s = 1.0 / (1.0 + std::exp(-h[i]));
        h[i] = 2.0 * s + -1.0;
      }
      break;
    case OutputHead::bound_mix:
      for (std::size_t i = 0; i < h.numel(); ++i) {
        const double y = h[i] / 6.0 + 0.5;
        const double hs = y < 0.0 ? 0.0 : (y > 1.0 ? 1.0 : y);
        h[i] = bound_lo_ + hs * (bound_hi_ - bound_lo_);
      }
      break;
  }
  if (!h.all_finite()) throw numeric_error("mlp_predict", "non-finite output");
  return h;
}

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor().numel();
  return n;
}

Mlp Mlp::clone() const {
  Mlp copy;
  copy.widths_ = widths_;
  copy.head_ = head_;
  copy.zero_final_ = zero_final_;
  copy.seed_ = seed_;
  copy.bound_lo_ = bound_lo_;
  copy.bound_hi_ = bound_hi_;
  copy.step_count = step_count;
  copy.params_.reserve(params_.size());
  for (const auto& p : params_) {
    copy.params_.push_back(ad::Value::leaf(p.tensor()));
  }
  return copy;
}

std::vector<double> Mlp::flatten_params() const {
  std::vector<double> flat;
  flat.reserve(param_count());
  for (const auto& p : params_) {
    const auto& v = p.tensor().vec();
    flat.insert(flat.end(), v.begin(), v.end());
  }
  return flat;
}

Adam::Adam(const std::vector<ad::Value>& params, double lr_) : lr(lr_) {
  m.reserve(params.size());
  v.reserve(params.size());
  for (const auto& p : params) {
    m.push_back(Tensor::zeros_like(p.tensor()));
    v.push_back(Tensor::zeros_like(p.tensor()));
  }
}

void Adam::step(std::vector<ad::Value>& params) {
  if (params.size() != m.size()) {
    throw dim_error("adam: parameter list does not match optimizer state");
  }
  ++t;
  const double bc1 = 1.0 / (1.0 - std::pow(beta1, static_cast<double>(t)));
  const double bc2 = 1.0 / (1.0 - std::pow(beta2, static_cast<double>(t)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i].mutable_tensor();
    if (m[i].numel() != p.numel()) {
      throw dim_error("adam: moment/parameter shape mismatch");
    }
    const Tensor g = params[i].grad_or_zero();
    K().adam_update(p.data(), m[i].data(), v[i].data(), g.data(), p.numel(),
                    lr, beta1, beta2, eps, bc1, bc2);
    params[i].clear_grad();
  }
}

double LrSchedule::maybe_decay(double lr, double validation_loss) {
  if (!std::isfinite(validation_loss)) {
    throw numeric_error("lr_schedule", "non-finite validation loss");
  }
  if (validation_loss > best) {
    lr *= factor;
  }
  best = std::min(best, validation_loss);
  return lr;
}

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const Mlp& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open checkpoint for writing: " + path.string());
  out << "pdl-checkpoint " << kCheckpointVersion << "\n";
  out << "widths";
  for (std::size_t w : net.widths()) out << ' ' << w;
  out << "\n";
  out << "head " << head_name(net.head()) << "\n";
  out << "bounds " << net.bound_lo() << ' ' << net.bound_hi() << "\n";
  out << "zero_final " << (net.zero_final() ? 1 : 0) << "\n";
  out << "seed " << net.seed() << "\n";
  out << "step " << net.step_count << "\n";
  out << "param_count " << net.param_count() << "\n";
  out << "blob\n";
  const std::vector<double> flat = net.flatten_params();
  out.write(reinterpret_cast<const char*>(flat.data()),
            static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (!out) throw io_error("short write on checkpoint: " + path.string());
}

Mlp load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open checkpoint: " + path.string());
  std::string tag;
  std::uint32_t version = 0;
  in >> tag >> version;
  if (!in || tag != "pdl-checkpoint") {
    throw parse_error("not a checkpoint file: " + path.string());
  }
  if (version != kCheckpointVersion) {
    throw version_error("checkpoint version " + std::to_string(version) +
                        " unsupported (expected " +
                        std::to_string(kCheckpointVersion) + ")");
  }
  std::vector<std::size_t> widths;
  std::string head_str;
  double lo = 0.0, hi = 1.0;
  int zero_final = 0;
  std::uint64_t seed = 0, step = 0;
  std::size_t param_count = 0;
  std::string key;
  while (in >> key) {
    if (key == "widths") {
      std::string rest;
      std::getline(in, rest);
      std::istringstream ws(rest);
      std::size_t w;
      while (ws >> w) widths.push_back(w);
    } else if (key == "head") {
      in >> head_str;
    } else if (key == "bounds") {
      in >> lo >> hi;
    } else if (key == "zero_final") {
      in >> zero_final;
    } else if (key == "seed") {
      in >> seed;
    } else if (key == "step") {
      in >> step;
    } else if (key == "param_count") {
      in >> param_count;
    } else if (key == "blob") {
      break;
    } else {
      throw parse_error("unknown checkpoint header key '" + key + "'");
    }
  }
  if (key != "blob") throw parse_error("checkpoint missing blob marker");
  in.get();  // consume newline before the binary payload
  if (widths.size() < 2) throw parse_error("checkpoint missing widths");

  Mlp net(widths, head_from_name(head_str), zero_final != 0, seed, lo, hi);
  net.step_count = step;
  if (net.param_count() != param_count) {
    throw parse_error("checkpoint param_count mismatch");
  }
  std::vector<double> flat(param_count);
  in.read(reinterpret_cast<char*>(flat.data()),
          static_cast<std::streamsize>(param_count * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != param_count * sizeof(double)) {
    throw parse_error("checkpoint blob truncated: " + path.string());
  }
  std::size_t off = 0;
  for (auto& p : net.params()) {
    Tensor& t = p.mutable_tensor();
    std::memcpy(t.data(), flat.data() + off, t.numel() * sizeof(double));
    off += t.numel();
  }
  return net;
}

}  // namespace pdl::nn
