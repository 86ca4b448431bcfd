#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <vector>

#include "pdl/autodiff.hpp"
#include "pdl/tensor.hpp"

namespace pdl::nn {

enum class OutputHead {
  identity,
  scaled_sigmoid,  // 2*sigmoid(z) - 1, values in (-1, 1)
  bound_mix,       // lo + hardsigmoid(z) * (hi - lo)
};

const char* head_name(OutputHead h);
OutputHead head_from_name(const std::string& name);

// Fully-connected ReLU network. Hidden weights use uniform fan-in (Kaiming)
// initialization, biases start at zero; with zero_final the last layer's
// weights and biases are exactly zero so the initial output vanishes.
class Mlp {
 public:
  Mlp(std::vector<std::size_t> widths, OutputHead head, bool zero_final,
      std::uint64_t seed, double bound_lo = 0.0, double bound_hi = 1.0);

  // Differentiable forward; x is [B x in] (or [in], treated as one row).
  ad::Value forward(const ad::Value& x) const;
  ad::Value forward(const Tensor& x) const { return forward(ad::Value::constant(x)); }

  // Value-only forward on plain tensors: no graph, bitwise equal to
  // forward(...).tensor().
  Tensor predict(const Tensor& x) const;

  std::vector<ad::Value>& params() { return params_; }
  const std::vector<ad::Value>& params() const { return params_; }
  std::size_t param_count() const;

  const std::vector<std::size_t>& widths() const { return widths_; }
  std::size_t input_width() const { return widths_.front(); }
  std::size_t output_width() const { return widths_.back(); }
  OutputHead head() const { return head_; }
  double bound_lo() const { return bound_lo_; }
  double bound_hi() const { return bound_hi_; }
  bool zero_final() const { return zero_final_; }
  std::uint64_t seed() const { return seed_; }

  std::uint64_t step_count = 0;  // maintained by the optimizer/checkpoint

  // Deep copy with independent parameter storage (frozen snapshots).
  Mlp clone() const;

  // Bit-exact image of all parameters, for freeze-contract checks.
  std::vector<double> flatten_params() const;

 private:
  Mlp() = default;
  std::vector<std::size_t> widths_;
  OutputHead head_ = OutputHead::identity;
  bool zero_final_ = false;
  std::uint64_t seed_ = 0;
  double bound_lo_ = 0.0, bound_hi_ = 1.0;
  std::vector<ad::Value> params_;  // W0, b0, W1, b1, ...
};

// Adam with bias correction; owns the moment state for one parameter list.
struct Adam {
  double lr;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t t = 0;
  std::vector<Tensor> m, v;

  Adam(const std::vector<ad::Value>& params, double lr);

  // Applies one update from the accumulated leaf gradients, then clears them.
  void step(std::vector<ad::Value>& params);
};

// Validation-driven decay: lr *= factor whenever the loss exceeds the best
// loss seen so far.
struct LrSchedule {
  double factor = 0.99;
  double best = std::numeric_limits<double>::infinity();

  // Returns the (possibly decayed) learning rate.
  double maybe_decay(double lr, double validation_loss);
};

// Checkpoint: structured-text header followed by a flat little-endian real64
// parameter blob.
void save_checkpoint(const Mlp& net, const std::filesystem::path& path);
Mlp load_checkpoint(const std::filesystem::path& path);

}  // namespace pdl::nn
