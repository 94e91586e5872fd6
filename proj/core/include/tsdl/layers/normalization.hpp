#pragma once

#include "tsdl/layer.hpp"

namespace tsdl {

struct BatchNormOptions {
  real momentum = real(0.01);
  real epsilon = real(1e-3);
};

/// Per-channel normalization over every axis but the last.
///
/// Train mode uses biased batch statistics and updates
///   running <- (1 - momentum) * running + momentum * batch.
/// Eval mode uses the running buffers. Output = gain * normalized + shift.
class BatchNorm1d final : public UnaryLayer {
 public:
  explicit BatchNorm1d(BatchNormOptions opts = {});

  LayerKind kind() const override { return LayerKind::batch_norm; }
  std::string family() const override { return "batchnorm"; }
  std::string summary() const override;
  Shape configure_single(const Shape& input, Rng& rng) override;
  Tensor forward_single(const Tensor& input, Mode mode, bool record) override;
  Tensor backward_single(const Tensor& grad_output) override;
  void collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) override;
  void collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) override;

 private:
  BatchNormOptions opts_;
  Parameter gain_;
  Parameter shift_;
  Tensor running_mean_;
  Tensor running_var_;
  // Recorded for backward.
  Tensor normalized_;
  std::vector<real> inv_std_;
  Mode recorded_mode_ = Mode::eval;
  bool cached_ = false;
};

/// Inverted dropout: in train mode each element is zeroed with probability
/// `rate` and survivors are scaled by 1/(1-rate); eval mode is the identity.
/// Masks are drawn from a stream seeded by `seed`.
class Dropout final : public UnaryLayer {
 public:
  explicit Dropout(real rate, std::uint64_t seed = 0);

  LayerKind kind() const override { return LayerKind::dropout; }
  std::string family() const override { return "dropout"; }
  std::string summary() const override;
  Shape configure_single(const Shape& input, Rng& rng) override;
  Tensor forward_single(const Tensor& input, Mode mode, bool record) override;
  Tensor backward_single(const Tensor& grad_output) override;

  /// While frozen, train-mode forwards reuse the last mask instead of drawing.
  void freeze_mask(bool frozen) { mask_frozen_ = frozen; }
  void reseed(std::uint64_t seed) { rng_ = Rng(seed); }
  real rate() const { return rate_; }

 private:
  real rate_;
  Rng rng_;
  Tensor mask_;  // holds 0 or 1/(1-rate)
  bool has_mask_ = false;
  bool mask_frozen_ = false;
  bool identity_ = true;
  bool cached_ = false;
};

}  // namespace tsdl
