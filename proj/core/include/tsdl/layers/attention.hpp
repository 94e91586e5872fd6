#pragma once

#include <memory>

#include "tsdl/layer.hpp"
#include "tsdl/layers/conv.hpp"
#include "tsdl/layers/dense.hpp"
#include "tsdl/layers/normalization.hpp"

namespace tsdl {

/// Squeeze-and-excitation over [batch, time, ch]:
///   s = sigmoid(relu(GAP(x) W1 + b1) W2 + b2),  y[b,t,c] = x[b,t,c] * s[b,c]
/// with a bottleneck of max(1, ch / ratio) units.
class SeBlock final : public UnaryLayer {
 public:
  explicit SeBlock(std::size_t ratio = 8);

  LayerKind kind() const override { return LayerKind::se_block; }
  std::string family() const override { return "se_block"; }
  std::string summary() const override { return "ratio=" + std::to_string(ratio_); }
  Shape configure_single(const Shape& input, Rng& rng) override;
  Tensor forward_single(const Tensor& input, Mode mode, bool record) override;
  Tensor backward_single(const Tensor& grad_output) override;
  void collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) override;

 private:
  std::size_t ratio_;
  Pool1d gap_{{PoolKind::global_avg}};
  std::unique_ptr<Dense> squeeze_;
  std::unique_ptr<Dense> excite_;
  Tensor input_, gate_;
  bool cached_ = false;
};

struct RtaOptions {
  std::size_t filters = 16;
  std::size_t kernel = 3;
  std::size_t pool_window = 2;
};

/// Residual temporal attention block.
///
///   trunk     = relu(bn(conv(relu(bn(conv(x))))))
///   attention = sigmoid(fit_T(upsample(bn(conv(maxpool(x))))))
///   y         = trunk * (1 + attention) + shortcut(x)
///
/// fit_T crops or zero-extends the upsampled branch to the input length; the
/// shortcut is a 1x1 convolution when the channel count changes.
class RtaBlock final : public UnaryLayer {
 public:
  explicit RtaBlock(RtaOptions opts = {});

  LayerKind kind() const override { return LayerKind::rta_block; }
  std::string family() const override { return "rta_block"; }
  std::string summary() const override;
  Shape configure_single(const Shape& input, Rng& rng) override;
  Tensor forward_single(const Tensor& input, Mode mode, bool record) override;
  Tensor backward_single(const Tensor& grad_output) override;
  void collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) override;
  void collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) override;

  static std::size_t min_length(const RtaOptions& opts) { return opts.pool_window; }

 private:
  RtaOptions opts_;
  Sequential trunk_;
  Sequential attention_;
  std::unique_ptr<Conv1d> shortcut_;
  std::size_t upsampled_length_ = 0;
  Tensor trunk_out_, gate_;
  bool cached_ = false;
};

/// Channel gating followed by time-step gating:
///   s = sigmoid(relu(GAP(x) W1 + b1) W2 + b2)      u = x * s   (per channel)
///   a = sigmoid(conv(mean_c u))                    y = u * a   (per step)
class SpatioTemporalAttention final : public UnaryLayer {
 public:
  explicit SpatioTemporalAttention(std::size_t ratio = 8, std::size_t kernel = 7);

  LayerKind kind() const override { return LayerKind::spatiotemporal_attention; }
  std::string family() const override { return "attention"; }
  std::string summary() const override;
  Shape configure_single(const Shape& input, Rng& rng) override;
  Tensor forward_single(const Tensor& input, Mode mode, bool record) override;
  Tensor backward_single(const Tensor& grad_output) override;
  void collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) override;

 private:
  std::size_t ratio_;
  std::size_t kernel_;
  Pool1d gap_{{PoolKind::global_avg}};
  std::unique_ptr<Dense> squeeze_;
  std::unique_ptr<Dense> excite_;
  std::unique_ptr<Conv1d> temporal_;
  Tensor input_, channel_gate_, scaled_, step_gate_;
  bool cached_ = false;
};

/// Additive attention pooling over time:
///   e_t = tanh(h_t W1 + b1) W2 + b2,  alpha = softmax_t(e),  y = sum_t alpha_t h_t
/// [batch, time, ch] -> [batch, ch].
class AttentionPooling final : public UnaryLayer {
 public:
  explicit AttentionPooling(std::size_t units = 32);

  LayerKind kind() const override { return LayerKind::attention_pooling; }
  std::string family() const override { return "attention"; }
  std::string summary() const override { return "units=" + std::to_string(units_); }
  Shape configure_single(const Shape& input, Rng& rng) override;
  Tensor forward_single(const Tensor& input, Mode mode, bool record) override;
  Tensor backward_single(const Tensor& grad_output) override;
  void collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) override;

 private:
  std::size_t units_;
  Dense hidden_;
  Dense score_;
  Tensor input_, weights_;
  bool cached_ = false;
};

}  // namespace tsdl
