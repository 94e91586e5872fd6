#pragma once

#include "tsdl/layer.hpp"
#include "tsdl/layers/activation.hpp"

namespace tsdl {

enum class Padding { valid, same, full };

std::string to_string(Padding p);
Padding parse_padding(const std::string& name);

struct Conv1dOptions {
  std::size_t filters = 16;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  Padding padding = Padding::same;
  Activation activation = Activation::linear();
};

/// 1-D cross-correlation over [batch, time, channels] (no kernel flip).
/// Weight layout [kernel, ch_in, filters], bias [filters].
///
/// Output length: valid floor((T-k)/s)+1, same ceil(T/s), full
/// floor((T+k-2)/s)+1. "same" splits the required zero padding with the
/// smaller half before the sequence; "full" pads k-1 on both sides.
class Conv1d final : public UnaryLayer {
 public:
  explicit Conv1d(Conv1dOptions opts);

  LayerKind kind() const override { return LayerKind::conv1d; }
  std::string family() const override { return "conv1d"; }
  std::string summary() const override;
  Shape configure_single(const Shape& input, Rng& rng) override;
  Tensor forward_single(const Tensor& input, Mode mode, bool record) override;
  Tensor backward_single(const Tensor& grad_output) override;
  void collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) override;

  const Conv1dOptions& options() const { return opts_; }

  static std::size_t output_length(std::size_t time, const Conv1dOptions& opts);

 private:
  std::size_t pad_before(std::size_t time) const;

  Conv1dOptions opts_;
  Parameter weight_;
  Parameter bias_;
  Tensor input_;
  Tensor output_;
  bool cached_ = false;
};

enum class PoolKind { max, avg, global_avg };

struct Pool1dOptions {
  PoolKind kind = PoolKind::max;
  std::size_t window = 2;
  std::size_t stride = 2;
};

/// Max/average pooling over the time axis (no padding); global_avg collapses
/// [batch, time, ch] to [batch, ch]. Max-pool backward routes each window's
/// gradient to its first maximal position.
class Pool1d final : public UnaryLayer {
 public:
  explicit Pool1d(Pool1dOptions opts);

  LayerKind kind() const override { return LayerKind::pool; }
  std::string family() const override { return "pooling"; }
  std::string summary() const override;
  Shape configure_single(const Shape& input, Rng& rng) override;
  Tensor forward_single(const Tensor& input, Mode mode, bool record) override;
  Tensor backward_single(const Tensor& grad_output) override;

  const Pool1dOptions& options() const { return opts_; }

 private:
  Pool1dOptions opts_;
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
  bool cached_ = false;
};

}  // namespace tsdl
