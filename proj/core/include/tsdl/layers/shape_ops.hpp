#pragma once

#include "tsdl/layer.hpp"

namespace tsdl {

/// [batch, d1, d2, ...] -> [batch, d1*d2*...].
class Flatten final : public UnaryLayer {
 public:
  LayerKind kind() const override { return LayerKind::flatten; }
  Shape configure_single(const Shape& input, Rng& rng) override;
  Tensor forward_single(const Tensor& input, Mode mode, bool record) override;
  Tensor backward_single(const Tensor& grad_output) override;

 private:
  Shape input_shape_;
  bool cached_ = false;
};

/// Reshapes the per-sample extents to `target`, keeping element order.
class Reshape final : public UnaryLayer {
 public:
  explicit Reshape(Shape target);

  LayerKind kind() const override { return LayerKind::reshape; }
  std::string summary() const override { return "target=" + to_string(target_); }
  Shape configure_single(const Shape& input, Rng& rng) override;
  Tensor forward_single(const Tensor& input, Mode mode, bool record) override;
  Tensor backward_single(const Tensor& grad_output) override;

 private:
  Shape target_;
  Shape input_shape_;
  bool cached_ = false;
};

/// Elementwise sum of two equally shaped inputs (skip connection).
class Add final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::add; }
  Shape configure(std::span<const Shape> inputs, Rng& rng) override;
  Tensor forward(std::span<const Tensor* const> inputs, Mode mode, bool record) override;
  std::vector<Tensor> backward(const Tensor& grad_output) override;

 private:
  bool cached_ = false;
};

/// Concatenation of any number of inputs along the last (channel) axis.
class Concat final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::concat; }
  Shape configure(std::span<const Shape> inputs, Rng& rng) override;
  Tensor forward(std::span<const Tensor* const> inputs, Mode mode, bool record) override;
  std::vector<Tensor> backward(const Tensor& grad_output) override;

 private:
  std::vector<std::size_t> widths_;
  bool cached_ = false;
};

/// Nearest-neighbour upsampling on the time axis: each step repeated `factor` times.
class Upsample1d final : public UnaryLayer {
 public:
  explicit Upsample1d(std::size_t factor);

  LayerKind kind() const override { return LayerKind::upsample1d; }
  std::string summary() const override { return "factor=" + std::to_string(factor_); }
  Shape configure_single(const Shape& input, Rng& rng) override;
  Tensor forward_single(const Tensor& input, Mode mode, bool record) override;
  Tensor backward_single(const Tensor& grad_output) override;

 private:
  std::size_t factor_;
  bool cached_ = false;
};

/// Forces the time axis to `length`: keeps the leading steps when longer,
/// appends `value` steps when shorter.
class CropPad final : public UnaryLayer {
 public:
  explicit CropPad(std::size_t length, real value = 0);

  LayerKind kind() const override { return LayerKind::crop_pad; }
  std::string summary() const override { return "length=" + std::to_string(length_); }
  Shape configure_single(const Shape& input, Rng& rng) override;
  Tensor forward_single(const Tensor& input, Mode mode, bool record) override;
  Tensor backward_single(const Tensor& grad_output) override;

 private:
  std::size_t length_;
  real value_;
  std::size_t input_length_ = 0;
  bool cached_ = false;
};

}  // namespace tsdl
