#pragma once

#include <span>
#include <string>

#include "tsdl/layer.hpp"

namespace tsdl {

enum class ActivationKind { linear, relu, leaky_relu, sigmoid, tanh, softmax };

struct Activation {
  ActivationKind kind = ActivationKind::linear;
  real slope = real(0.3);  // leaky_relu only

  static Activation linear() { return {}; }
  static Activation relu() { return {ActivationKind::relu}; }
  static Activation leaky_relu(real slope = real(0.3)) { return {ActivationKind::leaky_relu, slope}; }
  static Activation sigmoid() { return {ActivationKind::sigmoid}; }
  static Activation tanh() { return {ActivationKind::tanh}; }
  static Activation softmax() { return {ActivationKind::softmax}; }

  bool operator==(const Activation&) const = default;
};

std::string to_string(const Activation& act);
Activation parse_activation(const std::string& name);

/// Applies `act` in place. Softmax normalizes consecutive rows of `row_length`.
void activate(const Activation& act, std::span<real> values, std::size_t row_length);

/// Turns dL/dy into dL/dx in place, given the activation output y. Every
/// supported activation's derivative is recoverable from its output.
void activate_backward(const Activation& act, std::span<const real> output,
                       std::span<real> grad, std::size_t row_length);

/// Standalone activation node; softmax acts on the last axis.
class ActivationLayer final : public UnaryLayer {
 public:
  explicit ActivationLayer(Activation act) : act_(act) {}

  LayerKind kind() const override { return LayerKind::activation; }
  std::string summary() const override { return to_string(act_); }
  Shape configure_single(const Shape& input, Rng& rng) override;
  Tensor forward_single(const Tensor& input, Mode mode, bool record) override;
  Tensor backward_single(const Tensor& grad_output) override;

 private:
  Activation act_;
  Tensor output_;
  bool cached_ = false;
};

}  // namespace tsdl
