#include "tsdl/layers/activation.hpp"

#include <algorithm>
#include <cmath>

#include "tsdl/error.hpp"

namespace tsdl {

std::string to_string(const Activation& act) {
  switch (act.kind) {
    case ActivationKind::linear: return "linear";
    case ActivationKind::relu: return "relu";
    case ActivationKind::leaky_relu: return "leaky_relu";
    case ActivationKind::sigmoid: return "sigmoid";
    case ActivationKind::tanh: return "tanh";
    case ActivationKind::softmax: return "softmax";
  }
  return "?";
}

Activation parse_activation(const std::string& name) {
  if (name == "linear") return Activation::linear();
  if (name == "relu") return Activation::relu();
  if (name == "leaky_relu") return Activation::leaky_relu();
  if (name == "sigmoid") return Activation::sigmoid();
  if (name == "tanh") return Activation::tanh();
  if (name == "softmax") return Activation::softmax();
  throw ParameterError("unknown activation '" + name + "'");
}

void activate(const Activation& act, std::span<real> values, std::size_t row_length) {
  switch (act.kind) {
    case ActivationKind::linear:
      return;
    case ActivationKind::relu:
      for (real& v : values) v = v > 0 ? v : real{0};
      return;
    case ActivationKind::leaky_relu:
      for (real& v : values) v = v > 0 ? v : act.slope * v;
      return;
    case ActivationKind::sigmoid:
      for (real& v : values) v = real{1} / (real{1} + std::exp(-v));
      return;
    case ActivationKind::tanh:
      for (real& v : values) v = std::tanh(v);
      return;
    case ActivationKind::softmax:
      for (std::size_t r = 0; r < values.size(); r += row_length) {
        auto row = values.subspan(r, row_length);
        const real mx = *std::max_element(row.begin(), row.end());
        real sum = 0;
        for (real& v : row) {
          v = std::exp(v - mx);
          sum += v;
        }
        for (real& v : row) v /= sum;
      }
      return;
  }
}

void activate_backward(const Activation& act, std::span<const real> y,
                       std::span<real> grad, std::size_t row_length) {
  switch (act.kind) {
    case ActivationKind::linear:
      return;
    case ActivationKind::relu:
      for (std::size_t i = 0; i < grad.size(); ++i)
        if (!(y[i] > 0)) grad[i] = 0;
      return;
    case ActivationKind::leaky_relu:
      for (std::size_t i = 0; i < grad.size(); ++i)
        if (!(y[i] > 0)) grad[i] *= act.slope;
      return;
    case ActivationKind::sigmoid:
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= y[i] * (1 - y[i]);
      return;
    case ActivationKind::tanh:
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= 1 - y[i] * y[i];
      return;
    case ActivationKind::softmax:
      for (std::size_t r = 0; r < grad.size(); r += row_length) {
        real dot = 0;
        for (std::size_t j = 0; j < row_length; ++j) dot += grad[r + j] * y[r + j];
        for (std::size_t j = 0; j < row_length; ++j) grad[r + j] = y[r + j] * (grad[r + j] - dot);
      }
      return;
  }
}

Shape ActivationLayer::configure_single(const Shape& input, Rng&) {
  if (input.empty()) throw ShapeError("activation needs at least rank 1 input");
  return input;
}

Tensor ActivationLayer::forward_single(const Tensor& input, Mode, bool record) {
  Tensor out = input;
  activate(act_, out.data(), input.shape().back());
  if (record) {
    output_ = out;
    cached_ = true;
  }
  return out;
}

Tensor ActivationLayer::backward_single(const Tensor& grad_output) {
  if (!cached_) throw StateError("activation backward called before a recorded forward");
  Tensor g = grad_output;
  activate_backward(act_, output_.data(), g.data(), output_.shape().back());
  return g;
}

}  // namespace tsdl
