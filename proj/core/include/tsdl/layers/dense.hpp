#pragma once

#include "tsdl/layer.hpp"
#include "tsdl/layers/activation.hpp"

namespace tsdl {

/// Affine map over [batch, n_in] followed by an optional activation.
/// Weight [n_in, units], bias [units].
class Dense final : public UnaryLayer {
 public:
  explicit Dense(std::size_t units, Activation act = Activation::linear());

  LayerKind kind() const override { return LayerKind::dense; }
  std::string summary() const override;
  Shape configure_single(const Shape& input, Rng& rng) override;
  Tensor forward_single(const Tensor& input, Mode mode, bool record) override;
  Tensor backward_single(const Tensor& grad_output) override;
  void collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) override;

  std::size_t units() const { return units_; }
  const Activation& activation() const { return act_; }

 private:
  std::size_t units_;
  Activation act_;
  Parameter weight_;
  Parameter bias_;
  Tensor input_;
  Tensor output_;
  bool cached_ = false;
};

}  // namespace tsdl
