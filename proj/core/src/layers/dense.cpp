#include "tsdl/layers/dense.hpp"

#include <algorithm>

#include "tsdl/error.hpp"

namespace tsdl {

Dense::Dense(std::size_t units, Activation act) : units_(units), act_(act) {
  if (units_ < 1) throw ParameterError("dense layer needs at least one unit");
}

std::string Dense::summary() const {
  return "units=" + std::to_string(units_) + " activation=" + to_string(act_);
}

Shape Dense::configure_single(const Shape& input, Rng& rng) {
  if (input.size() != 1) {
    throw ShapeError("dense expects rank-2 [batch, features] input (flatten first), got per-sample " +
                     to_string(input));
  }
  const Shape wshape{input[0], units_};
  if (weight_.value.shape() != wshape) {
    weight_ = Parameter(init::glorot_uniform(wshape, input[0], units_, rng));
    bias_ = Parameter(Tensor({units_}));
  }
  return {units_};
}

Tensor Dense::forward_single(const Tensor& x, Mode, bool record) {
  if (x.rank() != 2) throw ShapeError("dense expects rank-2 input, got " + to_string(x.shape()));
  const std::size_t batch = x.extent(0), n_in = x.extent(1);
  if (n_in != weight_.value.extent(0)) {
    throw ShapeError("dense input width " + std::to_string(n_in) + " does not match weight " +
                     to_string(weight_.value.shape()));
  }
  Tensor y({batch, units_});
  for (std::size_t b = 0; b < batch; ++b)
    std::copy_n(bias_.value.raw(), units_, y.raw() + b * units_);
  kernels::gemm(false, false, batch, units_, n_in, 1, x.raw(), n_in, weight_.value.raw(), units_,
                1, y.raw(), units_);
  activate(act_, y.data(), units_);
  if (record) {
    input_ = x;
    output_ = y;
    cached_ = true;
  }
  return y;
}

Tensor Dense::backward_single(const Tensor& grad_output) {
  if (!cached_) throw StateError("dense backward called before a recorded forward");
  if (grad_output.shape() != output_.shape()) {
    throw ShapeError("dense gradient shape " + to_string(grad_output.shape()) +
                     " does not match output " + to_string(output_.shape()));
  }
  Tensor dz = grad_output;
  activate_backward(act_, output_.data(), dz.data(), units_);
  const std::size_t batch = input_.extent(0), n_in = input_.extent(1);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t u = 0; u < units_; ++u) bias_.grad.raw()[u] += dz.raw()[b * units_ + u];
  // dW += x^T dz, dx = dz W^T
  kernels::gemm(true, false, n_in, units_, batch, 1, input_.raw(), n_in, dz.raw(), units_, 1,
                weight_.grad.raw(), units_);
  Tensor dx({batch, n_in});
  kernels::gemm(false, true, batch, n_in, units_, 1, dz.raw(), units_, weight_.value.raw(), units_,
                0, dx.raw(), n_in);
  return dx;
}

void Dense::collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + "weight", &weight_});
  out.push_back({prefix + "bias", &bias_});
}

}  // namespace tsdl
