#include "tsdl/layers/normalization.hpp"

#include <cmath>

#include "tsdl/error.hpp"

namespace tsdl {

BatchNorm1d::BatchNorm1d(BatchNormOptions opts) : opts_(opts) {
  if (opts_.momentum < 0 || opts_.momentum > 1) throw ParameterError("batch-norm momentum must lie in [0,1]");
  if (opts_.epsilon <= 0) throw ParameterError("batch-norm epsilon must be positive");
}

std::string BatchNorm1d::summary() const {
  return "momentum=" + std::to_string(opts_.momentum) + " epsilon=" + std::to_string(opts_.epsilon);
}

Shape BatchNorm1d::configure_single(const Shape& input, Rng&) {
  if (input.empty()) throw ShapeError("batch-norm needs a channel axis");
  const std::size_t ch = input.back();
  if (gain_.value.shape() != Shape{ch}) {
    gain_ = Parameter(Tensor({ch}, real{1}));
    shift_ = Parameter(Tensor({ch}));
    running_mean_ = Tensor({ch});
    running_var_ = Tensor({ch}, real{1});
  }
  return input;
}

Tensor BatchNorm1d::forward_single(const Tensor& x, Mode mode, bool record) {
  const std::size_t ch = gain_.value.size();
  if (x.rank() < 2 || x.shape().back() != ch) {
    throw ShapeError("batch-norm input " + to_string(x.shape()) + " does not match " +
                     std::to_string(ch) + " channels");
  }
  const std::size_t rows = x.size() / ch;
  Tensor y(x.shape());
  Tensor xhat(x.shape());
  std::vector<real> inv_std(ch);
  const real* g = gain_.value.raw();
  const real* sh = shift_.value.raw();

  if (mode == Mode::train) {
    if (rows < 2) {
      throw DegenerateError("batch-norm in train mode needs at least 2 values per channel, got " +
                            std::to_string(rows));
    }
    std::vector<real> mean(ch, 0), var(ch, 0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < ch; ++c) mean[c] += x.raw()[r * ch + c];
    for (real& m : mean) m /= static_cast<real>(rows);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < ch; ++c) {
        const real d = x.raw()[r * ch + c] - mean[c];
        var[c] += d * d;
      }
    for (real& v : var) v /= static_cast<real>(rows);
    for (std::size_t c = 0; c < ch; ++c) {
      inv_std[c] = real{1} / std::sqrt(var[c] + opts_.epsilon);
      running_mean_.raw()[c] = (1 - opts_.momentum) * running_mean_.raw()[c] + opts_.momentum * mean[c];
      running_var_.raw()[c] = (1 - opts_.momentum) * running_var_.raw()[c] + opts_.momentum * var[c];
    }
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < ch; ++c) {
        const std::size_t i = r * ch + c;
        xhat.raw()[i] = (x.raw()[i] - mean[c]) * inv_std[c];
        y.raw()[i] = g[c] * xhat.raw()[i] + sh[c];
      }
  } else {
    for (std::size_t c = 0; c < ch; ++c)
      inv_std[c] = real{1} / std::sqrt(running_var_.raw()[c] + opts_.epsilon);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < ch; ++c) {
        const std::size_t i = r * ch + c;
        xhat.raw()[i] = (x.raw()[i] - running_mean_.raw()[c]) * inv_std[c];
        y.raw()[i] = g[c] * xhat.raw()[i] + sh[c];
      }
  }
  if (record) {
    normalized_ = std::move(xhat);
    inv_std_ = std::move(inv_std);
    recorded_mode_ = mode;
    cached_ = true;
  }
  return y;
}

Tensor BatchNorm1d::backward_single(const Tensor& dy) {
  if (!cached_) throw StateError("batch-norm backward called before a recorded forward");
  if (dy.shape() != normalized_.shape()) throw ShapeError("batch-norm gradient shape mismatch");
  const std::size_t ch = gain_.value.size();
  const std::size_t rows = dy.size() / ch;
  std::vector<real> sum_dy(ch, 0), sum_dy_xhat(ch, 0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < ch; ++c) {
      const std::size_t i = r * ch + c;
      sum_dy[c] += dy.raw()[i];
      sum_dy_xhat[c] += dy.raw()[i] * normalized_.raw()[i];
    }
  for (std::size_t c = 0; c < ch; ++c) {
    gain_.grad.raw()[c] += sum_dy_xhat[c];
    shift_.grad.raw()[c] += sum_dy[c];
  }
  Tensor dx(dy.shape());
  const real* g = gain_.value.raw();
  if (recorded_mode_ == Mode::train) {
    const real n = static_cast<real>(rows);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < ch; ++c) {
        const std::size_t i = r * ch + c;
        dx.raw()[i] = g[c] * inv_std_[c] / n *
                      (n * dy.raw()[i] - sum_dy[c] - normalized_.raw()[i] * sum_dy_xhat[c]);
      }
  } else {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < ch; ++c) {
        const std::size_t i = r * ch + c;
        dx.raw()[i] = g[c] * inv_std_[c] * dy.raw()[i];
      }
  }
  return dx;
}

void BatchNorm1d::collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + "gain", &gain_});
  out.push_back({prefix + "shift", &shift_});
}

void BatchNorm1d::collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) {
  out.push_back({prefix + "running_mean", &running_mean_});
  out.push_back({prefix + "running_var", &running_var_});
}

Dropout::Dropout(real rate, std::uint64_t seed) : rate_(rate), rng_(seed) {
  if (!(rate_ >= 0) || rate_ >= 1) {
    throw ParameterError("dropout rate must lie in [0, 1), got " + std::to_string(rate_));
  }
}

std::string Dropout::summary() const { return "rate=" + std::to_string(rate_); }

Shape Dropout::configure_single(const Shape& input, Rng&) { return input; }

Tensor Dropout::forward_single(const Tensor& x, Mode mode, bool record) {
  if (mode == Mode::eval || rate_ == 0) {
    if (record) {
      identity_ = true;
      cached_ = true;
    }
    return x;
  }
  if (!(mask_frozen_ && has_mask_ && mask_.shape() == x.shape())) {
    mask_ = Tensor(x.shape());
    const real keep_scale = real{1} / (1 - rate_);
    for (real& m : mask_.data()) m = rng_.uniform() < rate_ ? real{0} : keep_scale;
    has_mask_ = true;
  }
  if (record) {
    identity_ = false;
    cached_ = true;
  }
  return mul(x, mask_);
}

Tensor Dropout::backward_single(const Tensor& grad_output) {
  if (!cached_) throw StateError("dropout backward called before a recorded forward");
  if (identity_) return grad_output;
  return mul(grad_output, mask_);
}

}  // namespace tsdl
