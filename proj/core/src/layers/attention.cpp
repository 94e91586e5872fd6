#include "tsdl/layers/attention.hpp"

#include <algorithm>
#include <cmath>

#include "tsdl/error.hpp"
#include "tsdl/layers/activation.hpp"
#include "tsdl/layers/shape_ops.hpp"

namespace tsdl {

namespace {

void require_rank3(const Tensor& x, const char* what) {
  if (x.rank() != 3) throw ShapeError(std::string(what) + " expects rank-3 input, got " + to_string(x.shape()));
}

void require_cache(bool cached, const char* what) {
  if (!cached) throw StateError(std::string(what) + " backward called before a recorded forward");
}

// y[b,t,c] = x[b,t,c] * s[b,c]
Tensor scale_channels(const Tensor& x, const Tensor& s) {
  const std::size_t batch = x.extent(0), time = x.extent(1), ch = x.extent(2);
  Tensor y(x.shape());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < time; ++t)
      for (std::size_t c = 0; c < ch; ++c) {
        const std::size_t i = (b * time + t) * ch + c;
        y.raw()[i] = x.raw()[i] * s.raw()[b * ch + c];
      }
  return y;
}

// y[b,t,c] = x[b,t,c] * a[b,t]
Tensor scale_steps(const Tensor& x, const Tensor& a) {
  const std::size_t rows = x.extent(0) * x.extent(1), ch = x.extent(2);
  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < ch; ++c) y.raw()[r * ch + c] = x.raw()[r * ch + c] * a.raw()[r];
  return y;
}

// out[b,c] = sum_t g[b,t,c] * x[b,t,c]
Tensor sum_over_time(const Tensor& g, const Tensor& x) {
  const std::size_t batch = g.extent(0), time = g.extent(1), ch = g.extent(2);
  Tensor out({batch, ch});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < time; ++t)
      for (std::size_t c = 0; c < ch; ++c) {
        const std::size_t i = (b * time + t) * ch + c;
        out.raw()[b * ch + c] += g.raw()[i] * x.raw()[i];
      }
  return out;
}

// out[b,t,0] = sum_c g[b,t,c] * x[b,t,c]
Tensor sum_over_channels(const Tensor& g, const Tensor& x) {
  const std::size_t rows = g.extent(0) * g.extent(1), ch = g.extent(2);
  Tensor out({g.extent(0), g.extent(1), 1});
  for (std::size_t r = 0; r < rows; ++r) {
    real acc = 0;
    for (std::size_t c = 0; c < ch; ++c) acc += g.raw()[r * ch + c] * x.raw()[r * ch + c];
    out.raw()[r] = acc;
  }
  return out;
}

}  // namespace

// ---- SeBlock --------------------------------------------------------------

SeBlock::SeBlock(std::size_t ratio) : ratio_(ratio) {
  if (ratio_ < 1) throw ParameterError("se_block reduction ratio must be >= 1");
}

Shape SeBlock::configure_single(const Shape& input, Rng& rng) {
  if (input.size() != 2) throw ShapeError("se_block expects [time, channels], got " + to_string(input));
  const std::size_t ch = input[1];
  const std::size_t reduced = std::max<std::size_t>(1, ch / ratio_);
  if (!squeeze_ || squeeze_->units() != reduced || excite_->units() != ch) {
    squeeze_ = std::make_unique<Dense>(reduced, Activation::relu());
    excite_ = std::make_unique<Dense>(ch, Activation::sigmoid());
  }
  gap_.configure_single(input, rng);
  squeeze_->configure_single({ch}, rng);
  excite_->configure_single({reduced}, rng);
  return input;
}

Tensor SeBlock::forward_single(const Tensor& x, Mode mode, bool record) {
  require_rank3(x, "se_block");
  if (!squeeze_) throw StateError("se_block used before configure");
  Tensor s = (*excite_)((*squeeze_)(gap_(x, mode, record), mode, record), mode, record);
  Tensor y = scale_channels(x, s);
  if (record) {
    input_ = x;
    gate_ = std::move(s);
    cached_ = true;
  }
  return y;
}

Tensor SeBlock::backward_single(const Tensor& dy) {
  require_cache(cached_, "se_block");
  Tensor ds = sum_over_time(dy, input_);
  Tensor dx = gap_.backward_single(squeeze_->backward_single(excite_->backward_single(ds)));
  add_into(dx, scale_channels(dy, gate_));
  return dx;
}

void SeBlock::collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) {
  if (!squeeze_) return;
  squeeze_->collect_parameters(prefix + "squeeze.", out);
  excite_->collect_parameters(prefix + "excite.", out);
}

// ---- RtaBlock -------------------------------------------------------------

RtaBlock::RtaBlock(RtaOptions opts) : opts_(opts) {
  if (opts_.filters < 1 || opts_.kernel < 1) throw ParameterError("rta_block filters and kernel must be >= 1");
  if (opts_.pool_window < 1) throw ParameterError("rta_block pool window must be >= 1");
  const Conv1dOptions conv{opts_.filters, opts_.kernel, 1, Padding::same, Activation::linear()};
  trunk_.emplace<Conv1d>("conv1", conv);
  trunk_.emplace<BatchNorm1d>("bn1");
  trunk_.emplace<ActivationLayer>("relu1", Activation::relu());
  trunk_.emplace<Conv1d>("conv2", conv);
  trunk_.emplace<BatchNorm1d>("bn2");
  trunk_.emplace<ActivationLayer>("relu2", Activation::relu());

  attention_.emplace<Pool1d>("pool", Pool1dOptions{PoolKind::max, opts_.pool_window, opts_.pool_window});
  attention_.emplace<Conv1d>("conv", conv);
  attention_.emplace<BatchNorm1d>("bn");
  attention_.emplace<Upsample1d>("upsample", opts_.pool_window);
}

std::string RtaBlock::summary() const {
  return "filters=" + std::to_string(opts_.filters) + " kernel=" + std::to_string(opts_.kernel) +
         " pool=" + std::to_string(opts_.pool_window);
}

Shape RtaBlock::configure_single(const Shape& input, Rng& rng) {
  if (input.size() != 2) throw ShapeError("rta_block expects [time, channels], got " + to_string(input));
  if (input[0] < opts_.pool_window) {
    throw ShapeError("rta_block needs at least " + std::to_string(opts_.pool_window) +
                     " time steps, got " + std::to_string(input[0]));
  }
  trunk_.configure_single(input, rng);
  attention_.configure_single(input, rng);
  if (input[1] != opts_.filters) {
    if (!shortcut_) shortcut_ = std::make_unique<Conv1d>(Conv1dOptions{opts_.filters, 1, 1, Padding::same});
    shortcut_->configure_single(input, rng);
  } else {
    shortcut_.reset();
  }
  return {input[0], opts_.filters};
}

Tensor RtaBlock::forward_single(const Tensor& x, Mode mode, bool record) {
  require_rank3(x, "rta_block");
  const std::size_t time = x.extent(1);
  Tensor trunk = trunk_(x, mode, record);
  Tensor pre = attention_(x, mode, record);
  const std::size_t up = pre.extent(1);
  if (up > time) pre = crop(pre, 1, 0, time);
  else if (up < time) pre = pad(pre, 1, 0, time - up, 0);
  activate(Activation::sigmoid(), pre.data(), pre.extent(2));
  Tensor y = shortcut_ ? (*shortcut_)(x, mode, record) : x;
  for (std::size_t i = 0; i < y.size(); ++i) y.raw()[i] += trunk.raw()[i] * (1 + pre.raw()[i]);
  if (record) {
    upsampled_length_ = up;
    trunk_out_ = std::move(trunk);
    gate_ = std::move(pre);
    cached_ = true;
  }
  return y;
}

Tensor RtaBlock::backward_single(const Tensor& dy) {
  require_cache(cached_, "rta_block");
  const std::size_t time = dy.extent(1);
  Tensor d_trunk(dy.shape()), d_pre(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) {
    const real a = gate_.raw()[i];
    d_trunk.raw()[i] = dy.raw()[i] * (1 + a);
    d_pre.raw()[i] = dy.raw()[i] * trunk_out_.raw()[i] * a * (1 - a);
  }
  if (upsampled_length_ > time) d_pre = pad(d_pre, 1, 0, upsampled_length_ - time, 0);
  else if (upsampled_length_ < time) d_pre = crop(d_pre, 1, 0, upsampled_length_);
  Tensor dx = shortcut_ ? shortcut_->backward_single(dy) : dy;
  add_into(dx, trunk_.backward_single(d_trunk));
  add_into(dx, attention_.backward_single(d_pre));
  return dx;
}

void RtaBlock::collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) {
  trunk_.collect_parameters(prefix + "trunk.", out);
  attention_.collect_parameters(prefix + "attention.", out);
  if (shortcut_) shortcut_->collect_parameters(prefix + "shortcut.", out);
}

void RtaBlock::collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) {
  trunk_.collect_buffers(prefix + "trunk.", out);
  attention_.collect_buffers(prefix + "attention.", out);
}

// ---- SpatioTemporalAttention ---------------------------------------------

SpatioTemporalAttention::SpatioTemporalAttention(std::size_t ratio, std::size_t kernel)
    : ratio_(ratio), kernel_(kernel) {
  if (ratio_ < 1 || kernel_ < 1) throw ParameterError("attention ratio and kernel must be >= 1");
  temporal_ = std::make_unique<Conv1d>(Conv1dOptions{1, kernel_, 1, Padding::same, Activation::sigmoid()});
}

std::string SpatioTemporalAttention::summary() const {
  return "ratio=" + std::to_string(ratio_) + " kernel=" + std::to_string(kernel_);
}

Shape SpatioTemporalAttention::configure_single(const Shape& input, Rng& rng) {
  if (input.size() != 2) {
    throw ShapeError("spatiotemporal_attention expects [time, channels], got " + to_string(input));
  }
  const std::size_t ch = input[1];
  const std::size_t reduced = std::max<std::size_t>(1, ch / ratio_);
  if (!squeeze_ || squeeze_->units() != reduced || excite_->units() != ch) {
    squeeze_ = std::make_unique<Dense>(reduced, Activation::relu());
    excite_ = std::make_unique<Dense>(ch, Activation::sigmoid());
  }
  gap_.configure_single(input, rng);
  squeeze_->configure_single({ch}, rng);
  excite_->configure_single({reduced}, rng);
  temporal_->configure_single({input[0], 1}, rng);
  return input;
}

Tensor SpatioTemporalAttention::forward_single(const Tensor& x, Mode mode, bool record) {
  require_rank3(x, "spatiotemporal_attention");
  if (!squeeze_) throw StateError("spatiotemporal_attention used before configure");
  Tensor s = (*excite_)((*squeeze_)(gap_(x, mode, record), mode, record), mode, record);
  Tensor u = scale_channels(x, s);
  const std::size_t rows = x.extent(0) * x.extent(1), ch = x.extent(2);
  Tensor m({x.extent(0), x.extent(1), 1});
  for (std::size_t r = 0; r < rows; ++r) {
    real acc = 0;
    for (std::size_t c = 0; c < ch; ++c) acc += u.raw()[r * ch + c];
    m.raw()[r] = acc / static_cast<real>(ch);
  }
  Tensor a = (*temporal_)(m, mode, record);
  Tensor y = scale_steps(u, a);
  if (record) {
    input_ = x;
    channel_gate_ = std::move(s);
    scaled_ = std::move(u);
    step_gate_ = std::move(a);
    cached_ = true;
  }
  return y;
}

Tensor SpatioTemporalAttention::backward_single(const Tensor& dy) {
  require_cache(cached_, "spatiotemporal_attention");
  const std::size_t rows = dy.extent(0) * dy.extent(1), ch = dy.extent(2);
  Tensor dm = temporal_->backward_single(sum_over_channels(dy, scaled_));
  Tensor du = scale_steps(dy, step_gate_);
  const real inv_ch = real{1} / static_cast<real>(ch);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < ch; ++c) du.raw()[r * ch + c] += dm.raw()[r] * inv_ch;
  Tensor ds = sum_over_time(du, input_);
  Tensor dx = gap_.backward_single(squeeze_->backward_single(excite_->backward_single(ds)));
  add_into(dx, scale_channels(du, channel_gate_));
  return dx;
}

void SpatioTemporalAttention::collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) {
  if (squeeze_) {
    squeeze_->collect_parameters(prefix + "squeeze.", out);
    excite_->collect_parameters(prefix + "excite.", out);
  }
  temporal_->collect_parameters(prefix + "temporal.", out);
}

// ---- AttentionPooling -----------------------------------------------------

AttentionPooling::AttentionPooling(std::size_t units)
    : units_(units), hidden_(units, Activation::tanh()), score_(1) {}

Shape AttentionPooling::configure_single(const Shape& input, Rng& rng) {
  if (input.size() != 2) throw ShapeError("attention_pooling expects [time, channels], got " + to_string(input));
  hidden_.configure_single({input[1]}, rng);
  score_.configure_single({units_}, rng);
  return {input[1]};
}

Tensor AttentionPooling::forward_single(const Tensor& x, Mode mode, bool record) {
  require_rank3(x, "attention_pooling");
  const std::size_t batch = x.extent(0), time = x.extent(1), ch = x.extent(2);
  Tensor alpha = score_(hidden_(x.reshape({batch * time, ch}), mode, record), mode, record);
  activate(Activation::softmax(), alpha.data(), time);
  Tensor y({batch, ch});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < time; ++t) {
      const real w = alpha.raw()[b * time + t];
      for (std::size_t c = 0; c < ch; ++c) y.raw()[b * ch + c] += w * x.raw()[(b * time + t) * ch + c];
    }
  if (record) {
    input_ = x;
    weights_ = std::move(alpha);
    cached_ = true;
  }
  return y;
}

Tensor AttentionPooling::backward_single(const Tensor& dy) {
  require_cache(cached_, "attention_pooling");
  const std::size_t batch = input_.extent(0), time = input_.extent(1), ch = input_.extent(2);
  Tensor de({batch * time, 1});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < time; ++t) {
      real acc = 0;
      for (std::size_t c = 0; c < ch; ++c) acc += dy.raw()[b * ch + c] * input_.raw()[(b * time + t) * ch + c];
      de.raw()[b * time + t] = acc;
    }
  activate_backward(Activation::softmax(), weights_.data(), de.data(), time);
  Tensor dx = hidden_.backward_single(score_.backward_single(de)).reshape(input_.shape());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < time; ++t) {
      const real w = weights_.raw()[b * time + t];
      for (std::size_t c = 0; c < ch; ++c) dx.raw()[(b * time + t) * ch + c] += w * dy.raw()[b * ch + c];
    }
  return dx;
}

void AttentionPooling::collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) {
  hidden_.collect_parameters(prefix + "hidden.", out);
  score_.collect_parameters(prefix + "score.", out);
}

}  // namespace tsdl
