#include "tsdl/layers/conv.hpp"

#include <algorithm>

#include "tsdl/error.hpp"

namespace tsdl {

std::string to_string(Padding p) {
  switch (p) {
    case Padding::valid: return "valid";
    case Padding::same: return "same";
    case Padding::full: return "full";
  }
  return "?";
}

Padding parse_padding(const std::string& name) {
  if (name == "valid") return Padding::valid;
  if (name == "same") return Padding::same;
  if (name == "full") return Padding::full;
  throw ParameterError("unknown padding mode '" + name + "'");
}

Conv1d::Conv1d(Conv1dOptions opts) : opts_(opts) {
  if (opts_.kernel < 1) throw ParameterError("conv1d kernel size must be >= 1");
  if (opts_.stride < 1) throw ParameterError("conv1d stride must be >= 1");
  if (opts_.filters < 1) throw ParameterError("conv1d needs at least one filter");
}

std::string Conv1d::summary() const {
  return "filters=" + std::to_string(opts_.filters) + " kernel=" + std::to_string(opts_.kernel) +
         " stride=" + std::to_string(opts_.stride) + " padding=" + to_string(opts_.padding) +
         " activation=" + to_string(opts_.activation);
}

std::size_t Conv1d::output_length(std::size_t time, const Conv1dOptions& o) {
  switch (o.padding) {
    case Padding::valid:
      if (time < o.kernel) {
        throw ShapeError("valid conv1d needs time >= kernel (" + std::to_string(time) + " < " +
                         std::to_string(o.kernel) + ")");
      }
      return (time - o.kernel) / o.stride + 1;
    case Padding::same:
      return (time + o.stride - 1) / o.stride;
    case Padding::full:
      return (time + o.kernel - 2) / o.stride + 1;
  }
  return 0;
}

std::size_t Conv1d::pad_before(std::size_t time) const {
  switch (opts_.padding) {
    case Padding::valid:
      return 0;
    case Padding::same: {
      const std::size_t out = output_length(time, opts_);
      const std::size_t needed = (out - 1) * opts_.stride + opts_.kernel;
      const std::size_t total = needed > time ? needed - time : 0;
      return total / 2;
    }
    case Padding::full:
      return opts_.kernel - 1;
  }
  return 0;
}

Shape Conv1d::configure_single(const Shape& input, Rng& rng) {
  if (input.size() != 2) {
    throw ShapeError("conv1d expects [time, channels] input, got " + to_string(input));
  }
  const std::size_t t_out = output_length(input[0], opts_);
  const std::size_t ch = input[1];
  const Shape wshape{opts_.kernel, ch, opts_.filters};
  if (weight_.value.shape() != wshape) {
    weight_ = Parameter(init::glorot_uniform(wshape, opts_.kernel * ch,
                                             opts_.kernel * opts_.filters, rng));
    bias_ = Parameter(Tensor({opts_.filters}));
  }
  return {t_out, opts_.filters};
}

Tensor Conv1d::forward_single(const Tensor& x, Mode, bool record) {
  if (x.rank() != 3 || x.extent(2) != weight_.value.extent(1)) {
    throw ShapeError("conv1d input " + to_string(x.shape()) + " does not match weight " +
                     to_string(weight_.value.shape()));
  }
  const std::size_t batch = x.extent(0), time = x.extent(1), ch = x.extent(2);
  const std::size_t t_out = output_length(time, opts_);
  const std::size_t nf = opts_.filters, k = opts_.kernel, s = opts_.stride;
  const std::size_t pb = pad_before(time);
  Tensor y({batch, t_out, nf});
  const real* w = weight_.value.raw();
  const real* bias = bias_.value.raw();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < t_out; ++t) {
      real* yrow = y.raw() + (b * t_out + t) * nf;
      std::copy_n(bias, nf, yrow);
      for (std::size_t kk = 0; kk < k; ++kk) {
        const std::size_t pos = t * s + kk;
        if (pos < pb || pos - pb >= time) continue;
        const real* xrow = x.raw() + (b * time + (pos - pb)) * ch;
        for (std::size_t c = 0; c < ch; ++c) {
          const real xv = xrow[c];
          const real* wrow = w + (kk * ch + c) * nf;
          for (std::size_t f = 0; f < nf; ++f) yrow[f] += xv * wrow[f];
        }
      }
    }
  }
  activate(opts_.activation, y.data(), nf);
  if (record) {
    input_ = x;
    output_ = y;
    cached_ = true;
  }
  return y;
}

Tensor Conv1d::backward_single(const Tensor& grad_output) {
  if (!cached_) throw StateError("conv1d backward called before a recorded forward");
  if (grad_output.shape() != output_.shape()) {
    throw ShapeError("conv1d gradient shape " + to_string(grad_output.shape()) +
                     " does not match output " + to_string(output_.shape()));
  }
  Tensor dz = grad_output;
  const std::size_t nf = opts_.filters, k = opts_.kernel, s = opts_.stride;
  activate_backward(opts_.activation, output_.data(), dz.data(), nf);
  const std::size_t batch = input_.extent(0), time = input_.extent(1), ch = input_.extent(2);
  const std::size_t t_out = output_.extent(1);
  const std::size_t pb = pad_before(time);
  Tensor dx(input_.shape());
  const real* w = weight_.value.raw();
  real* dw = weight_.grad.raw();
  real* db = bias_.grad.raw();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < t_out; ++t) {
      const real* drow = dz.raw() + (b * t_out + t) * nf;
      for (std::size_t f = 0; f < nf; ++f) db[f] += drow[f];
      for (std::size_t kk = 0; kk < k; ++kk) {
        const std::size_t pos = t * s + kk;
        if (pos < pb || pos - pb >= time) continue;
        const std::size_t src = (b * time + (pos - pb)) * ch;
        const real* xrow = input_.raw() + src;
        real* dxrow = dx.raw() + src;
        for (std::size_t c = 0; c < ch; ++c) {
          const real xv = xrow[c];
          const real* wrow = w + (kk * ch + c) * nf;
          real* dwrow = dw + (kk * ch + c) * nf;
          real acc = 0;
          for (std::size_t f = 0; f < nf; ++f) {
            dwrow[f] += xv * drow[f];
            acc += wrow[f] * drow[f];
          }
          dxrow[c] += acc;
        }
      }
    }
  }
  return dx;
}

void Conv1d::collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + "weight", &weight_});
  out.push_back({prefix + "bias", &bias_});
}

Pool1d::Pool1d(Pool1dOptions opts) : opts_(opts) {
  if (opts_.kind != PoolKind::global_avg && (opts_.window < 1 || opts_.stride < 1)) {
    throw ParameterError("pool1d window and stride must be >= 1");
  }
}

std::string Pool1d::summary() const {
  switch (opts_.kind) {
    case PoolKind::global_avg: return "global_avg";
    case PoolKind::max:
      return "max window=" + std::to_string(opts_.window) + " stride=" + std::to_string(opts_.stride);
    case PoolKind::avg:
      return "avg window=" + std::to_string(opts_.window) + " stride=" + std::to_string(opts_.stride);
  }
  return {};
}

Shape Pool1d::configure_single(const Shape& input, Rng&) {
  if (input.size() != 2) {
    throw ShapeError("pool1d expects [time, channels] input, got " + to_string(input));
  }
  if (opts_.kind == PoolKind::global_avg) return {input[1]};
  if (opts_.window > input[0]) {
    throw ShapeError("pool1d window " + std::to_string(opts_.window) + " exceeds time extent " +
                     std::to_string(input[0]));
  }
  return {(input[0] - opts_.window) / opts_.stride + 1, input[1]};
}

Tensor Pool1d::forward_single(const Tensor& x, Mode, bool record) {
  if (x.rank() != 3) throw ShapeError("pool1d expects rank-3 input, got " + to_string(x.shape()));
  const std::size_t batch = x.extent(0), time = x.extent(1), ch = x.extent(2);
  if (record) {
    input_shape_ = x.shape();
    cached_ = true;
  }
  if (opts_.kind == PoolKind::global_avg) {
    Tensor y({batch, ch});
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t t = 0; t < time; ++t)
        for (std::size_t c = 0; c < ch; ++c) y.raw()[b * ch + c] += x.raw()[(b * time + t) * ch + c];
    for (real& v : y.data()) v /= static_cast<real>(time);
    return y;
  }
  if (opts_.window > time) {
    throw ShapeError("pool1d window " + std::to_string(opts_.window) + " exceeds time extent " +
                     std::to_string(time));
  }
  const std::size_t w = opts_.window, s = opts_.stride;
  const std::size_t t_out = (time - w) / s + 1;
  Tensor y({batch, t_out, ch});
  if (opts_.kind == PoolKind::max && record) argmax_.assign(y.size(), 0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < t_out; ++t) {
      for (std::size_t c = 0; c < ch; ++c) {
        const std::size_t out_idx = (b * t_out + t) * ch + c;
        if (opts_.kind == PoolKind::max) {
          std::size_t best = (b * time + t * s) * ch + c;
          for (std::size_t j = 1; j < w; ++j) {
            const std::size_t idx = (b * time + t * s + j) * ch + c;
            if (x.raw()[idx] > x.raw()[best]) best = idx;
          }
          y.raw()[out_idx] = x.raw()[best];
          if (record) argmax_[out_idx] = best;
        } else {
          real acc = 0;
          for (std::size_t j = 0; j < w; ++j) acc += x.raw()[(b * time + t * s + j) * ch + c];
          y.raw()[out_idx] = acc / static_cast<real>(w);
        }
      }
    }
  }
  return y;
}

Tensor Pool1d::backward_single(const Tensor& g) {
  if (!cached_) throw StateError("pool1d backward called before a recorded forward");
  Tensor dx(input_shape_);
  const std::size_t batch = input_shape_[0], time = input_shape_[1], ch = input_shape_[2];
  if (opts_.kind == PoolKind::global_avg) {
    const real inv = real{1} / static_cast<real>(time);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t t = 0; t < time; ++t)
        for (std::size_t c = 0; c < ch; ++c)
          dx.raw()[(b * time + t) * ch + c] = g.raw()[b * ch + c] * inv;
    return dx;
  }
  if (opts_.kind == PoolKind::max) {
    for (std::size_t i = 0; i < g.size(); ++i) dx.raw()[argmax_[i]] += g.raw()[i];
    return dx;
  }
  const std::size_t w = opts_.window, s = opts_.stride;
  const std::size_t t_out = g.extent(1);
  const real inv = real{1} / static_cast<real>(w);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < t_out; ++t)
      for (std::size_t c = 0; c < ch; ++c) {
        const real gv = g.raw()[(b * t_out + t) * ch + c] * inv;
        for (std::size_t j = 0; j < w; ++j) dx.raw()[(b * time + t * s + j) * ch + c] += gv;
      }
  return dx;
}

}  // namespace tsdl
