#include "tsdl/layers/shape_ops.hpp"

#include <algorithm>

#include "tsdl/error.hpp"

namespace tsdl {

namespace {

Shape with_batch(std::size_t batch, const Shape& rest) {
  Shape s{batch};
  s.insert(s.end(), rest.begin(), rest.end());
  return s;
}

void require_cache(bool cached, const char* what) {
  if (!cached) throw StateError(std::string(what) + " backward called before a recorded forward");
}

}  // namespace

// ---- Flatten --------------------------------------------------------------

Shape Flatten::configure_single(const Shape& input, Rng&) {
  if (input.empty()) throw ShapeError("flatten needs per-sample rank >= 1");
  return {element_count(input)};
}

Tensor Flatten::forward_single(const Tensor& x, Mode, bool record) {
  if (x.rank() < 2) throw ShapeError("flatten expects a batch axis plus data, got " + to_string(x.shape()));
  if (record) {
    input_shape_ = x.shape();
    cached_ = true;
  }
  return x.reshape({x.extent(0), x.size() / x.extent(0)});
}

Tensor Flatten::backward_single(const Tensor& g) {
  require_cache(cached_, "flatten");
  return g.reshape(input_shape_);
}

// ---- Reshape --------------------------------------------------------------

Reshape::Reshape(Shape target) : target_(std::move(target)) {
  for (const std::size_t e : target_)
    if (e == 0) throw ParameterError("reshape target extents must be positive");
}

Shape Reshape::configure_single(const Shape& input, Rng&) {
  if (element_count(input) != element_count(target_)) {
    throw ShapeError("cannot reshape " + to_string(input) + " to " + to_string(target_));
  }
  return target_;
}

Tensor Reshape::forward_single(const Tensor& x, Mode, bool record) {
  if (record) {
    input_shape_ = x.shape();
    cached_ = true;
  }
  return x.reshape(with_batch(x.extent(0), target_));
}

Tensor Reshape::backward_single(const Tensor& g) {
  require_cache(cached_, "reshape");
  return g.reshape(input_shape_);
}

// ---- Add ------------------------------------------------------------------

Shape Add::configure(std::span<const Shape> inputs, Rng&) {
  if (inputs.size() != 2) throw GraphError("add takes exactly two inputs");
  if (inputs[0] != inputs[1]) {
    throw ShapeError("add_skip shapes differ: " + to_string(inputs[0]) + " vs " + to_string(inputs[1]));
  }
  return inputs[0];
}

Tensor Add::forward(std::span<const Tensor* const> inputs, Mode, bool record) {
  if (inputs.size() != 2) throw GraphError("add takes exactly two inputs");
  if (record) cached_ = true;
  return add(*inputs[0], *inputs[1]);
}

std::vector<Tensor> Add::backward(const Tensor& g) {
  require_cache(cached_, "add");
  return {g, g};
}

// ---- Concat ---------------------------------------------------------------

Shape Concat::configure(std::span<const Shape> inputs, Rng&) {
  if (inputs.empty()) throw GraphError("concat needs at least one input");
  Shape out = inputs[0];
  if (out.empty()) throw ShapeError("concat inputs need a channel axis");
  out.back() = 0;
  for (const Shape& s : inputs) {
    if (s.size() != inputs[0].size() ||
        !std::equal(s.begin(), s.end() - 1, inputs[0].begin())) {
      throw ShapeError("concat inputs disagree off the channel axis: " + to_string(inputs[0]) +
                       " vs " + to_string(s));
    }
    out.back() += s.back();
  }
  return out;
}

Tensor Concat::forward(std::span<const Tensor* const> inputs, Mode, bool record) {
  std::vector<Tensor> parts;
  parts.reserve(inputs.size());
  for (const Tensor* t : inputs) parts.push_back(*t);
  if (record) {
    widths_.clear();
    for (const Tensor* t : inputs) widths_.push_back(t->shape().back());
    cached_ = true;
  }
  return concat(std::span<const Tensor>(parts), parts.front().rank() - 1);
}

std::vector<Tensor> Concat::backward(const Tensor& g) {
  require_cache(cached_, "concat");
  std::vector<Tensor> grads;
  std::size_t start = 0;
  for (const std::size_t w : widths_) {
    grads.push_back(crop(g, g.rank() - 1, start, w));
    start += w;
  }
  return grads;
}

// ---- Upsample1d -----------------------------------------------------------

Upsample1d::Upsample1d(std::size_t factor) : factor_(factor) {
  if (factor_ < 1) throw ParameterError("upsample factor must be >= 1");
}

Shape Upsample1d::configure_single(const Shape& input, Rng&) {
  if (input.size() != 2) throw ShapeError("upsample1d expects [time, channels], got " + to_string(input));
  return {input[0] * factor_, input[1]};
}

Tensor Upsample1d::forward_single(const Tensor& x, Mode, bool record) {
  if (x.rank() != 3) throw ShapeError("upsample1d expects rank-3 input");
  const std::size_t batch = x.extent(0), time = x.extent(1), ch = x.extent(2);
  Tensor y({batch, time * factor_, ch});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < time; ++t)
      for (std::size_t r = 0; r < factor_; ++r)
        std::copy_n(x.raw() + (b * time + t) * ch, ch, y.raw() + (b * time * factor_ + t * factor_ + r) * ch);
  if (record) cached_ = true;
  return y;
}

Tensor Upsample1d::backward_single(const Tensor& g) {
  require_cache(cached_, "upsample1d");
  const std::size_t batch = g.extent(0), time = g.extent(1) / factor_, ch = g.extent(2);
  Tensor dx({batch, time, ch});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < time; ++t)
      for (std::size_t r = 0; r < factor_; ++r)
        for (std::size_t c = 0; c < ch; ++c)
          dx.raw()[(b * time + t) * ch + c] += g.raw()[(b * time * factor_ + t * factor_ + r) * ch + c];
  return dx;
}

// ---- CropPad --------------------------------------------------------------

CropPad::CropPad(std::size_t length, real value) : length_(length), value_(value) {
  if (length_ < 1) throw ParameterError("crop_pad length must be >= 1");
}

Shape CropPad::configure_single(const Shape& input, Rng&) {
  if (input.size() != 2) throw ShapeError("crop_pad expects [time, channels], got " + to_string(input));
  return {length_, input[1]};
}

Tensor CropPad::forward_single(const Tensor& x, Mode, bool record) {
  if (x.rank() != 3) throw ShapeError("crop_pad expects rank-3 input");
  const std::size_t time = x.extent(1);
  if (record) {
    input_length_ = time;
    cached_ = true;
  }
  if (time == length_) return x;
  if (time > length_) return crop(x, 1, 0, length_);
  return pad(x, 1, 0, length_ - time, value_);
}

Tensor CropPad::backward_single(const Tensor& g) {
  require_cache(cached_, "crop_pad");
  if (input_length_ == length_) return g;
  if (input_length_ < length_) return crop(g, 1, 0, input_length_);
  return pad(g, 1, 0, input_length_ - length_, 0);
}

}  // namespace tsdl
