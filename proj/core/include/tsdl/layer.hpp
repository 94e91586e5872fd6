#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsdl/rng.hpp"
#include "tsdl/tensor.hpp"

namespace tsdl {

enum class Mode { train, eval };

/// Trainable tensor plus its accumulated gradient.
struct Parameter {
  Tensor value;
  Tensor grad;
  bool frozen = false;

  Parameter() = default;
  explicit Parameter(Tensor v) : value(std::move(v)), grad(value.shape()) {}
};

struct ParamRef {
  std::string name;
  Parameter* param;
};

struct BufferRef {
  std::string name;
  Tensor* buffer;
};

enum class LayerKind {
  conv1d,
  pool,
  dense,
  batch_norm,
  dropout,
  activation,
  lstm,
  gru,
  bidirectional,
  se_block,
  rta_block,
  spatiotemporal_attention,
  attention_pooling,
  flatten,
  reshape,
  add,
  concat,
  upsample1d,
  crop_pad,
  sequential,
};

std::string_view to_string(LayerKind kind);

/// A differentiable node. Shapes passed to configure() exclude the batch axis;
/// tensors passed to forward() include it as axis 0.
///
/// forward() with record=true retains whatever backward() needs; backward()
/// accumulates parameter gradients into Parameter::grad and returns one input
/// gradient per input.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;

  /// Structural family tag used for architecture contracts ("conv1d", "lstm",
  /// "gru", "bilstm", "bigru", "pooling", "batchnorm", "dropout", "se_block",
  /// "rta_block", "attention"); empty for plumbing layers.
  virtual std::string family() const { return {}; }

  /// Validates input shapes, allocates parameters and returns the output shape.
  virtual Shape configure(std::span<const Shape> inputs, Rng& rng) = 0;

  virtual Tensor forward(std::span<const Tensor* const> inputs, Mode mode, bool record) = 0;
  virtual std::vector<Tensor> backward(const Tensor& grad_output) = 0;

  virtual void collect_parameters(const std::string& prefix, std::vector<ParamRef>& out);
  virtual void collect_buffers(const std::string& prefix, std::vector<BufferRef>& out);

  /// Short hyperparameter summary, e.g. "filters=16 kernel=3 padding=same".
  virtual std::string summary() const { return {}; }

  std::vector<ParamRef> parameters();
  std::vector<BufferRef> buffers();
  /// Looks up a parameter by its (prefix-free) name; throws ParameterError.
  Parameter& parameter(std::string_view name);
  Tensor& buffer(std::string_view name);
  void zero_grad();
};

/// Layer with exactly one input.
class UnaryLayer : public Layer {
 public:
  Shape configure(std::span<const Shape> inputs, Rng& rng) final;
  Tensor forward(std::span<const Tensor* const> inputs, Mode mode, bool record) final;
  std::vector<Tensor> backward(const Tensor& grad_output) final;

  virtual Shape configure_single(const Shape& input, Rng& rng) = 0;
  virtual Tensor forward_single(const Tensor& input, Mode mode, bool record) = 0;
  virtual Tensor backward_single(const Tensor& grad_output) = 0;

  /// Convenience overloads for direct use.
  Shape configure(const Shape& input, Rng& rng) { return configure_single(input, rng); }
  Tensor operator()(const Tensor& input, Mode mode = Mode::eval, bool record = true) {
    return forward_single(input, mode, record);
  }
};

/// Chain of unary layers evaluated in order, parameters prefixed by the
/// member name.
class Sequential final : public UnaryLayer {
 public:
  Sequential() = default;

  Sequential& add(std::string name, std::unique_ptr<UnaryLayer> layer);

  template <class L, class... Args>
  L& emplace(std::string name, Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    add(std::move(name), std::move(layer));
    return ref;
  }

  LayerKind kind() const override { return LayerKind::sequential; }
  Shape configure_single(const Shape& input, Rng& rng) override;
  Tensor forward_single(const Tensor& input, Mode mode, bool record) override;
  Tensor backward_single(const Tensor& grad_output) override;
  void collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) override;
  void collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) override;

  std::size_t size() const { return members_.size(); }
  UnaryLayer& at(std::size_t i) { return *members_.at(i).second; }

 private:
  std::vector<std::pair<std::string, std::unique_ptr<UnaryLayer>>> members_;
};

namespace init {

/// Uniform in [-limit, limit], rounded to f32 so that freshly initialized
/// weights survive the f32 weights file exactly.
Tensor uniform(const Shape& shape, real limit, Rng& rng);

/// limit = sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(const Shape& shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace init

}  // namespace tsdl
