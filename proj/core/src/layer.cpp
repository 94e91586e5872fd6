#include "tsdl/layer.hpp"

#include <cmath>

#include "tsdl/error.hpp"

namespace tsdl {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv1d: return "conv1d";
    case LayerKind::pool: return "pool1d";
    case LayerKind::dense: return "dense";
    case LayerKind::batch_norm: return "batch_norm1d";
    case LayerKind::dropout: return "dropout";
    case LayerKind::activation: return "activation";
    case LayerKind::lstm: return "lstm";
    case LayerKind::gru: return "gru";
    case LayerKind::bidirectional: return "bidirectional";
    case LayerKind::se_block: return "se_block";
    case LayerKind::rta_block: return "rta_block";
    case LayerKind::spatiotemporal_attention: return "spatiotemporal_attention";
    case LayerKind::attention_pooling: return "attention_pooling";
    case LayerKind::flatten: return "flatten";
    case LayerKind::reshape: return "reshape";
    case LayerKind::add: return "add";
    case LayerKind::concat: return "concat";
    case LayerKind::upsample1d: return "upsample1d";
    case LayerKind::crop_pad: return "crop_pad";
    case LayerKind::sequential: return "sequential";
  }
  return "?";
}

void Layer::collect_parameters(const std::string&, std::vector<ParamRef>&) {}
void Layer::collect_buffers(const std::string&, std::vector<BufferRef>&) {}

std::vector<ParamRef> Layer::parameters() {
  std::vector<ParamRef> out;
  collect_parameters("", out);
  return out;
}

std::vector<BufferRef> Layer::buffers() {
  std::vector<BufferRef> out;
  collect_buffers("", out);
  return out;
}

Parameter& Layer::parameter(std::string_view name) {
  for (auto& ref : parameters())
    if (ref.name == name) return *ref.param;
  throw ParameterError("layer has no parameter '" + std::string(name) + "'");
}

Tensor& Layer::buffer(std::string_view name) {
  for (auto& ref : buffers())
    if (ref.name == name) return *ref.buffer;
  throw ParameterError("layer has no buffer '" + std::string(name) + "'");
}

void Layer::zero_grad() {
  for (auto& ref : parameters()) ref.param->grad.fill(0);
}

Shape UnaryLayer::configure(std::span<const Shape> inputs, Rng& rng) {
  if (inputs.size() != 1) {
    throw GraphError(std::string(to_string(kind())) + " takes exactly one input, got " +
                     std::to_string(inputs.size()));
  }
  return configure_single(inputs[0], rng);
}

Tensor UnaryLayer::forward(std::span<const Tensor* const> inputs, Mode mode, bool record) {
  if (inputs.size() != 1) throw GraphError("unary layer called with multiple inputs");
  return forward_single(*inputs[0], mode, record);
}

std::vector<Tensor> UnaryLayer::backward(const Tensor& grad_output) {
  std::vector<Tensor> grads;
  grads.push_back(backward_single(grad_output));
  return grads;
}

Sequential& Sequential::add(std::string name, std::unique_ptr<UnaryLayer> layer) {
  members_.emplace_back(std::move(name), std::move(layer));
  return *this;
}

Shape Sequential::configure_single(const Shape& input, Rng& rng) {
  Shape shape = input;
  for (auto& [name, layer] : members_) {
    try {
      shape = layer->configure_single(shape, rng);
    } catch (const ShapeError& e) {
      throw ShapeError(name + ": " + e.what());
    }
  }
  return shape;
}

Tensor Sequential::forward_single(const Tensor& input, Mode mode, bool record) {
  Tensor x = input;
  for (auto& member : members_) x = member.second->forward_single(x, mode, record);
  return x;
}

Tensor Sequential::backward_single(const Tensor& grad_output) {
  Tensor g = grad_output;
  for (auto it = members_.rbegin(); it != members_.rend(); ++it)
    g = it->second->backward_single(g);
  return g;
}

void Sequential::collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) {
  for (auto& [name, layer] : members_) layer->collect_parameters(prefix + name + ".", out);
}

void Sequential::collect_buffers(const std::string& prefix, std::vector<BufferRef>& out) {
  for (auto& [name, layer] : members_) layer->collect_buffers(prefix + name + ".", out);
}

namespace init {

Tensor uniform(const Shape& shape, real limit, Rng& rng) {
  Tensor t(shape);
  for (real& v : t.data())
    v = static_cast<real>(static_cast<float>(rng.uniform(-limit, limit)));
  return t;
}

Tensor glorot_uniform(const Shape& shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const real limit = std::sqrt(real(6) / static_cast<real>(fan_in + fan_out));
  return uniform(shape, limit, rng);
}

}  // namespace init

}  // namespace tsdl
