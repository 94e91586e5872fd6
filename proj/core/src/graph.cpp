#include "tsdl/graph.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include "tsdl/error.hpp"

namespace tsdl {

// ---- GraphSpec ------------------------------------------------------------

GraphSpec& GraphSpec::input(std::string name, Shape shape) {
  for (std::size_t e : shape)
    if (e == 0) throw ShapeError("input '" + name + "' has a zero extent");
  last_ = name;
  inputs_.push_back({std::move(name), std::move(shape)});
  return *this;
}

GraphSpec& GraphSpec::add(std::string name, std::unique_ptr<Layer> layer, std::vector<std::string> inputs) {
  if (!layer) throw GraphError("node '" + name + "' has no layer");
  if (inputs.empty()) throw GraphError("node '" + name + "' has no inputs");
  last_ = name;
  nodes_.push_back({std::move(name), std::move(layer), std::move(inputs)});
  return *this;
}

GraphSpec& GraphSpec::output(std::string name) {
  output_ = std::move(name);
  return *this;
}

const std::string& GraphSpec::last() const {
  if (last_.empty()) throw GraphError("graph spec is empty");
  return last_;
}

// ---- build ----------------------------------------------------------------

Model build(GraphSpec spec, std::uint64_t seed) {
  if (spec.inputs().empty()) throw GraphError("graph needs at least one input");
  std::unordered_map<std::string, std::size_t> input_index, node_index;
  for (std::size_t i = 0; i < spec.inputs().size(); ++i) {
    if (!input_index.emplace(spec.inputs()[i].name, i).second) {
      throw GraphError("duplicate input name '" + spec.inputs()[i].name + "'");
    }
  }
  auto& decl = spec.nodes();
  for (std::size_t i = 0; i < decl.size(); ++i) {
    if (input_index.count(decl[i].name) || !node_index.emplace(decl[i].name, i).second) {
      throw GraphError("duplicate node name '" + decl[i].name + "'");
    }
  }

  // Kahn's algorithm; the ready set is ordered by declaration index.
  std::vector<std::size_t> pending(decl.size(), 0);
  std::vector<std::vector<std::size_t>> consumers(decl.size());
  for (std::size_t i = 0; i < decl.size(); ++i) {
    for (const std::string& ref : decl[i].inputs) {
      if (input_index.count(ref)) continue;
      auto it = node_index.find(ref);
      if (it == node_index.end()) {
        throw GraphError("node '" + decl[i].name + "' refers to undeclared '" + ref + "'");
      }
      ++pending[i];
      consumers[it->second].push_back(i);
    }
  }
  std::set<std::size_t> ready;
  for (std::size_t i = 0; i < decl.size(); ++i)
    if (pending[i] == 0) ready.insert(i);
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    const std::size_t i = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(i);
    for (std::size_t c : consumers[i])
      if (--pending[c] == 0) ready.insert(c);
  }
  if (order.size() != decl.size()) {
    for (std::size_t i = 0; i < decl.size(); ++i)
      if (pending[i] != 0) throw GraphError("graph has a cycle through node '" + decl[i].name + "'");
  }

  Model model;
  model.inputs_ = spec.inputs();
  std::unordered_map<std::string, std::size_t> slot_of;
  std::vector<Shape> slot_shapes;
  for (std::size_t i = 0; i < model.inputs_.size(); ++i) {
    slot_of[model.inputs_[i].name] = i;
    slot_shapes.push_back(model.inputs_[i].shape);
  }
  for (std::size_t i : order) {
    Model::Node node;
    node.name = decl[i].name;
    node.layer = std::move(decl[i].layer);
    node.input_names = decl[i].inputs;
    std::vector<Shape> in_shapes;
    for (const std::string& ref : node.input_names) {
      node.input_slots.push_back(slot_of.at(ref));
      in_shapes.push_back(slot_shapes[slot_of.at(ref)]);
    }
    Rng rng(derive_seed(seed, node.name));
    try {
      node.output_shape = node.layer->configure(in_shapes, rng);
    } catch (const ShapeError& e) {
      throw ShapeError("node '" + node.name + "': " + e.what());
    } catch (const GraphError& e) {
      throw GraphError("node '" + node.name + "': " + e.what());
    }
    slot_of[node.name] = slot_shapes.size();
    slot_shapes.push_back(node.output_shape);
    model.nodes_.push_back(std::move(node));
  }

  const std::string out = spec.output_name().empty()
                              ? (decl.empty() ? model.inputs_.back().name : model.nodes_.back().name)
                              : spec.output_name();
  auto it = slot_of.find(out);
  if (it == slot_of.end()) throw GraphError("output refers to undeclared '" + out + "'");
  model.output_slot_ = it->second;
  return model;
}

// ---- Model ----------------------------------------------------------------

Model::Model() = default;
Model::Model(Model&&) noexcept = default;
Model& Model::operator=(Model&&) noexcept = default;
Model::~Model() = default;

Tensor Model::forward(const Tensor& input) { return forward(std::span<const Tensor>(&input, 1)); }

Tensor Model::forward(std::span<const Tensor> inputs) {
  if (inputs.size() != inputs_.size()) {
    throw ShapeError("model expects " + std::to_string(inputs_.size()) + " inputs, got " +
                     std::to_string(inputs.size()));
  }
  std::vector<Tensor> slots;
  slots.reserve(inputs_.size() + nodes_.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Shape& got = inputs[i].shape();
    const Shape& want = inputs_[i].shape;
    if (got.size() != want.size() + 1 || !std::equal(want.begin(), want.end(), got.begin() + 1)) {
      throw ShapeError("input '" + inputs_[i].name + "' expects [batch, " + to_string(want).substr(1) +
                       " but got " + to_string(got));
    }
    slots.push_back(inputs[i]);
  }
  const bool record = mode_ == Mode::train;
  std::vector<const Tensor*> args;
  for (Node& node : nodes_) {
    args.clear();
    for (std::size_t s : node.input_slots) args.push_back(&slots[s]);
    const Mode mode = node.frozen ? Mode::eval : mode_;
    try {
      slots.push_back(node.layer->forward(args, mode, record));
    } catch (const ShapeError& e) {
      throw ShapeError("node '" + node.name + "': " + e.what());
    }
  }
  recorded_ = record;
  return slots[output_slot_];
}

std::vector<Tensor> Model::backward(const Tensor& grad_output) {
  if (!recorded_) throw StateError("backward requires a preceding train-mode forward");
  recorded_ = false;
  const std::size_t n_in = inputs_.size();
  std::vector<Tensor> grads(n_in + nodes_.size());
  std::vector<bool> has(grads.size(), false);
  grads[output_slot_] = grad_output;
  has[output_slot_] = true;
  for (std::size_t k = nodes_.size(); k-- > 0;) {
    const std::size_t slot = n_in + k;
    if (!has[slot]) continue;
    Node& node = nodes_[k];
    if (grads[slot].shape().size() != node.output_shape.size() + 1) {
      throw ShapeError("node '" + node.name + "' received a gradient of shape " + to_string(grads[slot].shape()));
    }
    std::vector<Tensor> in_grads = node.layer->backward(grads[slot]);
    for (std::size_t j = 0; j < node.input_slots.size(); ++j) {
      const std::size_t s = node.input_slots[j];
      if (!has[s]) {
        grads[s] = std::move(in_grads[j]);
        has[s] = true;
      } else {
        add_into(grads[s], in_grads[j]);
      }
    }
  }
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < n_in; ++i) {
    if (has[i]) {
      out.push_back(std::move(grads[i]));
    } else {
      Shape s{grad_output.extent(0)};
      s.insert(s.end(), inputs_[i].shape.begin(), inputs_[i].shape.end());
      out.emplace_back(s);
    }
  }
  return out;
}

std::vector<ParamRef> Model::parameters() {
  std::vector<ParamRef> out;
  for (Node& node : nodes_) node.layer->collect_parameters(node.name + ".", out);
  return out;
}

std::vector<BufferRef> Model::buffers() {
  std::vector<BufferRef> out;
  for (Node& node : nodes_) node.layer->collect_buffers(node.name + ".", out);
  return out;
}

Parameter& Model::parameter(const std::string& name) {
  for (ParamRef& ref : parameters())
    if (ref.name == name) return *ref.param;
  throw ParameterError("model has no parameter '" + name + "'");
}

std::map<std::string, Tensor> Model::gradients() {
  std::map<std::string, Tensor> out;
  for (ParamRef& ref : parameters()) out.emplace(ref.name, ref.param->grad);
  return out;
}

void Model::zero_grad() {
  for (ParamRef& ref : parameters()) ref.param->grad.fill(0);
}

std::size_t Model::parameter_count() {
  std::size_t n = 0;
  for (ParamRef& ref : parameters()) n += ref.param->value.size();
  return n;
}

std::size_t Model::node_index(const std::string& name) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].name == name) return i;
  throw GraphError("model has no node '" + name + "'");
}

void Model::freeze(const std::string& name, bool frozen) {
  Node& node = nodes_[node_index(name)];
  node.frozen = frozen;
  std::vector<ParamRef> refs;
  node.layer->collect_parameters("", refs);
  for (ParamRef& ref : refs) ref.param->frozen = frozen;
}

const Shape& Model::output_shape() const {
  const std::size_t n_in = inputs_.size();
  return output_slot_ < n_in ? inputs_[output_slot_].shape : nodes_[output_slot_ - n_in].output_shape;
}

std::vector<NodeInfo> Model::node_info() {
  std::vector<NodeInfo> out;
  for (Node& node : nodes_) {
    NodeInfo info;
    info.name = node.name;
    info.kind = std::string(to_string(node.layer->kind()));
    info.family = node.layer->family();
    info.summary = node.layer->summary();
    info.inputs = node.input_names;
    info.output_shape = node.output_shape;
    for (ParamRef& ref : node.layer->parameters()) info.parameter_count += ref.param->value.size();
    info.frozen = node.frozen;
    out.push_back(std::move(info));
  }
  return out;
}

std::map<std::string, std::size_t> Model::family_counts() const {
  std::map<std::string, std::size_t> out;
  for (const Node& node : nodes_) {
    const std::string f = node.layer->family();
    if (!f.empty()) ++out[f];
  }
  return out;
}

bool Model::has_node(const std::string& name) const {
  return std::any_of(nodes_.begin(), nodes_.end(), [&](const Node& n) { return n.name == name; });
}

Layer& Model::layer(const std::string& name) { return *nodes_[node_index(name)].layer; }

}  // namespace tsdl
