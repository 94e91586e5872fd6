#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "tsdl/layer.hpp"

namespace tsdl {

/// Declarative node list: named model inputs, layer nodes referring to inputs
/// or other nodes by name, and one output reference. Nodes may be declared in
/// any order; build() sorts them.
class GraphSpec {
 public:
  struct Input {
    std::string name;
    Shape shape;  // per-sample, e.g. [time, channels]
  };
  struct Node {
    std::string name;
    std::unique_ptr<Layer> layer;
    std::vector<std::string> inputs;
  };

  GraphSpec& input(std::string name, Shape shape);
  GraphSpec& add(std::string name, std::unique_ptr<Layer> layer, std::vector<std::string> inputs);

  /// Constructs the layer in place and wires it to `inputs`.
  template <class L, class... Args>
  GraphSpec& node(std::string name, std::vector<std::string> inputs, Args&&... args) {
    return add(std::move(name), std::make_unique<L>(std::forward<Args>(args)...), std::move(inputs));
  }

  /// Appends a unary layer fed by the most recently declared node or input.
  template <class L, class... Args>
  GraphSpec& then(std::string name, Args&&... args) {
    return node<L>(std::move(name), {last()}, std::forward<Args>(args)...);
  }

  GraphSpec& output(std::string name);

  /// Name of the most recently declared node (or input if none yet).
  const std::string& last() const;
  const std::string& output_name() const { return output_; }
  const std::vector<Input>& inputs() const { return inputs_; }
  std::vector<Node>& nodes() { return nodes_; }

 private:
  std::vector<Input> inputs_;
  std::vector<Node> nodes_;
  std::string output_;
  std::string last_;
};

struct NodeInfo {
  std::string name;
  std::string kind;
  std::string family;
  std::string summary;
  std::vector<std::string> inputs;
  Shape output_shape;
  std::size_t parameter_count = 0;
  bool frozen = false;
};

/// A built, shape-checked DAG of layers.
///
/// Parameters and buffers are exposed as "<node>.<name>". forward() records
/// what backward() needs only in train mode; backward() accumulates into each
/// Parameter::grad, summing gradients at fan-out points in declaration order.
class Model {
 public:
  Model(Model&&) noexcept;
  Model& operator=(Model&&) noexcept;
  ~Model();

  Tensor forward(const Tensor& input);
  /// Inputs in declared order.
  Tensor forward(std::span<const Tensor> inputs);

  /// Back-propagates dL/d(output); returns dL/d(input) per declared input.
  std::vector<Tensor> backward(const Tensor& grad_output);

  void set_mode(Mode mode) { mode_ = mode; }
  Mode mode() const { return mode_; }

  std::vector<ParamRef> parameters();
  std::vector<BufferRef> buffers();
  Parameter& parameter(const std::string& name);
  /// Copies of the current accumulated gradients keyed by parameter name.
  std::map<std::string, Tensor> gradients();
  void zero_grad();
  std::size_t parameter_count();

  /// Frozen nodes always run in eval mode and their parameters are skipped by
  /// the optimizer; gradients still flow through them to earlier nodes.
  void freeze(const std::string& node, bool frozen = true);

  const std::vector<GraphSpec::Input>& inputs() const { return inputs_; }
  const Shape& output_shape() const;
  std::vector<NodeInfo> node_info();
  /// Node count per non-empty layer family tag.
  std::map<std::string, std::size_t> family_counts() const;
  bool has_node(const std::string& name) const;
  Layer& layer(const std::string& name);

 private:
  friend Model build(GraphSpec spec, std::uint64_t seed);
  Model();

  struct Node {
    std::string name;
    std::unique_ptr<Layer> layer;
    std::vector<std::string> input_names;
    std::vector<std::size_t> input_slots;
    Shape output_shape;
    bool frozen = false;
  };

  std::size_t node_index(const std::string& name) const;

  std::vector<GraphSpec::Input> inputs_;
  std::vector<Node> nodes_;  // topological order
  std::size_t output_slot_ = 0;
  Mode mode_ = Mode::eval;
  bool recorded_ = false;
};

/// Resolves references, sorts topologically (ties broken by declaration
/// order), infers every node's output shape and initializes parameters from
/// per-node streams derived from `seed` and the node name.
Model build(GraphSpec spec, std::uint64_t seed = 0);

}  // namespace tsdl
