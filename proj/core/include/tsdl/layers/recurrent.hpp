#pragma once

#include <memory>

#include "tsdl/layer.hpp"

namespace tsdl {

struct RecurrentOptions {
  std::size_t units = 64;
  bool return_sequences = false;
};

/// Common surface of the recurrent layers: [batch, time, ch] in,
/// [batch, time, units] or [batch, units] out, zero initial state.
class RecurrentLayer : public UnaryLayer {
 public:
  explicit RecurrentLayer(RecurrentOptions opts);

  std::size_t units() const { return opts_.units; }
  bool return_sequences() const { return opts_.return_sequences; }
  std::string summary() const override;
  Shape configure_single(const Shape& input, Rng& rng) override;
  void collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) override;

 protected:
  virtual std::size_t gate_count() const = 0;
  void check_input(const Tensor& x) const;

  RecurrentOptions opts_;
  Parameter kernel_;     // [ch, gates*units]
  Parameter recurrent_;  // [units, gates*units]
  Parameter bias_;       // [gates*units]
  Tensor input_;
  bool cached_ = false;
};

/// LSTM, gate order (input, forget, candidate, output):
///   i, f, o = sigmoid(x W + h R + b), g = tanh(...)
///   c_t = f * c_{t-1} + i * g,  h_t = o * tanh(c_t)
/// Forget-gate bias starts at 1.
class Lstm final : public RecurrentLayer {
 public:
  explicit Lstm(RecurrentOptions opts) : RecurrentLayer(opts) {}

  LayerKind kind() const override { return LayerKind::lstm; }
  std::string family() const override { return "lstm"; }
  Shape configure_single(const Shape& input, Rng& rng) override;
  Tensor forward_single(const Tensor& input, Mode mode, bool record) override;
  Tensor backward_single(const Tensor& grad_output) override;

 protected:
  std::size_t gate_count() const override { return 4; }

 private:
  std::size_t batch_ = 0, time_ = 0;
  std::vector<real> gates_;   // [time][batch][4U], activated
  std::vector<real> cells_;   // [time+1][batch][U]
  std::vector<real> hidden_;  // [time+1][batch][U]
};

/// GRU with the reset gate applied before the recurrent candidate product:
///   z, r = sigmoid(x W + h R + b)
///   h~ = tanh(x W_h + (r * h) R_h + b_h)
///   h_t = (1 - z) * h_{t-1} + z * h~
/// Gate order (update, reset, candidate).
class Gru final : public RecurrentLayer {
 public:
  explicit Gru(RecurrentOptions opts) : RecurrentLayer(opts) {}

  LayerKind kind() const override { return LayerKind::gru; }
  std::string family() const override { return "gru"; }
  Tensor forward_single(const Tensor& input, Mode mode, bool record) override;
  Tensor backward_single(const Tensor& grad_output) override;

 protected:
  std::size_t gate_count() const override { return 3; }

 private:
  std::size_t batch_ = 0, time_ = 0;
  std::vector<real> gates_;   // [time][batch][3U]: z, r, h~
  std::vector<real> hidden_;  // [time+1][batch][U]
};

enum class RecurrentCell { lstm, gru };

/// Runs one recurrent layer forward in time and an independently
/// parameterized twin on the time-reversed sequence, re-reverses the latter's
/// outputs and concatenates both on the channel axis (2*units channels).
class Bidirectional final : public UnaryLayer {
 public:
  Bidirectional(RecurrentCell cell, RecurrentOptions opts);
  /// Takes ownership of two recurrent layers of the same kind and options.
  Bidirectional(std::unique_ptr<UnaryLayer> forward_dir, std::unique_ptr<UnaryLayer> backward_dir);

  LayerKind kind() const override { return LayerKind::bidirectional; }
  std::string family() const override;
  std::string summary() const override;
  Shape configure_single(const Shape& input, Rng& rng) override;
  Tensor forward_single(const Tensor& input, Mode mode, bool record) override;
  Tensor backward_single(const Tensor& grad_output) override;
  void collect_parameters(const std::string& prefix, std::vector<ParamRef>& out) override;

  RecurrentLayer& forward_layer() { return *fwd_; }
  RecurrentLayer& backward_layer() { return *bwd_; }

 private:
  std::unique_ptr<RecurrentLayer> fwd_;
  std::unique_ptr<RecurrentLayer> bwd_;
};

}  // namespace tsdl
