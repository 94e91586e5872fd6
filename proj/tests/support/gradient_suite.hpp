#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "support/gradcheck.hpp"
#include "tsdl/layers.hpp"

namespace tsdl::testing {

/// A configured layer plus the inputs and mode to probe it with.
struct GradCase {
  std::unique_ptr<Layer> layer;
  std::vector<Tensor> inputs;
  Mode mode = Mode::eval;
};

struct GradFamily {
  std::string name;
  std::function<GradCase(std::uint64_t seed)> make;
};

namespace detail {

template <class L>
GradCase unary_case(std::unique_ptr<L> layer, const Shape& sample, std::size_t batch, Mode mode,
                    std::uint64_t seed, bool jitter = true) {
  Rng rng(seed);
  layer->configure(sample, rng);
  if (jitter) jitter_parameters(*layer, seed + 101);
  Shape full{batch};
  full.insert(full.end(), sample.begin(), sample.end());
  GradCase c;
  c.inputs.push_back(random_tensor(full, seed + 202));
  c.mode = mode;
  c.layer = std::move(layer);
  return c;
}

}  // namespace detail

/// Every layer family with the modes in which its behaviour differs.
inline std::vector<GradFamily> gradient_families() {
  using detail::unary_case;
  std::vector<GradFamily> f;
  auto conv = [](Padding p, std::size_t stride) {
    return [p, stride](std::uint64_t s) {
      return unary_case(std::make_unique<Conv1d>(Conv1dOptions{3, 3, stride, p, Activation::tanh()}),
                        {9, 2}, 2, Mode::eval, s);
    };
  };
  f.push_back({"conv1d_valid", conv(Padding::valid, 1)});
  f.push_back({"conv1d_same", conv(Padding::same, 1)});
  f.push_back({"conv1d_full", conv(Padding::full, 1)});
  f.push_back({"conv1d_same_stride2", conv(Padding::same, 2)});
  f.push_back({"pool_max", [](std::uint64_t s) {
                 return unary_case(std::make_unique<Pool1d>(Pool1dOptions{PoolKind::max, 2, 2}), {10, 3}, 2,
                                   Mode::eval, s);
               }});
  f.push_back({"pool_avg", [](std::uint64_t s) {
                 return unary_case(std::make_unique<Pool1d>(Pool1dOptions{PoolKind::avg, 3, 2}), {11, 3}, 2,
                                   Mode::eval, s);
               }});
  f.push_back({"pool_global_avg", [](std::uint64_t s) {
                 return unary_case(std::make_unique<Pool1d>(Pool1dOptions{PoolKind::global_avg}), {7, 4}, 3,
                                   Mode::eval, s);
               }});
  f.push_back({"dense_linear", [](std::uint64_t s) {
                 return unary_case(std::make_unique<Dense>(3), {4}, 3, Mode::eval, s);
               }});
  f.push_back({"dense_sigmoid", [](std::uint64_t s) {
                 return unary_case(std::make_unique<Dense>(3, Activation::sigmoid()), {4}, 3, Mode::eval, s);
               }});
  f.push_back({"dense_softmax", [](std::uint64_t s) {
                 return unary_case(std::make_unique<Dense>(4, Activation::softmax()), {4}, 3, Mode::eval, s);
               }});
  f.push_back({"dense_leaky_relu", [](std::uint64_t s) {
                 return unary_case(std::make_unique<Dense>(4, Activation::leaky_relu()), {3}, 3, Mode::eval, s);
               }});
  f.push_back({"batchnorm_train", [](std::uint64_t s) {
                 return unary_case(std::make_unique<BatchNorm1d>(), {5, 3}, 3, Mode::train, s);
               }});
  f.push_back({"batchnorm_eval", [](std::uint64_t s) {
                 auto c = unary_case(std::make_unique<BatchNorm1d>(), {5, 3}, 3, Mode::eval, s);
                 Rng rng(s);
                 for (BufferRef& b : c.layer->buffers())
                   for (real& v : b.buffer->data()) v = static_cast<real>(rng.uniform(0.5, 2.0));
                 return c;
               }});
  f.push_back({"dropout_eval", [](std::uint64_t s) {
                 return unary_case(std::make_unique<Dropout>(0.4, s), {6, 3}, 2, Mode::eval, s);
               }});
  f.push_back({"dropout_frozen_mask", [](std::uint64_t s) {
                 auto c = unary_case(std::make_unique<Dropout>(0.4, s), {6, 3}, 2, Mode::train, s);
                 auto& d = static_cast<Dropout&>(*c.layer);
                 d(c.inputs[0], Mode::train, false);
                 d.freeze_mask(true);
                 return c;
               }});
  f.push_back({"lstm_sequence", [](std::uint64_t s) {
                 return unary_case(std::make_unique<Lstm>(RecurrentOptions{3, true}), {6, 2}, 2, Mode::eval, s);
               }});
  f.push_back({"lstm_last", [](std::uint64_t s) {
                 return unary_case(std::make_unique<Lstm>(RecurrentOptions{4, false}), {8, 3}, 2, Mode::eval, s);
               }});
  f.push_back({"gru_sequence", [](std::uint64_t s) {
                 return unary_case(std::make_unique<Gru>(RecurrentOptions{3, true}), {6, 2}, 2, Mode::eval, s);
               }});
  f.push_back({"gru_last", [](std::uint64_t s) {
                 return unary_case(std::make_unique<Gru>(RecurrentOptions{4, false}), {8, 3}, 2, Mode::eval, s);
               }});
  f.push_back({"bilstm", [](std::uint64_t s) {
                 return unary_case(std::make_unique<Bidirectional>(RecurrentCell::lstm, RecurrentOptions{3, true}),
                                   {5, 2}, 2, Mode::eval, s);
               }});
  f.push_back({"bigru", [](std::uint64_t s) {
                 return unary_case(std::make_unique<Bidirectional>(RecurrentCell::gru, RecurrentOptions{3, false}),
                                   {5, 2}, 2, Mode::eval, s);
               }});
  f.push_back({"se_block", [](std::uint64_t s) {
                 return unary_case(std::make_unique<SeBlock>(2), {6, 4}, 2, Mode::eval, s);
               }});
  f.push_back({"rta_block_train", [](std::uint64_t s) {
                 return unary_case(std::make_unique<RtaBlock>(RtaOptions{3, 3, 2}), {7, 2}, 3, Mode::train, s);
               }});
  f.push_back({"rta_block_eval", [](std::uint64_t s) {
                 return unary_case(std::make_unique<RtaBlock>(RtaOptions{2, 3, 2}), {8, 2}, 2, Mode::eval, s);
               }});
  f.push_back({"spatiotemporal_attention", [](std::uint64_t s) {
                 return unary_case(std::make_unique<SpatioTemporalAttention>(2, 3), {6, 4}, 2, Mode::eval, s);
               }});
  f.push_back({"attention_pooling", [](std::uint64_t s) {
                 return unary_case(std::make_unique<AttentionPooling>(3), {5, 3}, 2, Mode::eval, s);
               }});
  f.push_back({"flatten", [](std::uint64_t s) {
                 return unary_case(std::make_unique<Flatten>(), {4, 3}, 2, Mode::eval, s);
               }});
  f.push_back({"reshape", [](std::uint64_t s) {
                 return unary_case(std::make_unique<Reshape>(Shape{3, 4}), {12}, 2, Mode::eval, s);
               }});
  f.push_back({"upsample1d", [](std::uint64_t s) {
                 return unary_case(std::make_unique<Upsample1d>(3), {4, 2}, 2, Mode::eval, s);
               }});
  f.push_back({"crop_pad_crop", [](std::uint64_t s) {
                 return unary_case(std::make_unique<CropPad>(4), {6, 2}, 2, Mode::eval, s);
               }});
  f.push_back({"crop_pad_pad", [](std::uint64_t s) {
                 return unary_case(std::make_unique<CropPad>(9), {6, 2}, 2, Mode::eval, s);
               }});
  f.push_back({"activation_softmax", [](std::uint64_t s) {
                 return unary_case(std::make_unique<ActivationLayer>(Activation::softmax()), {5, 3}, 2, Mode::eval, s);
               }});
  f.push_back({"add_skip", [](std::uint64_t s) {
                 Rng rng(s);
                 auto layer = std::make_unique<Add>();
                 const Shape shapes[] = {{5, 3}, {5, 3}};
                 layer->configure(shapes, rng);
                 GradCase c;
                 c.inputs = {random_tensor({2, 5, 3}, s + 1), random_tensor({2, 5, 3}, s + 2)};
                 c.layer = std::move(layer);
                 return c;
               }});
  f.push_back({"concat", [](std::uint64_t s) {
                 Rng rng(s);
                 auto layer = std::make_unique<Concat>();
                 const Shape shapes[] = {{5, 2}, {5, 3}, {5, 1}};
                 layer->configure(shapes, rng);
                 GradCase c;
                 c.inputs = {random_tensor({2, 5, 2}, s + 1), random_tensor({2, 5, 3}, s + 2),
                             random_tensor({2, 5, 1}, s + 3)};
                 c.layer = std::move(layer);
                 return c;
               }});
  return f;
}

inline GradCheck run_family(const GradFamily& family, std::uint64_t seed) {
  GradCase c = family.make(seed);
  return check_gradients(*c.layer, std::move(c.inputs), c.mode, seed);
}

}  // namespace tsdl::testing
