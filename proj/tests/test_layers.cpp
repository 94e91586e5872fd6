#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "support/gradcheck.hpp"
#include "tsdl/error.hpp"
#include "tsdl/layers.hpp"

using namespace tsdl;
using tsdl::testing::random_tensor;

namespace {

real sigm(real v) { return 1 / (1 + std::exp(-v)); }

// Valid cross-correlation of an explicitly padded input.
Tensor conv_oracle(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride,
                   std::size_t before, std::size_t after) {
  const Tensor xp = pad(x, 1, before, after, 0);
  const std::size_t batch = xp.extent(0), time = xp.extent(1), ch = xp.extent(2);
  const std::size_t k = w.extent(0), f = w.extent(2);
  const std::size_t t_out = (time - k) / stride + 1;
  Tensor y({batch, t_out, f});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < t_out; ++t)
      for (std::size_t o = 0; o < f; ++o) {
        real acc = bias(o);
        for (std::size_t j = 0; j < k; ++j)
          for (std::size_t c = 0; c < ch; ++c) acc += xp(b, t * stride + j, c) * w(j, c, o);
        y(b, t, o) = acc;
      }
  return y;
}

Tensor gap_oracle(const Tensor& x) { return reduce(ReduceOp::mean, x, 1); }

Tensor dense_oracle(const Tensor& x, Layer& d) {
  Tensor y = matmul(x, d.parameter("weight").value);
  const Tensor& b = d.parameter("bias").value;
  for (std::size_t i = 0; i < y.extent(0); ++i)
    for (std::size_t j = 0; j < y.extent(1); ++j) y(i, j) += b(j);
  return y;
}

// One LSTM step for a single sample; gate blocks i, f, g, o.
void lstm_step(const std::vector<real>& x, std::vector<real>& h, std::vector<real>& c, const Tensor& W,
               const Tensor& R, const Tensor& bias) {
  const std::size_t units = h.size();
  std::vector<real> z(4 * units);
  for (std::size_t j = 0; j < 4 * units; ++j) {
    real acc = bias(j);
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * W(i, j);
    for (std::size_t i = 0; i < units; ++i) acc += h[i] * R(i, j);
    z[j] = acc;
  }
  for (std::size_t u = 0; u < units; ++u) {
    const real ig = sigm(z[u]), fg = sigm(z[units + u]), g = std::tanh(z[2 * units + u]),
               og = sigm(z[3 * units + u]);
    c[u] = fg * c[u] + ig * g;
    h[u] = og * std::tanh(c[u]);
  }
}

// One GRU step; gate blocks z, r, candidate; reset applied before the product.
void gru_step(const std::vector<real>& x, std::vector<real>& h, const Tensor& W, const Tensor& R,
              const Tensor& bias) {
  const std::size_t units = h.size();
  auto input_part = [&](std::size_t j) {
    real acc = bias(j);
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * W(i, j);
    return acc;
  };
  std::vector<real> z(units), r(units), next(units);
  for (std::size_t u = 0; u < units; ++u) {
    real az = input_part(u), ar = input_part(units + u);
    for (std::size_t i = 0; i < units; ++i) {
      az += h[i] * R(i, u);
      ar += h[i] * R(i, units + u);
    }
    z[u] = sigm(az);
    r[u] = sigm(ar);
  }
  for (std::size_t u = 0; u < units; ++u) {
    real a = input_part(2 * units + u);
    for (std::size_t i = 0; i < units; ++i) a += r[i] * h[i] * R(i, 2 * units + u);
    next[u] = (1 - z[u]) * h[u] + z[u] * std::tanh(a);
  }
  h = next;
}

std::vector<real> row(const Tensor& x, std::size_t b, std::size_t t) {
  std::vector<real> out(x.extent(2));
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = x(b, t, c);
  return out;
}

void zero_parameters(Layer& layer) {
  for (ParamRef& ref : layer.parameters()) ref.param->value.fill(0);
}

}  // namespace

// ---- activations ----------------------------------------------------------

TEST(Activation, SoftmaxRowsSumToOne) {
  Tensor x = random_tensor({6, 5}, 1, 3);
  activate(Activation::softmax(), x.data(), 5);
  for (std::size_t i = 0; i < 6; ++i) {
    real s = 0;
    for (std::size_t j = 0; j < 5; ++j) s += x(i, j);
    EXPECT_NEAR(s, 1, 1e-9);
  }
}

TEST(Activation, RangeProperties) {
  const Tensor x = random_tensor({200}, 2, 4);
  Tensor r = x, l = x, s = x, t = x;
  activate(Activation::relu(), r.data(), 1);
  activate(Activation::leaky_relu(), l.data(), 1);
  activate(Activation::sigmoid(), s.data(), 1);
  activate(Activation::tanh(), t.data(), 1);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_GE(r(i), 0);
    if (x(i) >= 0) EXPECT_EQ(l(i), x(i));
    else EXPECT_NEAR(l(i), real(0.3) * x(i), 1e-15);
    EXPECT_GT(s(i), 0);
    EXPECT_LT(s(i), 1);
    EXPECT_GT(t(i), -1);
    EXPECT_LT(t(i), 1);
  }
}

TEST(Activation, ParseRoundTrip) {
  for (const char* name : {"linear", "relu", "sigmoid", "tanh", "softmax", "leaky_relu"})
    EXPECT_EQ(to_string(parse_activation(name)), name);
  EXPECT_THROW(parse_activation("swish"), ParameterError);
}

// ---- conv1d ---------------------------------------------------------------

TEST(Conv1d, IdentityKernel) {
  Rng rng(1);
  Conv1d conv({1, 1, 1, Padding::valid});
  conv.configure({5, 1}, rng);
  conv.parameter("weight").value.fill(1);
  const Tensor x = random_tensor({1, 5, 1}, 3);
  EXPECT_EQ(conv(x), x);
}

TEST(Conv1d, OutputLengths) {
  EXPECT_EQ(Conv1d::output_length(10, {1, 3, 1, Padding::valid}), 8u);
  EXPECT_EQ(Conv1d::output_length(10, {1, 3, 1, Padding::full}), 12u);
  EXPECT_EQ(Conv1d::output_length(10, {1, 3, 1, Padding::same}), 10u);
  EXPECT_EQ(Conv1d::output_length(10, {1, 3, 3, Padding::same}), 4u);
  EXPECT_EQ(Conv1d::output_length(10, {1, 4, 2, Padding::valid}), 4u);
  EXPECT_EQ(Conv1d::output_length(10, {1, 4, 3, Padding::full}), 5u);
}

TEST(Conv1d, ValidAndFullMatchDirectSummation) {
  Rng rng(2);
  const Tensor x = random_tensor({2, 10, 2}, 4);
  for (Padding p : {Padding::valid, Padding::full}) {
    Conv1d conv({3, 3, 1, p});
    conv.configure({10, 2}, rng);
    tsdl::testing::jitter_parameters(conv, 5);
    const std::size_t margin = p == Padding::full ? 2 : 0;
    const Tensor y = conv(x);
    EXPECT_EQ(y.extent(1), p == Padding::full ? 12u : 8u);
    EXPECT_LE(max_abs_diff(y, conv_oracle(x, conv.parameter("weight").value, conv.parameter("bias").value, 1,
                                          margin, margin)),
              1e-12);
  }
}

TEST(Conv1d, SameMatchesPadThenValid) {
  Rng rng(3);
  Conv1d conv({4, 3, 1, Padding::same});
  conv.configure({9, 3}, rng);
  tsdl::testing::jitter_parameters(conv, 6);
  const Tensor x = random_tensor({2, 9, 3}, 7);
  EXPECT_LE(max_abs_diff(conv(x), conv_oracle(x, conv.parameter("weight").value, conv.parameter("bias").value, 1, 1, 1)),
            1e-12);
}

TEST(Conv1d, StridedSameMatchesOracle) {
  Rng rng(4);
  Conv1d conv({2, 4, 2, Padding::same});
  conv.configure({9, 2}, rng);
  const Tensor x = random_tensor({1, 9, 2}, 8);
  // T_out = 5, total pad = (5-1)*2 + 4 - 9 = 3, split 1 before / 2 after.
  EXPECT_LE(max_abs_diff(conv(x), conv_oracle(x, conv.parameter("weight").value, conv.parameter("bias").value, 2, 1, 2)),
            1e-12);
}

TEST(Conv1d, SamePreservesLength) {
  Rng rng(5);
  for (std::size_t k : {1u, 2u, 3u, 4u, 7u}) {
    Conv1d conv({2, k, 1, Padding::same});
    EXPECT_EQ(conv.configure({11, 1}, rng), (Shape{11, 2}));
    EXPECT_EQ(conv(random_tensor({1, 11, 1}, k)).extent(1), 11u);
  }
}

TEST(Conv1d, ValidTooShortThrows) {
  Rng rng(6);
  Conv1d conv({2, 5, 1, Padding::valid});
  EXPECT_THROW(conv.configure({4, 1}, rng), ShapeError);
}

TEST(Conv1d, BadOptionsThrow) {
  EXPECT_THROW(Conv1d({0, 3}), ParameterError);
  EXPECT_THROW(Conv1d({1, 0}), ParameterError);
  EXPECT_THROW(Conv1d({1, 3, 0}), ParameterError);
}

// ---- pooling --------------------------------------------------------------

TEST(Pool1d, MaxByHand) {
  Rng rng(1);
  Pool1d pool({PoolKind::max, 2, 2});
  pool.configure({4, 1}, rng);
  EXPECT_EQ(pool(make({1, 4, 1}, std::vector<real>{1, 2, 3, 4})), make({1, 2, 1}, std::vector<real>{2, 4}));
}

TEST(Pool1d, GlobalAverageOfConstant) {
  Rng rng(1);
  Pool1d pool({PoolKind::global_avg});
  EXPECT_EQ(pool.configure({6, 3}, rng), (Shape{3}));
  const Tensor y = pool(Tensor({2, 6, 3}, real(2.5)));
  EXPECT_EQ(y.shape(), (Shape{2, 3}));
  for (real v : y.data()) EXPECT_NEAR(v, 2.5, 1e-15);
}

TEST(Pool1d, AverageMatchesScan) {
  Rng rng(1);
  Pool1d pool({PoolKind::avg, 3, 2});
  pool.configure({12, 2}, rng);
  const Tensor x = random_tensor({3, 12, 2}, 9);
  const Tensor y = pool(x);
  ASSERT_EQ(y.shape(), (Shape{3, 5, 2}));
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t t = 0; t < 5; ++t)
      for (std::size_t c = 0; c < 2; ++c)
        EXPECT_NEAR(y(b, t, c), (x(b, 2 * t, c) + x(b, 2 * t + 1, c) + x(b, 2 * t + 2, c)) / 3, 1e-12);
}

TEST(Pool1d, WindowTooLargeThrows) {
  Rng rng(1);
  Pool1d pool({PoolKind::max, 5, 5});
  EXPECT_THROW(pool.configure({4, 1}, rng), ShapeError);
}

TEST(Pool1d, MaxBackwardRoutesToArgmax) {
  Rng rng(1);
  Pool1d pool({PoolKind::max, 3, 3});
  pool.configure({9, 2}, rng);
  const Tensor x = random_tensor({2, 9, 2}, 10);
  pool(x, Mode::train);
  const Tensor g = random_tensor({2, 3, 2}, 11);
  const Tensor dx = pool.backward_single(g);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t w = 0; w < 3; ++w)
      for (std::size_t c = 0; c < 2; ++c) {
        std::size_t arg = 3 * w;
        for (std::size_t t = 3 * w; t < 3 * w + 3; ++t)
          if (x(b, t, c) > x(b, arg, c)) arg = t;
        real window_sum = 0;
        for (std::size_t t = 3 * w; t < 3 * w + 3; ++t) {
          if (t != arg) EXPECT_EQ(dx(b, t, c), 0);
          window_sum += dx(b, t, c);
        }
        EXPECT_EQ(window_sum, g(b, w, c));
      }
}

TEST(Pool1d, MaxTieGoesToFirstIndex) {
  Rng rng(1);
  Pool1d pool({PoolKind::max, 2, 2});
  pool.configure({2, 1}, rng);
  pool(make({1, 2, 1}, std::vector<real>{3, 3}), Mode::train);
  const Tensor dx = pool.backward_single(make({1, 1, 1}, real{1}));
  EXPECT_EQ(dx(0, 0, 0), 1);
  EXPECT_EQ(dx(0, 1, 0), 0);
}

// ---- dense ----------------------------------------------------------------

TEST(Dense, IdentityWeights) {
  Rng rng(1);
  Dense d(3);
  d.configure({3}, rng);
  d.parameter("weight").value = make({3, 3}, std::vector<real>{1, 0, 0, 0, 1, 0, 0, 0, 1});
  const Tensor x = random_tensor({4, 3}, 12);
  EXPECT_EQ(d(x), x);
}

TEST(Dense, HandAffine) {
  Rng rng(1);
  Dense d(1);
  d.configure({2}, rng);
  d.parameter("weight").value = make({2, 1}, std::vector<real>{1, 1});
  d.parameter("bias").value = make({1}, std::vector<real>{3});
  EXPECT_EQ(d(make({1, 2}, std::vector<real>{1, 2})), make({1, 1}, std::vector<real>{6}));
}

TEST(Dense, MatchesMatmulPlusBias) {
  Rng rng(2);
  Dense d(5);
  d.configure({4}, rng);
  tsdl::testing::jitter_parameters(d, 13);
  const Tensor x = random_tensor({3, 4}, 14);
  EXPECT_LE(max_abs_diff(d(x), dense_oracle(x, d)), 1e-12);
}

TEST(Dense, RankMismatchThrows) {
  Rng rng(1);
  Dense d(2);
  EXPECT_THROW(d.configure({3, 2}, rng), ShapeError);
  d.configure({3}, rng);
  EXPECT_THROW(d(Tensor({1, 3, 2})), ShapeError);
}

// ---- batch norm -----------------------------------------------------------

TEST(BatchNorm, TrainModeNormalizes) {
  Rng rng(1);
  BatchNorm1d bn;
  bn.configure({7, 3}, rng);
  const Tensor x = random_tensor({5, 7, 3}, 15, 80);
  const Tensor y = bn(x, Mode::train);
  for (std::size_t c = 0; c < 3; ++c) {
    real mean = 0, var = 0;
    for (std::size_t r = 0; r < 35; ++r) mean += y.raw()[r * 3 + c];
    mean /= 35;
    for (std::size_t r = 0; r < 35; ++r) var += (y.raw()[r * 3 + c] - mean) * (y.raw()[r * 3 + c] - mean);
    var /= 35;
    EXPECT_LE(std::abs(mean), 1e-6);
    EXPECT_NEAR(var, 1, 1e-6);
  }
}

TEST(BatchNorm, EvalModeUsesRunningBuffers) {
  Rng rng(1);
  BatchNorm1d bn;
  bn.configure({4, 2}, rng);
  const Tensor x = random_tensor({3, 4, 2}, 16);
  const Tensor y = bn(x, Mode::eval);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y.raw()[i], x.raw()[i] / std::sqrt(1 + 1e-3), 1e-12);
}

TEST(BatchNorm, RunningBuffersFollowRecurrence) {
  Rng rng(1);
  BatchNorm1d bn;
  bn.configure({2, 1}, rng);
  const Tensor a = make({2, 2, 1}, std::vector<real>{1, 2, 3, 4});
  const Tensor b = make({2, 2, 1}, std::vector<real>{0, 0, 10, 2});
  bn(a, Mode::train);
  bn(b, Mode::train);
  // batch a: mean 2.5, var 1.25; batch b: mean 3, var 17
  real m = 0, v = 1;
  m = 0.99 * m + 0.01 * 2.5;
  v = 0.99 * v + 0.01 * 1.25;
  m = 0.99 * m + 0.01 * 3;
  v = 0.99 * v + 0.01 * 17;
  EXPECT_NEAR(bn.buffer("running_mean")(0), m, 1e-15);
  EXPECT_NEAR(bn.buffer("running_var")(0), v, 1e-15);
}

TEST(BatchNorm, EvalAndBackwardLeaveBuffersAlone) {
  Rng rng(1);
  BatchNorm1d bn;
  bn.configure({3, 2}, rng);
  const Tensor before_mean = bn.buffer("running_mean"), before_var = bn.buffer("running_var");
  bn(random_tensor({2, 3, 2}, 17), Mode::eval);
  bn.backward_single(random_tensor({2, 3, 2}, 18));
  EXPECT_EQ(bn.buffer("running_mean"), before_mean);
  EXPECT_EQ(bn.buffer("running_var"), before_var);
}

TEST(BatchNorm, SingleValueBatchThrows) {
  Rng rng(1);
  BatchNorm1d bn;
  bn.configure({4}, rng);
  EXPECT_THROW(bn(Tensor({1, 4}), Mode::train), DegenerateError);
  EXPECT_NO_THROW(bn(Tensor({1, 4}), Mode::eval));
}

// ---- dropout --------------------------------------------------------------

TEST(Dropout, ZeroRateIsIdentity) {
  Dropout d(0, 1);
  const Tensor x = random_tensor({3, 4}, 19);
  EXPECT_EQ(d(x, Mode::train), x);
}

TEST(Dropout, EvalIsIdentity) {
  Dropout d(0.5, 1);
  const Tensor x = random_tensor({3, 4}, 20);
  EXPECT_EQ(d(x, Mode::eval), x);
}

TEST(Dropout, MonteCarloRates) {
  Dropout d(0.2, 21);
  const Tensor x({100000}, real(2));
  const Tensor y = d(x.reshape({1, 100000}), Mode::train);
  std::size_t kept = 0;
  real total = 0;
  for (real v : y.data()) {
    if (v != 0) {
      ++kept;
      EXPECT_NEAR(v, 2.5, 1e-12);
    }
    total += v;
  }
  EXPECT_NEAR(static_cast<double>(kept) / 1e5, 0.8, 0.01);
  EXPECT_NEAR(total / 1e5, 2.0, 0.04);
}

TEST(Dropout, MaskDeterministicGivenSeed) {
  Dropout a(0.3, 22), b(0.3, 22);
  const Tensor x = random_tensor({4, 8}, 23);
  EXPECT_EQ(a(x, Mode::train), b(x, Mode::train));
}

TEST(Dropout, InvalidRateThrows) {
  EXPECT_THROW(Dropout(1.0), ParameterError);
  EXPECT_THROW(Dropout(-0.1), ParameterError);
}

// ---- recurrent ------------------------------------------------------------

TEST(Lstm, ZeroWeightsGiveZeros) {
  Rng rng(1);
  Lstm lstm({3, true});
  lstm.configure({5, 2}, rng);
  zero_parameters(lstm);
  const Tensor y = lstm(random_tensor({2, 5, 2}, 24));
  EXPECT_EQ(y.shape(), (Shape{2, 5, 3}));
  for (real v : y.data()) EXPECT_EQ(v, 0);
}

TEST(Lstm, OneStepByHand) {
  Rng rng(1);
  Lstm lstm({1, false});
  lstm.configure({1, 1}, rng);
  lstm.parameter("kernel").value = make({1, 4}, std::vector<real>{0.5, -0.25, 1.0, 2.0});
  lstm.parameter("recurrent_kernel").value = make({1, 4}, std::vector<real>{0.3, 0.3, 0.3, 0.3});
  lstm.parameter("bias").value = make({1, 4}, std::vector<real>{0.1, 1.0, -0.2, 0.0}).reshape({4});
  const real x = 0.8;
  const real i = sigm(0.5 * x + 0.1), g = std::tanh(1.0 * x - 0.2), o = sigm(2.0 * x);
  const real c = i * g;  // f * c_prev vanishes with zero initial state
  const Tensor y = lstm(make({1, 1, 1}, real(x)));
  EXPECT_NEAR(y(0, 0), o * std::tanh(c), 1e-15);
}

TEST(Lstm, MatchesUnrolledOracle) {
  Rng rng(2);
  Lstm lstm({3, true});
  lstm.configure({3, 2}, rng);
  tsdl::testing::jitter_parameters(lstm, 25);
  const Tensor x = random_tensor({2, 3, 2}, 26);
  const Tensor y = lstm(x);
  for (std::size_t b = 0; b < 2; ++b) {
    std::vector<real> h(3, 0), c(3, 0);
    for (std::size_t t = 0; t < 3; ++t) {
      lstm_step(row(x, b, t), h, c, lstm.parameter("kernel").value, lstm.parameter("recurrent_kernel").value,
                lstm.parameter("bias").value);
      for (std::size_t u = 0; u < 3; ++u) EXPECT_NEAR(y(b, t, u), h[u], 1e-12);
    }
  }
}

TEST(Lstm, ForgetBiasStartsAtOne) {
  Rng rng(3);
  Lstm lstm({4, false});
  lstm.configure({6, 2}, rng);
  const Tensor& b = lstm.parameter("bias").value;
  for (std::size_t j = 0; j < 16; ++j) EXPECT_EQ(b(j), (j >= 4 && j < 8) ? 1 : 0);
}

TEST(Lstm, LastStepEqualsSequenceTail) {
  Rng rng(4);
  Lstm seq({3, true}), last({3, false});
  seq.configure({5, 2}, rng);
  last.configure({5, 2}, rng);
  for (const char* name : {"kernel", "recurrent_kernel", "bias"})
    last.parameter(name).value = seq.parameter(name).value;
  const Tensor x = random_tensor({2, 5, 2}, 27);
  const Tensor ys = seq(x), yl = last(x);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t u = 0; u < 3; ++u) EXPECT_EQ(yl(b, u), ys(b, 4, u));
}

TEST(Gru, ZeroWeightsStayAtZero) {
  Rng rng(1);
  Gru gru({3, true});
  gru.configure({4, 2}, rng);
  zero_parameters(gru);
  const Tensor y = gru(random_tensor({2, 4, 2}, 28));
  for (real v : y.data()) EXPECT_EQ(v, 0);
}

TEST(Gru, OneStepByHand) {
  Rng rng(1);
  Gru gru({1, false});
  gru.configure({1, 1}, rng);
  gru.parameter("kernel").value = make({1, 3}, std::vector<real>{0.4, -0.6, 1.5});
  gru.parameter("recurrent_kernel").value = make({1, 3}, std::vector<real>{0.2, 0.2, 0.2});
  gru.parameter("bias").value = make({3}, std::vector<real>{0.1, 0.0, -0.3});
  const real x = -0.7;
  const real z = sigm(0.4 * x + 0.1), hc = std::tanh(1.5 * x - 0.3);
  const Tensor y = gru(make({1, 1, 1}, real(x)));
  EXPECT_NEAR(y(0, 0), z * hc, 1e-15);
}

TEST(Gru, MatchesUnrolledOracle) {
  Rng rng(2);
  Gru gru({3, true});
  gru.configure({4, 2}, rng);
  tsdl::testing::jitter_parameters(gru, 29);
  const Tensor x = random_tensor({2, 4, 2}, 30);
  const Tensor y = gru(x);
  for (std::size_t b = 0; b < 2; ++b) {
    std::vector<real> h(3, 0);
    for (std::size_t t = 0; t < 4; ++t) {
      gru_step(row(x, b, t), h, gru.parameter("kernel").value, gru.parameter("recurrent_kernel").value,
               gru.parameter("bias").value);
      for (std::size_t u = 0; u < 3; ++u) EXPECT_NEAR(y(b, t, u), h[u], 1e-12);
    }
  }
}

TEST(Bidirectional, ChannelExtentDoubles) {
  Rng rng(1);
  Bidirectional bi(RecurrentCell::lstm, {5, true});
  EXPECT_EQ(bi.configure({7, 2}, rng), (Shape{7, 10}));
  EXPECT_EQ(bi.family(), "bilstm");
  Bidirectional bg(RecurrentCell::gru, {5, false});
  EXPECT_EQ(bg.configure({7, 2}, rng), (Shape{10}));
  EXPECT_EQ(bg.family(), "bigru");
}

TEST(Bidirectional, PalindromeWithTiedWeightsIsMirrored) {
  Rng rng(2);
  Bidirectional bi(RecurrentCell::gru, {3, true});
  bi.configure({5, 1}, rng);
  for (const char* name : {"kernel", "recurrent_kernel", "bias"})
    bi.backward_layer().parameter(name).value = bi.forward_layer().parameter(name).value;
  const Tensor x = make({1, 5, 1}, std::vector<real>{0.3, -1.0, 2.0, -1.0, 0.3});
  const Tensor y = bi(x);
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t u = 0; u < 3; ++u) EXPECT_EQ(y(0, t, 3 + u), y(0, 4 - t, u));
}

TEST(Bidirectional, EqualsReverseRunReverseConcat) {
  Rng rng(3);
  Bidirectional bi(RecurrentCell::lstm, {4, true});
  bi.configure({6, 3}, rng);
  const Tensor x = random_tensor({2, 6, 3}, 31);
  const Tensor fwd = bi.forward_layer()(x);
  const Tensor bwd = flip(bi.backward_layer()(flip(x, 1)), 1);
  EXPECT_EQ(bi(x), concat({fwd, bwd}, 2));
}

TEST(Bidirectional, DirectionsHaveIndependentParameters) {
  Rng rng(4);
  Bidirectional bi(RecurrentCell::lstm, {4, true});
  bi.configure({6, 3}, rng);
  EXPECT_NE(bi.parameter("forward.kernel").value, bi.parameter("backward.kernel").value);
  EXPECT_EQ(bi.parameters().size(), 6u);
}

// ---- attention blocks -----------------------------------------------------

TEST(SeBlock, ZeroWeightsHalveInput) {
  Rng rng(1);
  SeBlock se(2);
  se.configure({6, 4}, rng);
  zero_parameters(se);
  const Tensor x = random_tensor({2, 6, 4}, 32);
  EXPECT_LE(max_abs_diff(se(x), scale(x, 0.5)), 1e-15);
}

TEST(SeBlock, LargeBiasPinsGateOpen) {
  Rng rng(1);
  SeBlock se(2);
  se.configure({6, 4}, rng);
  se.parameter("excite.bias").value.fill(30);
  const Tensor x = random_tensor({2, 6, 4}, 33);
  EXPECT_LE(max_abs_diff(se(x), x), 1e-6 * 4);
}

TEST(SeBlock, MatchesCompositionalOracle) {
  Rng rng(2);
  SeBlock se(2);
  se.configure({5, 4}, rng);
  tsdl::testing::jitter_parameters(se, 34);
  const Tensor x = random_tensor({3, 5, 4}, 35);
  const Tensor& w1 = se.parameter("squeeze.weight").value;
  const Tensor& b1 = se.parameter("squeeze.bias").value;
  const Tensor& w2 = se.parameter("excite.weight").value;
  const Tensor& b2 = se.parameter("excite.bias").value;
  ASSERT_EQ(w1.shape(), (Shape{4, 2}));
  Tensor h = matmul(gap_oracle(x), w1);
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t j = 0; j < 2; ++j) h(b, j) = std::max<real>(0, h(b, j) + b1(j));
  Tensor s = matmul(h, w2);
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t j = 0; j < 4; ++j) s(b, j) = sigm(s(b, j) + b2(j));
  const Tensor y = se(x);
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t t = 0; t < 5; ++t)
      for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(y(b, t, c), x(b, t, c) * s(b, c), 1e-12);
}

TEST(SeBlock, BottleneckNeverBelowOne) {
  Rng rng(1);
  SeBlock se(8);
  se.configure({5, 3}, rng);
  EXPECT_EQ(se.parameter("squeeze.weight").value.shape(), (Shape{3, 1}));
}

TEST(RtaBlock, UpsampledMaxpoolPreservesConstants) {
  Rng rng(1);
  Pool1d pool({PoolKind::max, 2, 2});
  Upsample1d up(2);
  pool.configure({8, 1}, rng);
  up.configure({4, 1}, rng);
  const Tensor x({1, 8, 1}, real(1.75));
  EXPECT_EQ(up(pool(x)), x);
}

TEST(RtaBlock, ClosedGateLeavesTrunkPlusShortcut) {
  Rng rng(1);
  RtaBlock rta({4, 3, 2});
  rta.configure({8, 2}, rng);
  rta.parameter("attention.bn.shift").value.fill(-60);
  const Tensor x = random_tensor({2, 8, 2}, 36);
  for (Mode mode : {Mode::eval, Mode::train}) {
    Sequential trunk;
    trunk.emplace<Conv1d>("conv1", Conv1dOptions{4, 3});
    trunk.emplace<BatchNorm1d>("bn1");
    trunk.emplace<ActivationLayer>("relu1", Activation::relu());
    trunk.emplace<Conv1d>("conv2", Conv1dOptions{4, 3});
    trunk.emplace<BatchNorm1d>("bn2");
    trunk.emplace<ActivationLayer>("relu2", Activation::relu());
    trunk.configure({8, 2}, rng);
    for (ParamRef& ref : trunk.parameters()) ref.param->value = rta.parameter("trunk." + ref.name).value;
    Conv1d shortcut({4, 1});
    shortcut.configure({8, 2}, rng);
    shortcut.parameter("weight").value = rta.parameter("shortcut.weight").value;
    shortcut.parameter("bias").value = rta.parameter("shortcut.bias").value;
    const Tensor expected = add(trunk(x, mode), shortcut(x, mode));
    EXPECT_LE(max_abs_diff(rta(x, mode), expected), 1e-12);
  }
}

TEST(RtaBlock, MatchesCompositionalOracle) {
  Rng rng(2);
  RtaBlock rta({3, 3, 2});
  rta.configure({7, 3}, rng);
  tsdl::testing::jitter_parameters(rta, 37);
  const Tensor x = random_tensor({2, 7, 3}, 38);

  Sequential trunk, att;
  trunk.emplace<Conv1d>("conv1", Conv1dOptions{3, 3});
  trunk.emplace<BatchNorm1d>("bn1");
  trunk.emplace<ActivationLayer>("relu1", Activation::relu());
  trunk.emplace<Conv1d>("conv2", Conv1dOptions{3, 3});
  trunk.emplace<BatchNorm1d>("bn2");
  trunk.emplace<ActivationLayer>("relu2", Activation::relu());
  att.emplace<Pool1d>("pool", Pool1dOptions{PoolKind::max, 2, 2});
  att.emplace<Conv1d>("conv", Conv1dOptions{3, 3});
  att.emplace<BatchNorm1d>("bn");
  att.emplace<Upsample1d>("upsample", 2);
  trunk.configure({7, 3}, rng);
  att.configure({7, 3}, rng);
  for (ParamRef& ref : trunk.parameters()) ref.param->value = rta.parameter("trunk." + ref.name).value;
  for (ParamRef& ref : att.parameters()) ref.param->value = rta.parameter("attention." + ref.name).value;

  const Tensor t = trunk(x, Mode::train);
  Tensor a = pad(att(x, Mode::train), 1, 0, 1, 0);  // 6 upsampled steps padded to 7
  for (real& v : a.data()) v = sigm(v);
  Tensor expected = x;  // same channel count: identity shortcut
  for (std::size_t i = 0; i < x.size(); ++i) expected.raw()[i] += t.raw()[i] * (1 + a.raw()[i]);
  EXPECT_LE(max_abs_diff(rta(x, Mode::train), expected), 1e-12);
}

TEST(RtaBlock, NoShortcutWhenChannelsMatch) {
  Rng rng(1);
  RtaBlock rta({3, 3, 2});
  rta.configure({8, 3}, rng);
  EXPECT_THROW(rta.parameter("shortcut.weight"), ParameterError);
  EXPECT_EQ(rta.buffers().size(), 6u);
}

TEST(SpatioTemporalAttention, ZeroParametersQuarterInput) {
  Rng rng(1);
  SpatioTemporalAttention st(2, 3);
  st.configure({6, 4}, rng);
  zero_parameters(st);
  const Tensor x = random_tensor({2, 6, 4}, 39);
  EXPECT_LE(max_abs_diff(st(x), scale(x, 0.25)), 1e-15);
}

TEST(SpatioTemporalAttention, PinnedGatesPassInput) {
  Rng rng(1);
  SpatioTemporalAttention st(2, 3);
  st.configure({6, 4}, rng);
  st.parameter("excite.bias").value.fill(30);
  st.parameter("temporal.weight").value.fill(0);
  st.parameter("temporal.bias").value.fill(30);
  const Tensor x = random_tensor({2, 6, 4}, 40);
  EXPECT_LE(max_abs_diff(st(x), x), 1e-6 * 4);
}

TEST(SpatioTemporalAttention, MatchesCompositionalOracle) {
  Rng rng(2);
  SpatioTemporalAttention st(2, 3);
  st.configure({5, 4}, rng);
  tsdl::testing::jitter_parameters(st, 41);
  const Tensor x = random_tensor({2, 5, 4}, 42);
  Tensor h = matmul(gap_oracle(x), st.parameter("squeeze.weight").value);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t j = 0; j < 2; ++j) h(b, j) = std::max<real>(0, h(b, j) + st.parameter("squeeze.bias").value(j));
  Tensor s = matmul(h, st.parameter("excite.weight").value);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t j = 0; j < 4; ++j) s(b, j) = sigm(s(b, j) + st.parameter("excite.bias").value(j));
  Tensor u = x;
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t t = 0; t < 5; ++t)
      for (std::size_t c = 0; c < 4; ++c) u(b, t, c) *= s(b, c);
  Tensor m = reduce(ReduceOp::mean, u, 2).reshape({2, 5, 1});
  Tensor a = conv_oracle(m, st.parameter("temporal.weight").value, st.parameter("temporal.bias").value, 1, 1, 1);
  const Tensor y = st(x);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t t = 0; t < 5; ++t)
      for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(y(b, t, c), u(b, t, c) * sigm(a(b, t, 0)), 1e-12);
}

TEST(AttentionPooling, UniformScoresAverageOverTime) {
  Rng rng(1);
  AttentionPooling pool(4);
  EXPECT_EQ(pool.configure({6, 3}, rng), (Shape{3}));
  pool.parameter("score.weight").value.fill(0);
  const Tensor x = random_tensor({2, 6, 3}, 43);
  EXPECT_LE(max_abs_diff(pool(x), reduce(ReduceOp::mean, x, 1)), 1e-12);
}

// ---- shape ops ------------------------------------------------------------

TEST(ShapeOps, Flatten) {
  Rng rng(1);
  Flatten f;
  EXPECT_EQ(f.configure({5, 3}, rng), (Shape{15}));
  const Tensor x = random_tensor({2, 5, 3}, 44);
  const Tensor y = f(x);
  EXPECT_EQ(y.shape(), (Shape{2, 15}));
  EXPECT_EQ(y.reshape({2, 5, 3}), x);
}

TEST(ShapeOps, ReshapeCountMismatchThrows) {
  Rng rng(1);
  Reshape r({50, 1});
  EXPECT_EQ(r.configure({50}, rng), (Shape{50, 1}));
  EXPECT_THROW(r.configure({49}, rng), ShapeError);
}

TEST(ShapeOps, AddSkipWithZero) {
  Rng rng(1);
  Add a;
  const Shape s[] = {{4, 2}, {4, 2}};
  EXPECT_EQ(a.configure(s, rng), (Shape{4, 2}));
  const Tensor x = random_tensor({3, 4, 2}, 45);
  const Tensor z(x.shape());
  const Tensor* in[] = {&x, &z};
  EXPECT_EQ(a.forward(in, Mode::eval, false), x);
  const Shape bad[] = {{4, 2}, {4, 3}};
  EXPECT_THROW(a.configure(bad, rng), ShapeError);
}

TEST(ShapeOps, UpsampleRepeats) {
  Rng rng(1);
  Upsample1d up(3);
  up.configure({2, 1}, rng);
  EXPECT_EQ(up(make({1, 2, 1}, std::vector<real>{1, 2})), make({1, 6, 1}, std::vector<real>{1, 1, 1, 2, 2, 2}));
}

TEST(ShapeOps, ConcatSumsChannels) {
  Rng rng(1);
  Concat c;
  const Shape s[] = {{5, 2}, {5, 3}, {5, 1}};
  EXPECT_EQ(c.configure(s, rng), (Shape{5, 6}));
}

TEST(ShapeOps, CropPadForcesLength) {
  Rng rng(1);
  CropPad shorter(3), longer(6);
  shorter.configure({4, 1}, rng);
  longer.configure({4, 1}, rng);
  const Tensor x = make({1, 4, 1}, std::vector<real>{1, 2, 3, 4});
  EXPECT_EQ(shorter(x), make({1, 3, 1}, std::vector<real>{1, 2, 3}));
  EXPECT_EQ(longer(x), make({1, 6, 1}, std::vector<real>{1, 2, 3, 4, 0, 0}));
}

TEST(Layer, BackwardBeforeForwardThrows) {
  Rng rng(1);
  Dense d(2);
  d.configure({3}, rng);
  EXPECT_THROW(d.backward_single(Tensor({1, 2})), StateError);
  Lstm l({2, false});
  l.configure({3, 1}, rng);
  EXPECT_THROW(l.backward_single(Tensor({1, 2})), StateError);
}

TEST(Layer, SequentialPrefixesNames) {
  Rng rng(1);
  Sequential seq;
  seq.emplace<Dense>("first", 3);
  seq.emplace<Dense>("second", 2);
  seq.configure({4}, rng);
  std::vector<std::string> names;
  for (const ParamRef& ref : seq.parameters()) names.push_back(ref.name);
  EXPECT_EQ(names, (std::vector<std::string>{"first.weight", "first.bias", "second.weight", "second.bias"}));
}
