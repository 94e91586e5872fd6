#include <gtest/gtest.h>

#include <cmath>

#include "support/gradcheck.hpp"
#include "tsdl/error.hpp"
#include "tsdl/graph.hpp"
#include "tsdl/layers.hpp"

using namespace tsdl;
using tsdl::testing::random_tensor;

namespace {

real weighted_sum(const Tensor& y, const Tensor& w) {
  real s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y.data()[i] * w.data()[i];
  return s;
}

// in[4] -> dense(4, tanh) -> add(dense, in) -> dense(2)
Model skip_model(std::uint64_t seed) {
  GraphSpec g;
  g.input("in", {4});
  g.node<Dense>("hidden", {"in"}, 4, Activation::tanh());
  g.node<Add>("skip", {"hidden", "in"});
  g.then<Dense>("out", 2);
  return build(std::move(g), seed);
}

}  // namespace

TEST(Build, IdentityGraphReturnsInput) {
  GraphSpec g;
  g.input("x", {5, 2});
  Model m = build(std::move(g));
  const Tensor x = random_tensor({3, 5, 2}, 1);
  EXPECT_EQ(m.forward(x), x);
  EXPECT_EQ(m.output_shape(), (Shape{5, 2}));
}

TEST(Build, ValidConvShrinksByKernelMinusOne) {
  GraphSpec g;
  g.input("x", {1000, 1});
  g.then<Conv1d>("conv", Conv1dOptions{8, 3, 1, Padding::valid});
  Model m = build(std::move(g));
  EXPECT_EQ(m.output_shape(), (Shape{998, 8}));
  EXPECT_EQ(m.forward(random_tensor({2, 1000, 1}, 2)).shape(), (Shape{2, 998, 8}));
}

TEST(Build, ThreeWayConcatSumsChannels) {
  GraphSpec g;
  g.input("x", {10, 1});
  g.node<Conv1d>("a", {"x"}, Conv1dOptions{2, 3});
  g.node<Conv1d>("b", {"x"}, Conv1dOptions{3, 5});
  g.node<Conv1d>("c", {"x"}, Conv1dOptions{4, 7});
  g.node<Concat>("cat", {"a", "b", "c"});
  Model m = build(std::move(g));
  EXPECT_EQ(m.output_shape(), (Shape{10, 9}));
}

TEST(Build, MultipleInputsInDeclaredOrder) {
  GraphSpec g;
  for (const char* name : {"in1", "in2", "in3"}) g.input(name, {6, 1});
  g.node<Concat>("cat", {"in1", "in2", "in3"});
  Model m = build(std::move(g));
  ASSERT_EQ(m.inputs().size(), 3u);
  std::vector<Tensor> xs{make({1, 6, 1}, real(1)), make({1, 6, 1}, real(2)), make({1, 6, 1}, real(3))};
  const Tensor y = m.forward(xs);
  EXPECT_EQ(y(0, 4, 0), 1);
  EXPECT_EQ(y(0, 4, 1), 2);
  EXPECT_EQ(y(0, 4, 2), 3);
}

TEST(Build, NodesMayBeDeclaredOutOfOrder) {
  GraphSpec g;
  g.input("x", {3});
  g.node<Dense>("second", {"first"}, 2);
  g.node<Dense>("first", {"x"}, 4);
  g.output("second");
  Model m = build(std::move(g));
  EXPECT_EQ(m.output_shape(), (Shape{2}));
  EXPECT_EQ(m.node_info()[0].name, "first");
}

TEST(Build, DuplicateNameIsGraphError) {
  GraphSpec g;
  g.input("x", {3});
  g.node<Dense>("d", {"x"}, 2);
  g.node<Dense>("d", {"x"}, 2);
  EXPECT_THROW(build(std::move(g)), GraphError);
}

TEST(Build, UndeclaredReferenceIsGraphError) {
  GraphSpec g;
  g.input("x", {3});
  g.node<Dense>("d", {"nowhere"}, 2);
  EXPECT_THROW(build(std::move(g)), GraphError);
}

TEST(Build, CycleIsGraphErrorNamingANode) {
  GraphSpec g;
  g.input("x", {3});
  g.node<Add>("a", {"x", "b"});
  g.node<Add>("b", {"a", "x"});
  try {
    build(std::move(g));
    FAIL() << "cycle accepted";
  } catch (const GraphError& e) {
    const std::string msg = e.what();
    EXPECT_TRUE(msg.find("'a'") != std::string::npos || msg.find("'b'") != std::string::npos) << msg;
  }
}

TEST(Build, ShapeErrorNamesNode) {
  GraphSpec g;
  g.input("x", {2, 1});
  g.then<Conv1d>("too_wide", Conv1dOptions{4, 5, 1, Padding::valid});
  try {
    build(std::move(g));
    FAIL() << "short input accepted";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("too_wide"), std::string::npos);
  }
}

TEST(Build, AddRejectsMismatchedShapes) {
  GraphSpec g;
  g.input("x", {4});
  g.node<Dense>("a", {"x"}, 3);
  g.node<Add>("sum", {"a", "x"});
  EXPECT_THROW(build(std::move(g)), ShapeError);
}

TEST(Build, SameSeedSameWeights) {
  Model a = skip_model(9), b = skip_model(9), c = skip_model(10);
  EXPECT_EQ(a.parameter("hidden.weight").value, b.parameter("hidden.weight").value);
  EXPECT_NE(a.parameter("hidden.weight").value, c.parameter("hidden.weight").value);
}

TEST(Forward, WrongInputShapeThrows) {
  Model m = skip_model(1);
  EXPECT_THROW(m.forward(Tensor({2, 5})), ShapeError);
  EXPECT_THROW(m.forward(Tensor({4})), ShapeError);
}

TEST(Forward, EvalIsPure) {
  GraphSpec g;
  g.input("x", {6, 2});
  g.then<Conv1d>("conv", Conv1dOptions{3, 3});
  g.then<BatchNorm1d>("bn");
  g.then<Dropout>("drop", real(0.5), 3);
  Model m = build(std::move(g), 4);
  const Tensor x = random_tensor({3, 6, 2}, 5);
  const Tensor before = *m.buffers()[0].buffer;
  const Tensor y1 = m.forward(x);
  const Tensor y2 = m.forward(x);
  EXPECT_EQ(y1, y2);
  EXPECT_EQ(*m.buffers()[0].buffer, before);
  EXPECT_THROW(m.backward(y1), StateError);
}

TEST(Backward, RequiresTrainForward) {
  Model m = skip_model(1);
  EXPECT_THROW(m.backward(Tensor({1, 2})), StateError);
  m.set_mode(Mode::train);
  const Tensor y = m.forward(random_tensor({2, 4}, 3));
  m.backward(y);
  EXPECT_THROW(m.backward(y), StateError);
}

TEST(Backward, LinearLeastSquaresClosedForm) {
  // y = X W + b; L = 0.5 * |y - t|^2 so dW = X^T (y - t), db = sum_rows(y - t).
  GraphSpec g;
  g.input("x", {3});
  g.then<Dense>("fit", 2);
  Model m = build(std::move(g), 7);
  m.set_mode(Mode::train);
  const Tensor x = random_tensor({5, 3}, 8);
  const Tensor t = random_tensor({5, 2}, 9);
  const Tensor y = m.forward(x);
  const Tensor r = sub(y, t);
  m.zero_grad();
  m.backward(r);
  const Tensor& w = m.parameter("fit.weight").value;
  const Tensor& b = m.parameter("fit.bias").value;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      real expect = b(j);
      for (std::size_t k = 0; k < 3; ++k) expect += x(i, k) * w(k, j);
      EXPECT_NEAR(y(i, j), expect, 1e-12);
    }
  const Tensor& dw = m.parameter("fit.weight").grad;
  const Tensor& db = m.parameter("fit.bias").grad;
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t j = 0; j < 2; ++j) {
      real expect = 0;
      for (std::size_t i = 0; i < 5; ++i) expect += x(i, k) * r(i, j);
      EXPECT_NEAR(dw(k, j), expect, 1e-12);
    }
  for (std::size_t j = 0; j < 2; ++j) {
    real expect = 0;
    for (std::size_t i = 0; i < 5; ++i) expect += r(i, j);
    EXPECT_NEAR(db(j), expect, 1e-12);
  }
}

TEST(Backward, SkipConnectionMatchesFiniteDifferences) {
  Model m = skip_model(11);
  m.set_mode(Mode::train);
  const Tensor x = random_tensor({3, 4}, 12);
  const Tensor up = random_tensor({3, 2}, 13);
  m.forward(x);
  m.zero_grad();
  const Tensor dx = m.backward(up)[0];
  const real h = 1e-5;
  auto loss = [&](const Tensor& in) { return weighted_sum(m.forward(in), up); };
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor xp = x, xm = x;
    xp.data()[i] += h;
    xm.data()[i] -= h;
    const real numeric = (loss(xp) - loss(xm)) / (2 * h);
    EXPECT_LE(tsdl::testing::rel_error(dx.data()[i], numeric), 1e-4);
  }
  for (ParamRef& ref : m.parameters()) {
    const Tensor analytic = ref.param->grad;
    for (std::size_t i = 0; i < ref.param->value.size(); ++i) {
      real& v = ref.param->value.data()[i];
      const real keep = v;
      v = keep + h;
      const real lp = loss(x);
      v = keep - h;
      const real lm = loss(x);
      v = keep;
      EXPECT_LE(tsdl::testing::rel_error(analytic.data()[i], (lp - lm) / (2 * h)), 1e-4) << ref.name;
    }
  }
}

TEST(Backward, FanOutSumsGradients) {
  // y = x + x through an identity pair: dL/dx = 2 * upstream.
  GraphSpec g;
  g.input("x", {3});
  g.node<Add>("double", {"x", "x"});
  Model m = build(std::move(g));
  m.set_mode(Mode::train);
  m.forward(random_tensor({2, 3}, 1));
  const Tensor up = random_tensor({2, 3}, 2);
  const Tensor dx = m.backward(up)[0];
  for (std::size_t i = 0; i < up.size(); ++i) EXPECT_EQ(dx.data()[i], 2 * up.data()[i]);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  Model m = skip_model(3);
  m.set_mode(Mode::train);
  m.forward(random_tensor({2, 4}, 4));
  m.zero_grad();
  const Tensor dx = m.backward(Tensor({2, 2}))[0];
  for (real v : dx.data()) EXPECT_EQ(v, 0);
  for (const auto& [name, grad] : m.gradients())
    for (real v : grad.data()) EXPECT_EQ(v, 0) << name;
}

TEST(Backward, GradientsAccumulateUntilZeroed) {
  Model m = skip_model(5);
  m.set_mode(Mode::train);
  const Tensor x = random_tensor({2, 4}, 6);
  const Tensor up = random_tensor({2, 2}, 7);
  m.zero_grad();
  m.forward(x);
  m.backward(up);
  const Tensor once = m.parameter("out.weight").grad;
  m.forward(x);
  m.backward(up);
  EXPECT_LE(max_abs_diff(m.parameter("out.weight").grad, scale(once, 2)), 1e-12);
  m.zero_grad();
  for (real v : m.parameter("out.weight").grad.data()) EXPECT_EQ(v, 0);
}

TEST(Freeze, FrozenNodeRunsInEvalAndFlagsParameters) {
  GraphSpec g;
  g.input("x", {5, 2});
  g.then<BatchNorm1d>("bn");
  g.then<Flatten>("flat");
  g.then<Dense>("head", 1);
  Model m = build(std::move(g), 1);
  m.freeze("bn");
  for (ParamRef& ref : m.parameters()) EXPECT_EQ(ref.param->frozen, ref.name.rfind("bn.", 0) == 0) << ref.name;
  m.set_mode(Mode::train);
  const Tensor before = *m.buffers()[0].buffer;
  m.forward(random_tensor({4, 5, 2}, 2));
  EXPECT_EQ(*m.buffers()[0].buffer, before);
  const auto info = m.node_info();
  EXPECT_TRUE(info[0].frozen);
  m.freeze("bn", false);
  EXPECT_FALSE(m.parameter("bn.gain").frozen);
  EXPECT_THROW(m.freeze("missing"), GraphError);
}

TEST(Inspect, NamesCountsAndFamilies) {
  GraphSpec g;
  g.input("x", {8, 1});
  g.then<Conv1d>("c1", Conv1dOptions{4, 3});
  g.then<Pool1d>("p1", Pool1dOptions{});
  g.then<Lstm>("rnn", RecurrentOptions{5, false});
  g.then<Dense>("d", 2);
  Model m = build(std::move(g));
  const auto fam = m.family_counts();
  EXPECT_EQ(fam.at("conv1d"), 1u);
  EXPECT_EQ(fam.at("pooling"), 1u);
  EXPECT_EQ(fam.at("lstm"), 1u);
  EXPECT_EQ(fam.count("dense"), 0u);
  // conv 1*3*4 + 4, lstm 4*5*(4+5) + 4*5, dense 5*2 + 2
  EXPECT_EQ(m.parameter_count(), 16u + 200u + 12u);
  EXPECT_TRUE(m.has_node("rnn"));
  EXPECT_FALSE(m.has_node("x"));
  EXPECT_THROW(m.parameter("d.nothing"), ParameterError);
}
