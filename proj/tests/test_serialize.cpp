#include <gtest/gtest.h>

#include <cstring>
#include <sstream>

#include "support/gradcheck.hpp"
#include "tsdl/error.hpp"
#include "tsdl/layers.hpp"
#include "tsdl/serialize.hpp"

using namespace tsdl;
using tsdl::testing::random_tensor;

namespace {

Model small_model(std::uint64_t seed, std::size_t hidden = 4) {
  GraphSpec g;
  g.input("x", {6, 2});
  g.then<Conv1d>("conv", Conv1dOptions{hidden, 3});
  g.then<BatchNorm1d>("bn");
  g.then<Flatten>("flat");
  g.then<Dense>("out", 3);
  return build(std::move(g), seed);
}

std::string saved(Model& m) {
  std::ostringstream out;
  save_weights(m, out);
  return out.str();
}

void load_from(Model& m, const std::string& bytes) {
  std::istringstream in(bytes);
  load_weights(m, in);
}

std::uint32_t read_u32(const std::string& s, std::size_t at) {
  std::uint32_t v;
  std::memcpy(&v, s.data() + at, 4);
  return v;
}

}  // namespace

TEST(Container, LayoutIsMagicCountEntriesCrc) {
  const Tensor t = make({2}, std::vector<real>{1.5, -2});
  std::ostringstream out;
  write_tensors(out, weights_magic, {{"ab", t}});
  const std::string s = out.str();
  // magic 7 + count 4 + name len 2 + "ab" + rank 1 + extent 4 + 2 floats + crc 4
  ASSERT_EQ(s.size(), 7u + 4 + 2 + 2 + 1 + 4 + 8 + 4);
  EXPECT_EQ(s.substr(0, 7), std::string("TSDLW1\0", 7));
  EXPECT_EQ(read_u32(s, 7), 1u);
  EXPECT_EQ(s.substr(13, 2), "ab");
  float first;
  std::memcpy(&first, s.data() + 20, 4);
  EXPECT_EQ(first, 1.5f);
}

TEST(Container, RoundTripPreservesNamesShapesValues) {
  std::vector<NamedTensor> in{{"a", make({2, 3}, std::vector<real>{1, 2, 3, 4, 5, 6})}, {"b.c", make({1}, real(-0.25))}};
  std::stringstream io;
  write_tensors(io, dataset_magic, in);
  const auto out = read_tensors(io, dataset_magic);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].name, "a");
  EXPECT_EQ(out[0].value, in[0].value);
  EXPECT_EQ(out[1].name, "b.c");
  EXPECT_EQ(out[1].value, in[1].value);
}

TEST(Container, WrongMagicRejected) {
  std::stringstream io;
  write_tensors(io, dataset_magic, {{"a", make({1}, real(1))}});
  EXPECT_THROW(read_tensors(io, weights_magic), FormatError);
}

TEST(Container, FlippedByteFailsCrc) {
  std::ostringstream out;
  write_tensors(out, weights_magic, {{"a", make({4}, real(3))}});
  std::string s = out.str();
  s[s.size() - 6] ^= 0x01;
  std::istringstream in(s);
  try {
    read_tensors(in, weights_magic);
    FAIL() << "corruption not detected";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("CRC"), std::string::npos);
  }
}

TEST(Container, TruncationRejected) {
  std::ostringstream out;
  write_tensors(out, weights_magic, {{"a", make({4}, real(3))}});
  const std::string s = out.str();
  for (std::size_t cut : {std::size_t{3}, std::size_t{12}, s.size() - 1}) {
    std::istringstream in(s.substr(0, cut));
    EXPECT_THROW(read_tensors(in, weights_magic), FormatError) << cut;
  }
}

TEST(Weights, ManifestListsParametersThenBuffers) {
  Model m = small_model(1);
  const auto manifest = weights_manifest(m);
  std::vector<std::string> names;
  for (const auto& e : manifest) names.push_back(e.name);
  const std::vector<std::string> expected{"conv.weight",     "conv.bias",      "bn.gain",    "bn.shift",
                                          "out.weight",      "out.bias",       "bn.running_mean", "bn.running_var"};
  EXPECT_EQ(names, expected);
}

TEST(Weights, LoadIntoCloneIsBitIdentical) {
  Model a = small_model(1);
  Model b = small_model(2);
  const Tensor x = random_tensor({3, 6, 2}, 3);
  ASSERT_NE(a.forward(x), b.forward(x));
  load_from(b, saved(a));
  EXPECT_EQ(a.forward(x), b.forward(x));
}

TEST(Weights, MissingEntryNamed) {
  Model a = small_model(1);
  std::vector<NamedTensor> entries = weights_manifest(a);
  entries.erase(entries.begin());
  std::ostringstream out;
  write_tensors(out, weights_magic, entries);
  try {
    load_from(a, out.str());
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("conv.weight"), std::string::npos);
  }
}

TEST(Weights, ShapeMismatchNamedAndModelUntouched) {
  Model a = small_model(1, 4);
  Model b = small_model(2, 5);
  const Tensor before = b.parameter("out.weight").value;
  try {
    load_from(b, saved(a));
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("shape mismatch"), std::string::npos);
  }
  EXPECT_EQ(b.parameter("out.weight").value, before);
}

TEST(Weights, UnexpectedEntryRejected) {
  Model a = small_model(1);
  std::vector<NamedTensor> entries = weights_manifest(a);
  entries.push_back({"stray", make({1}, real(0))});
  std::ostringstream out;
  write_tensors(out, weights_magic, entries);
  EXPECT_THROW(load_from(a, out.str()), FormatError);
}

TEST(Weights, CorruptFileRejected) {
  Model a = small_model(1);
  std::string s = saved(a);
  s[20] ^= 0x40;
  EXPECT_THROW(load_from(a, s), FormatError);
}
