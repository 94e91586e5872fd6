#include <gtest/gtest.h>

#include "support/gradient_suite.hpp"

using namespace tsdl;
using namespace tsdl::testing;

namespace {

class LayerGradient : public ::testing::TestWithParam<std::size_t> {};

TEST_P(LayerGradient, MatchesCentralDifferences) {
  const GradFamily family = gradient_families().at(GetParam());
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const GradCheck r = run_family(family, seed);
    EXPECT_GT(r.checked, 0u);
    EXPECT_LE(r.max_rel_error, 1e-4) << family.name << " seed " << seed << " worst at " << r.worst;
  }
}

std::string family_name(const ::testing::TestParamInfo<std::size_t>& info) {
  return gradient_families().at(info.param).name;
}

INSTANTIATE_TEST_SUITE_P(AllFamilies, LayerGradient,
                         ::testing::Range<std::size_t>(0, gradient_families().size()), family_name);

}  // namespace
