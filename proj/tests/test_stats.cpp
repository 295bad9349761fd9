#include <doctest.h>

#include <random>

#include "maxfusion/stats.hpp"
#include "support/generators.hpp"
#include "support/scalar_oracle.hpp"

using namespace maxfusion;

TEST_CASE("channel_std_map: analytic cases") {
  // location 0: channels (1, 3); location 1: (5, 5)
  auto f = make_feature_map<float>(2, 1, 2, {1.0f, 5.0f, 3.0f, 5.0f});
  const auto s = channel_std_map(f);
  CHECK(s(0, 0) == doctest::Approx(1.0));
  CHECK(s(0, 1) == 0.0);

  auto flat = make_feature_map<float>(4, 1, 1, {5.0f, 5.0f, 5.0f, 5.0f});
  CHECK(channel_std_map(flat)(0, 0) == 0.0);

  // C = 1 is always zero spread.
  CHECK(channel_std_map(make_feature_map<float>(1, 1, 2, {3.0f, -7.0f})).array().isZero());
}

TEST_CASE("channel_std_map matches per-location loop") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = testgen::random_map(rng, testgen::random_shape(rng));
    const auto got = channel_std_map(f);
    const auto want = oracle::std_map(oracle::from(f));
    for (Index p = 0; p < f.locations(); ++p) REQUIRE(std::abs(got[p] - want[static_cast<std::size_t>(p)]) <= 1e-6);
  }
}

TEST_CASE("normalized_std_map") {
  // sigma (1, 3) -> (0.25, 0.75)
  auto f = make_feature_map<float>(2, 1, 2, {1.0f, 0.0f, 3.0f, 6.0f});
  const auto n = normalized_std_map(f);
  CHECK(n(0, 0) == doctest::Approx(0.25));
  CHECK(n(0, 1) == doctest::Approx(0.75));

  const auto constant = make_feature_map<float>(3, 2, 2, std::vector<float>(12, 4.0f));
  const auto u = normalized_std_map(constant);
  CHECK((u.array() == 0.25).all());

  CHECK_THROWS_AS(normalized_std_map(f, StatsConfig{0.0}), InputError);
}

TEST_CASE("property: sigma-hat is scale invariant and sums to one") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<float> gain(0.01f, 100.0f);
  for (int trial = 0; trial < 200; ++trial) {
    const auto f = testgen::random_map(rng, testgen::random_shape(rng));
    const auto a = normalized_std_map(f);
    const auto b = normalized_std_map(testgen::scaled(f, gain(rng)));
    CHECK(a.array().sum() == doctest::Approx(1.0).epsilon(1e-5));
    CHECK((a.array() >= 0.0).all());
    REQUIRE(((a.array() - b.array()).abs() <= 1e-6).all());
  }
}

TEST_CASE("property: sigma is shift invariant") {
  std::mt19937_64 rng(13);
  std::normal_distribution<float> normal(0.0f, 2.0f);
  for (int trial = 0; trial < 100; ++trial) {
    const auto f = testgen::random_map(rng, testgen::random_shape(rng));
    FeatureMapf::Storage shifted = f.matrix();
    for (Index p = 0; p < f.locations(); ++p) shifted.col(p).array() += normal(rng);
    const auto a = channel_std_map(f);
    const auto b = channel_std_map(FeatureMapf(f.height(), f.width(), shifted));
    REQUIRE(((a.array() - b.array()).abs() <= 1e-5).all());
  }
}

TEST_CASE("correlation_map: analytic and degenerate cases") {
  auto cmap = [](std::initializer_list<float> a, std::initializer_list<float> b) {
    return correlation_map(make_feature_map<float>(2, 1, 1, a), make_feature_map<float>(2, 1, 1, b))(0, 0);
  };
  CHECK(cmap({1, 2}, {1, 2}) == 1.0);
  CHECK(cmap({1, 0}, {0, 1}) == 0.0);
  CHECK(cmap({1, 0}, {-1, 0}) == -1.0);
  CHECK(cmap({0, 0}, {3, 4}) == 0.0);

  CHECK_THROWS_WITH_AS(correlation_map(FeatureMapf::zeros(2, 1, 1), FeatureMapf::zeros(3, 1, 1)),
                       doctest::Contains("(2,1,1) vs (3,1,1)"), InputError);
}

TEST_CASE("property: correlation matches loop, stays in range, ignores per-location scale") {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<float> gain(0.05f, 20.0f);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = testgen::random_map(rng, testgen::random_shape(rng));
    const auto b = testgen::correlated_with(rng, a);
    const auto rho = correlation_map(a, b);
    const auto want = oracle::corr_map(oracle::from(a), oracle::from(b), 1e-12);
    REQUIRE((rho.array().abs() <= 1.0).all());
    for (Index p = 0; p < a.locations(); ++p) REQUIRE(std::abs(rho[p] - want[static_cast<std::size_t>(p)]) <= 1e-6);

    FeatureMapf::Storage sa = a.matrix();
    FeatureMapf::Storage sb = b.matrix();
    for (Index p = 0; p < a.locations(); ++p) {
      sa.col(p) *= gain(rng);
      sb.col(p) *= gain(rng);
    }
    const auto rho2 = correlation_map(FeatureMapf(a.height(), a.width(), sa), FeatureMapf(b.height(), b.width(), sb));
    REQUIRE(((rho.array() - rho2.array()).abs() <= 1e-5).all());
  }
}
