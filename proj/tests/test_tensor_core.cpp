#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include "maxfusion/io.hpp"
#include "maxfusion/tensor.hpp"
#include "support/generators.hpp"

using namespace maxfusion;

namespace {

std::string bytes_of(const FeatureMapf& m) {
  std::ostringstream out(std::ios::binary);
  write_tensor(m, out);
  return out.str();
}

std::uint32_t u32_at(const std::string& s, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[off + static_cast<std::size_t>(i)]);
  return v;
}

}  // namespace

TEST_CASE("make_feature_map builds and validates") {
  auto m = make_feature_map<float>(1, 1, 1, {0.0f});
  CHECK(m.channels() == 1);
  CHECK(m(0, 0, 0) == 0.0f);

  std::vector<float> data{1, 2, 3, 4, 5, 6, 7, 8};
  auto m2 = make_feature_map<float>(2, 2, 2, std::span<const float>(data));
  data[0] = 99;  // copied, not aliased
  CHECK(m2(0, 0, 0) == 1.0f);
  CHECK(m2(1, 0, 1) == 6.0f);
  CHECK(m2(1, 1, 1) == 8.0f);

  CHECK_THROWS_WITH_AS(make_feature_map<float>(2, 2, 2, {1.0f, 2.0f}),
                       doctest::Contains("expects 8 values, got 2"), InputError);
  CHECK_THROWS_WITH_AS(make_feature_map<float>(1, 1, 1, {std::numeric_limits<float>::quiet_NaN()}),
                       "non-finite at index 0", InputError);
  CHECK_THROWS_WITH_AS(make_feature_map<float>(1, 1, 2, {1.0f, std::numeric_limits<float>::infinity()}),
                       "non-finite at index 1", InputError);
  CHECK_THROWS_AS(make_feature_map<float>(0, 1, 1, {}), InputError);
}

TEST_CASE("MXFT header layout") {
  const auto one = bytes_of(make_feature_map<float>(1, 1, 1, {1.0f}));
  CHECK(one.size() == 32);
  CHECK(one.substr(0, 4) == "MXFT");
  CHECK(u32_at(one, 4) == 1);
  CHECK(u32_at(one, 8) == 0);
  CHECK(u32_at(one, 12) == 3);
  CHECK(u32_at(one, 28) == 0x3f800000u);  // 1.0f little-endian

  const auto big = bytes_of(FeatureMapf::zeros(3, 4, 5));
  CHECK(big.size() == 28 + 4 * 60);
  CHECK(u32_at(big, 16) == 3);
  CHECK(u32_at(big, 20) == 4);
  CHECK(u32_at(big, 24) == 5);
}

TEST_CASE("MXFT payload order is (c, j, k)") {
  auto m = make_feature_map<float>(2, 1, 2, {1.0f, 2.0f, 3.0f, 4.0f});
  const auto s = bytes_of(m);
  CHECK(u32_at(s, 28) == std::bit_cast<std::uint32_t>(1.0f));
  CHECK(u32_at(s, 32) == std::bit_cast<std::uint32_t>(2.0f));
  CHECK(u32_at(s, 40) == std::bit_cast<std::uint32_t>(4.0f));
}

TEST_CASE("read_tensor rejects malformed input") {
  std::istringstream bad_magic(std::string("XXXX") + std::string(28, '\0'));
  CHECK_THROWS_WITH_AS(read_tensor(bad_magic), "not an MXFT file", InputError);

  auto s = bytes_of(FeatureMapf::zeros(2, 2, 2));
  std::string v2 = s;
  v2[4] = 2;
  std::istringstream future(v2);
  CHECK_THROWS_WITH_AS(read_tensor(future), doctest::Contains("unsupported version"), InputError);

  std::istringstream truncated(s.substr(0, s.size() - 4));  // 7 floats of 8
  CHECK_THROWS_WITH_AS(read_tensor(truncated), "truncated payload: expected 32 bytes, got 28", InputError);

  std::string nan = s;
  const auto bits = std::bit_cast<std::uint32_t>(std::numeric_limits<float>::quiet_NaN());
  for (int i = 0; i < 4; ++i) nan[28 + 8 + static_cast<std::size_t>(i)] = static_cast<char>((bits >> (8 * i)) & 0xff);
  std::istringstream nan_in(nan);
  CHECK_THROWS_WITH_AS(read_tensor(nan_in), "non-finite at index 2", InputError);

  std::istringstream short_header(s.substr(0, 10));
  CHECK_THROWS_AS(read_tensor(short_header), InputError);
}

TEST_CASE("read_tensor_file names the missing path") {
  CHECK_THROWS_WITH_AS(read_tensor_file("/nonexistent/dir/x.mxft"), doctest::Contains("/nonexistent/dir/x.mxft"),
                       InputError);
}

TEST_CASE("property: round-trip is exact and serialization deterministic") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = testgen::random_map(rng, testgen::random_shape(rng));
    const auto bytes = bytes_of(m);
    CHECK(bytes == bytes_of(m));
    std::istringstream in(bytes);
    const auto back = read_tensor(in);
    REQUIRE(back == m);
  }
}

TEST_CASE("spatial and selection maps export as single-channel tensors") {
  Field f(2, 3);
  f << 0, 1, 2, 3, 4, 5;
  const auto t = to_feature_map(SpatialMap(f));
  CHECK(t.channels() == 1);
  CHECK(t.height() == 2);
  CHECK(t.width() == 3);
  CHECK(t(0, 1, 2) == 5.0f);

  SelectionMask::Tags tags(1, 3);
  tags << -1, 0, 1;
  const SelectionMask mask(tags, 2);
  const auto st = to_feature_map(mask);
  CHECK(st(0, 0, 0) == -1.0f);
  CHECK(st(0, 0, 2) == 1.0f);
  CHECK(to_gray(mask) == std::vector<std::uint8_t>{0, 64, 128});

  CHECK_THROWS_AS(SelectionMask(tags, 1), InputError);
}

TEST_CASE("pgm writer") {
  Field f(1, 3);
  f << -1.0, 0.0, 1.0;
  CHECK(to_gray(f) == std::vector<std::uint8_t>{0, 128, 255});
  CHECK(to_gray(Field(Field::Constant(2, 2, 3.0))) == std::vector<std::uint8_t>(4, 0));

  std::ostringstream out;
  write_pgm(out, 1, 3, to_gray(f));
  CHECK(out.str() == std::string("P5\n3 1\n255\n") + std::string("\x00\x80\xff", 3));
}
