#include "maxfusion/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace maxfusion {
namespace {

void put_u32(std::vector<char>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::size_t read_up_to(std::istream& in, char* dst, std::size_t n) {
  in.read(dst, static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(in.gcount());
}

}  // namespace

std::size_t write_tensor(const FeatureMapf& map, std::ostream& out) {
  std::vector<char> buf;
  buf.reserve(kMxftHeaderBytes + 4 * static_cast<std::size_t>(map.size()));
  buf.insert(buf.end(), {'M', 'X', 'F', 'T'});
  put_u32(buf, kMxftVersion);
  put_u32(buf, kMxftDtypeF32);
  put_u32(buf, 3);
  put_u32(buf, static_cast<std::uint32_t>(map.channels()));
  put_u32(buf, static_cast<std::uint32_t>(map.height()));
  put_u32(buf, static_cast<std::uint32_t>(map.width()));
  for (float v : map.flat()) put_u32(buf, std::bit_cast<std::uint32_t>(v));

  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw InputError("tensor write failed");
  return buf.size();
}

FeatureMapf read_tensor(std::istream& in) {
  std::array<unsigned char, kMxftHeaderBytes> header{};
  const std::size_t got = read_up_to(in, reinterpret_cast<char*>(header.data()), header.size());
  if (got < 4 || !std::equal(header.begin(), header.begin() + 4, "MXFT")) {
    throw InputError("not an MXFT file");
  }
  if (got < kMxftHeaderBytes) {
    throw InputError("truncated header: expected " + std::to_string(kMxftHeaderBytes) +
                     " bytes, got " + std::to_string(got));
  }
  const auto version = get_u32(&header[4]);
  if (version > kMxftVersion || version == 0) {
    throw InputError("unsupported version " + std::to_string(version));
  }
  const auto dtype = get_u32(&header[8]);
  if (dtype != kMxftDtypeF32) throw InputError("unsupported dtype " + std::to_string(dtype));
  const auto ndim = get_u32(&header[12]);
  if (ndim != 3) throw InputError("unsupported ndim " + std::to_string(ndim));

  const Index c = get_u32(&header[16]);
  const Index h = get_u32(&header[20]);
  const Index w = get_u32(&header[24]);
  if (c < 1 || h < 1 || w < 1) throw InputError("invalid dimensions " + shape_string(c, h, w));

  const auto count = static_cast<std::size_t>(c * h * w);
  std::vector<unsigned char> payload(4 * count);
  const std::size_t n = read_up_to(in, reinterpret_cast<char*>(payload.data()), payload.size());
  if (n != payload.size()) {
    throw InputError("truncated payload: expected " + std::to_string(payload.size()) +
                     " bytes, got " + std::to_string(n));
  }
  std::vector<float> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    values[i] = std::bit_cast<float>(get_u32(&payload[4 * i]));
  }
  return FeatureMapf(c, h, w, values);
}

void write_tensor_file(const FeatureMapf& map, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  write_tensor(map, out);
}

FeatureMapf read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return read_tensor(in);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

FeatureMapf to_feature_map(const Field& field) {
  FeatureMapf::Storage s = field.cast<float>().matrix().reshaped<Eigen::RowMajor>().transpose();
  return FeatureMapf(field.rows(), field.cols(), std::move(s));
}

FeatureMapf to_feature_map(const SpatialMap& map) { return to_feature_map(map.array()); }

FeatureMapf to_feature_map(const SelectionMask& mask) {
  return to_feature_map(Field(mask.tags().cast<double>()));
}

void write_pgm(std::ostream& out, Index height, Index width, const std::vector<std::uint8_t>& pixels) {
  if (static_cast<Index>(pixels.size()) != height * width) {
    throw InputError("pgm pixel count mismatch");
  }
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!out) throw InputError("pgm write failed");
}

void write_pgm_file(const std::filesystem::path& path, Index height, Index width,
                    const std::vector<std::uint8_t>& pixels) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  write_pgm(out, height, width, pixels);
}

std::vector<std::uint8_t> to_gray(const Field& field) {
  std::vector<std::uint8_t> px(static_cast<std::size_t>(field.size()), 0);
  const double lo = field.minCoeff();
  const double hi = field.maxCoeff();
  if (!(hi > lo)) return px;
  for (Index i = 0; i < field.size(); ++i) {
    const double v = 255.0 * (field.data()[i] - lo) / (hi - lo);
    px[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
  return px;
}

std::vector<std::uint8_t> to_gray(const SelectionMask& mask) {
  std::vector<std::uint8_t> px(static_cast<std::size_t>(mask.tags().size()));
  for (Index i = 0; i < mask.tags().size(); ++i) {
    const auto t = mask.tag(i);
    px[static_cast<std::size_t>(i)] =
        t == SelectionMask::kAveraged ? 0 : static_cast<std::uint8_t>(std::min(64 + 64 * t, 255));
  }
  return px;
}

void write_pgm_file(const std::filesystem::path& path, const Field& field) {
  write_pgm_file(path, field.rows(), field.cols(), to_gray(field));
}

void write_pgm_file(const std::filesystem::path& path, const SelectionMask& mask) {
  write_pgm_file(path, mask.height(), mask.width(), to_gray(mask));
}

}  // namespace maxfusion
