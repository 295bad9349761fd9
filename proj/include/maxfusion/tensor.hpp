#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace maxfusion {

/// Raised for anything the caller can fix: bad shapes, malformed files,
/// invalid configuration. The CLI maps it to exit status 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Index = Eigen::Index;

/// H x W field of doubles, row-major. Used for statistics maps and simulator state.
using Field = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::string shape_string(Index c, Index h, Index w) {
  return "(" + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + ")";
}

/// C x H x W feature tensor. Stored as a C x (H*W) row-major matrix so that
/// the flat layout is (c, j, k) and each column is one location's channel vector.
template <typename Scalar_>
class FeatureMap {
 public:
  using Scalar = Scalar_;
  using Storage = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  FeatureMap(Index channels, Index height, Index width, std::span<const Scalar> data)
      : height_(height), width_(width) {
    check_dims(channels, height, width);
    if (static_cast<Index>(data.size()) != channels * height * width) {
      throw InputError("feature map " + shape_string(channels, height, width) + " expects " +
                       std::to_string(channels * height * width) + " values, got " +
                       std::to_string(data.size()));
    }
    data_ = Eigen::Map<const Storage>(data.data(), channels, height * width);
    check_finite();
  }

  /// Takes ownership of a C x (H*W) matrix.
  FeatureMap(Index height, Index width, Storage storage)
      : height_(height), width_(width), data_(std::move(storage)) {
    check_dims(data_.rows(), height, width);
    if (data_.cols() != height * width) {
      throw InputError("storage has " + std::to_string(data_.cols()) + " columns, expected " +
                       std::to_string(height * width));
    }
    check_finite();
  }

  static FeatureMap zeros(Index channels, Index height, Index width) {
    return FeatureMap(height, width, Storage::Zero(channels, height * width));
  }

  Index channels() const { return data_.rows(); }
  Index height() const { return height_; }
  Index width() const { return width_; }
  Index locations() const { return height_ * width_; }
  Index size() const { return data_.size(); }

  Scalar operator()(Index c, Index j, Index k) const { return data_(c, j * width_ + k); }

  /// Channel vector at flat location p = j * W + k.
  auto location(Index p) const { return data_.col(p); }
  auto location(Index j, Index k) const { return data_.col(j * width_ + k); }

  const Storage& matrix() const { return data_; }
  std::span<const Scalar> flat() const { return {data_.data(), static_cast<std::size_t>(data_.size())}; }

  std::string shape() const { return shape_string(channels(), height_, width_); }

  template <typename Other>
  bool same_shape(const FeatureMap<Other>& o) const {
    return channels() == o.channels() && height_ == o.height() && width_ == o.width();
  }

  friend bool operator==(const FeatureMap& a, const FeatureMap& b) {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  static void check_dims(Index c, Index h, Index w) {
    if (c < 1 || h < 1 || w < 1) {
      throw InputError("feature map dimensions must be positive, got " + shape_string(c, h, w));
    }
  }

  void check_finite() const {
    const Scalar* p = data_.data();
    for (Index i = 0; i < data_.size(); ++i) {
      if (!std::isfinite(p[i])) throw InputError("non-finite at index " + std::to_string(i));
    }
  }

  Index height_;
  Index width_;
  Storage data_;
};

using FeatureMapf = FeatureMap<float>;
using FeatureMapd = FeatureMap<double>;

template <typename Scalar>
FeatureMap<Scalar> make_feature_map(Index channels, Index height, Index width,
                                    std::span<const Scalar> data) {
  return FeatureMap<Scalar>(channels, height, width, data);
}

template <typename Scalar>
FeatureMap<Scalar> make_feature_map(Index channels, Index height, Index width,
                                    std::initializer_list<Scalar> data) {
  return FeatureMap<Scalar>(channels, height, width, std::span<const Scalar>(data.begin(), data.size()));
}

/// Immutable H x W map of finite doubles (sigma, normalized sigma, correlation).
class SpatialMap {
 public:
  explicit SpatialMap(Field values) : values_(std::move(values)) {
    if (values_.rows() < 1 || values_.cols() < 1) throw InputError("spatial map must be non-empty");
    for (Index i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_.data()[i])) {
        throw InputError("non-finite at index " + std::to_string(i));
      }
    }
  }

  Index height() const { return values_.rows(); }
  Index width() const { return values_.cols(); }
  double operator()(Index j, Index k) const { return values_(j, k); }
  /// Flat row-major access.
  double operator[](Index p) const { return values_.data()[p]; }
  const Field& array() const { return values_; }

  friend bool operator==(const SpatialMap& a, const SpatialMap& b) {
    return a.height() == b.height() && a.width() == b.width() && (a.values_ == b.values_).all();
  }

 private:
  Field values_;
};

/// Per-location fusion decision: averaged, or the index of the winning branch.
class SelectionMask {
 public:
  using Tags = Eigen::Array<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  static constexpr std::int32_t kAveraged = -1;

  SelectionMask(Tags tags, int branches) : tags_(std::move(tags)), branches_(branches) {
    for (Index i = 0; i < tags_.size(); ++i) {
      const auto t = tags_.data()[i];
      if (t < kAveraged || t >= branches_) {
        throw InputError("selection tag " + std::to_string(t) + " out of range for " +
                         std::to_string(branches_) + " branches");
      }
    }
  }

  Index height() const { return tags_.rows(); }
  Index width() const { return tags_.cols(); }
  int branches() const { return branches_; }
  std::int32_t tag(Index p) const { return tags_.data()[p]; }
  bool averaged(Index p) const { return tag(p) == kAveraged; }
  std::optional<int> winner(Index p) const {
    return averaged(p) ? std::nullopt : std::optional<int>(tag(p));
  }
  const Tags& tags() const { return tags_; }

  Index count_averaged() const { return (tags_ == kAveraged).count(); }
  Index count_winner(int b) const { return (tags_ == b).count(); }
  double averaged_fraction() const {
    return static_cast<double>(count_averaged()) / static_cast<double>(tags_.size());
  }

  friend bool operator==(const SelectionMask& a, const SelectionMask& b) {
    return a.branches_ == b.branches_ && a.height() == b.height() && a.width() == b.width() &&
           (a.tags_ == b.tags_).all();
  }

 private:
  Tags tags_;
  int branches_;
};

}  // namespace maxfusion
