#pragma once

#include <cstdint>
#include <vector>

#include "vtfuse/camera.hpp"
#include "vtfuse/types.hpp"

namespace vtf {

/// Variance written at pixels where a depth source has no measurement.
inline constexpr double kMissVariance = 1e10;

/// Row-major raster, (x, y) = (column, row), origin top-left.
template <class T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, const T& fill = T{})
      : width_(width), height_(height), data_(static_cast<size_t>(width) * height, fill) {
    if (width < 0 || height < 0) throw InputError("image dimensions must be nonnegative");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  size_t size() const { return data_.size(); }
  bool same_shape(const Image& o) const { return width_ == o.width_ && height_ == o.height_; }
  template <class U>
  bool same_shape(const Image<U>& o) const { return width_ == o.width() && height_ == o.height(); }

  T& operator()(int x, int y) { return data_[static_cast<size_t>(y) * width_ + x]; }
  const T& operator()(int x, int y) const { return data_[static_cast<size_t>(y) * width_ + x]; }
  T& operator[](size_t i) { return data_[i]; }
  const T& operator[](size_t i) const { return data_[i]; }

  std::vector<T>& pixels() { return data_; }
  const std::vector<T>& pixels() const { return data_; }

  bool operator==(const Image&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using ImageD = Image<double>;
using ImageRgb = Image<Vec3>;
using Mask = Image<std::uint8_t>;

/// Paired z-depth / variance raster. depth == 0 marks a miss and always
/// carries kMissVariance.
struct DepthVarImage {
  ImageD depth;
  ImageD variance;
  CameraModel camera;

  DepthVarImage() = default;
  explicit DepthVarImage(const CameraModel& cam)
      : depth(cam.width, cam.height, 0.0), variance(cam.width, cam.height, kMissVariance), camera(cam) {}

  int width() const { return depth.width(); }
  int height() const { return depth.height(); }
  bool is_hit(size_t i) const { return depth[i] > 0.0; }
  size_t hit_count() const {
    size_t n = 0;
    for (size_t i = 0; i < depth.size(); ++i) n += is_hit(i) ? 1 : 0;
    return n;
  }
  void set_miss(size_t i) {
    depth[i] = 0.0;
    variance[i] = kMissVariance;
  }
};

}  // namespace vtf
