#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vtfuse/image.hpp"

namespace vtf {

/// Mean squared depth error over GT hit pixels (and the mask, when given).
double depth_mse(const ImageD& pred, const DepthVarImage& gt, const Mask* mask = nullptr);

/// 10 log10(1 / MSE) over all channels; +inf for identical images.
double psnr(const ImageRgb& img, const ImageRgb& gt);

/// Distance from each point of `from` to its nearest neighbor in `to`.
std::vector<double> nearest_distances(std::span<const Vec3> from, std::span<const Vec3> to);

/// Symmetric mean nearest-neighbor distance: 0.5 (mean d(a,B) + mean d(b,A)).
double chamfer(std::span<const Vec3> a, std::span<const Vec3> b);
/// max(max d(a,B), max d(b,A)).
double hausdorff(std::span<const Vec3> a, std::span<const Vec3> b);

/// Rigid transform T such that T * a best overlaps b. Starts from the
/// centroid-matching translation and runs ICP iterations, keeping the
/// transform with the lowest chamfer distance seen.
Pose align_clouds(std::span<const Vec3> a, std::span<const Vec3> b, int iters);

struct ViewMetrics {
  std::string view;
  double psnr = 0.0;
  double d_mse = 0.0;
  double d_mse_o = 0.0;
};

struct EvalReport {
  double psnr = 0.0;
  double d_mse = 0.0;
  double d_mse_o = 0.0;
  double chamfer = 0.0;
  double hausdorff = 0.0;
  std::vector<ViewMetrics> views;

  std::string to_text() const;
  std::string to_csv() const;
};

}  // namespace vtf
