#pragma once

// Point-blend renderer: fixed-radius isotropic discs composited front to back,
// with analytic gradients of the color loss and the uncertainty-weighted depth
// loss.

#include <span>
#include <vector>

#include "vtfuse/camera.hpp"
#include "vtfuse/fuse.hpp"
#include "vtfuse/image.hpp"

namespace vtf {

/// Upper clamp on per-splat opacity so transmittance stays invertible.
inline constexpr double kMaxAlpha = 1.0 - 1e-6;

struct Splat {
  Vec3 position = Vec3::Zero();
  Vec3 color = Vec3::Zero();
  double opacity_logit = 0.0;
  double radius = 0.05;

  double alpha() const;
};

struct SplatCloud {
  std::vector<Splat> splats;
  Vec3 background = Vec3::Zero();
};

struct LossConfig {
  double lambda = 1.0;  // depth loss weight
  double w = 1.0;       // uncertainty sharpness
  double beta = 1.0;    // per-iteration decay of lambda
  double alpha0 = 1.0;  // weight normalizer

  void validate() const;
};

struct CompositeSample {
  double alpha;
  Vec3 color;
  double depth;
};

struct CompositeResult {
  Vec3 color = Vec3::Zero();  // before background
  double depth = 0.0;
  double transmittance = 1.0;
};

/// Front-to-back blend of samples ordered by nondecreasing depth.
CompositeResult composite_ray(std::span<const CompositeSample> samples);

/// Per-pixel splat lists in compositing order (nearest first, ties by index).
struct Rasterization {
  int width = 0;
  int height = 0;
  std::vector<std::vector<int>> pixel_splats;
  std::vector<double> splat_depth;  // camera-frame z per splat (0 if culled)
};

Rasterization rasterize(const SplatCloud& cloud, const CameraModel& camera);

struct RenderResult {
  ImageRgb color;
  ImageD depth;
};

RenderResult render(const SplatCloud& cloud, const CameraModel& camera);
RenderResult render(const SplatCloud& cloud, const Rasterization& raster);

/// Sum over pixels of squared RGB error.
double color_loss(const ImageRgb& rendered, const ImageRgb& gt);

/// Weight alpha0 * exp(-w * sqrt(variance)) for one supervised pixel.
double depth_weight(double variance, const LossConfig& cfg);

/// Sum over supervised pixels of depth_weight * (rendered - fused)^2.
double depth_loss(const ImageD& rendered, const FusedSupervision& fused, const LossConfig& cfg);

/// beta * lambda.
double decay_weight(double lambda, double beta);

/// Every GPIS hit pixel lifted to the world frame, all views concatenated.
std::vector<Vec3> backproject_init(std::span<const DepthVarImage> images);

/// Opaque-ish splats at the given positions.
SplatCloud cloud_from_points(std::span<const Vec3> points, double radius, const Vec3& color, double alpha,
                             const Vec3& background);

struct TrainingView {
  ImageRgb rgb;
  FusedSupervision supervision;
  CameraModel camera;
};

/// Parameter layout: per splat [px py pz r g b logit].
inline constexpr int kParamsPerSplat = 7;

struct LossGradient {
  double color_loss = 0.0;
  double depth_loss = 0.0;  // unweighted by lambda
  double total = 0.0;       // color + lambda * depth
  std::vector<double> grad;  // d total / d params
  std::vector<double> coverage;  // pixels touched per splat, summed over views
};

/// Total loss and analytic gradient. With lambda == 0 the supervision images
/// are never read.
LossGradient loss_and_gradient(const SplatCloud& cloud, std::span<const TrainingView> views, const LossConfig& cfg,
                               double lambda);

std::vector<double> pack_params(const SplatCloud& cloud);
void unpack_params(std::span<const double> params, SplatCloud& cloud);

struct OptimizerConfig {
  double step = 1e-2;
  double position_scale = 1.0;
  double color_scale = 1.0;
  double opacity_scale = 1.0;
};

struct TrainingLogRow {
  int iter;
  double color_loss;
  double depth_loss;
  double lambda;
};

struct TrainingResult {
  SplatCloud cloud;
  std::vector<TrainingLogRow> log;
};

/// Full-batch gradient descent on positions, colors and opacity logits. Each
/// group's step is scaled by its group factor and divided by the splat's pixel
/// coverage. lambda decays by beta after every iteration.
TrainingResult optimize(const SplatCloud& cloud, std::span<const TrainingView> views, const LossConfig& cfg, int iters,
                        const OptimizerConfig& opt = {});

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::vector<double> analytic;
  std::vector<double> numeric;
};

/// Central finite differences over every parameter against the analytic
/// gradient. Relative error uses max(|a|, |n|, 1e-8) as the denominator.
GradCheckResult grad_check(const SplatCloud& cloud, const TrainingView& view, const LossConfig& cfg, double h = 1e-5);

/// Per-pixel total loss terms (color + lambda * depth) for one view; summing
/// the per-pixel differences keeps finite differences clear of cancellation.
std::vector<double> pixel_losses(const SplatCloud& cloud, const TrainingView& view, const LossConfig& cfg,
                                 double lambda);

}  // namespace vtf
