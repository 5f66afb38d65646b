#pragma once

// Gaussian-process implicit surface: a GP over signed distance conditioned on
// tactile contact points, their normal-offset companions and interior anchors.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "vtfuse/types.hpp"

namespace vtf {

/// One tactile contact: surface points with outward unit normals (world frame).
struct TouchReading {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  Pose sensor_pose = Pose::Identity();
};

enum class PointClass : std::uint8_t { surface = 0, inside = 1, outside = 2, interior = 3 };

struct ConditioningSet {
  std::vector<Vec3> locations;
  std::vector<double> targets;  // signed distance, meters
  std::vector<PointClass> labels;
  double delta = 0.0;
  double epsilon = 0.0;

  size_t size() const { return locations.size(); }
  bool empty() const { return locations.empty(); }
  std::vector<Vec3> surface_points() const;
};

struct ConditioningOptions {
  double delta = 0.0;    // normal offset, meters
  double epsilon = 0.0;  // interior anchor magnitude, meters
  int n_slices = 8;
  double voxel = 0.0;  // downsampling pitch, meters; <= 0 disables

  /// delta = 0.02 r, epsilon = 0.01 r, voxel = r / 50 where r bounds all touch points.
  static ConditioningOptions defaults_for(std::span<const TouchReading> touches);
};

/// Radius of the centroid-centered sphere enclosing every touch point.
double touch_extent(std::span<const TouchReading> touches);

ConditioningSet build_conditioning_set(std::span<const TouchReading> touches, const ConditioningOptions& opt);

/// Kernel hyperparameters. nu is fixed at 3/2.
struct KernelParams {
  double rho = 1.0;         // length scale, meters
  double sigma = 1.0;       // output scale, meters
  double noise = 0.0;       // observation noise variance, meters^2
  double prior_mean = 0.0;  // constant prior mean, meters

  void validate() const;
};

/// sigma^2 (1 + sqrt(3) d / rho) exp(-sqrt(3) d / rho). Throws on negative d.
double matern32(double d, const KernelParams& params);

struct FitOptions {
  size_t max_points = 8000;
  double jitter_start = 1e-6;  // relative to sigma^2
  double jitter_limit = 1e-2;
};

struct GpPrediction {
  double mean;
  double variance;
};

/// Conditioned GP. Immutable after construction; queries are thread-safe.
class GpisModel {
 public:
  static GpisModel fit(ConditioningSet set, const KernelParams& params, const FitOptions& opt = {});

  /// Rebuilds a model from a stored factor (no refactorization).
  static GpisModel from_factor(ConditioningSet set, const KernelParams& params, double jitter,
                               Eigen::MatrixXd lower_factor);

  const ConditioningSet& conditioning() const { return set_; }
  const KernelParams& params() const { return params_; }
  /// Diagonal jitter that had to be added on top of the noise (0 if none).
  double jitter() const { return jitter_; }
  const Eigen::MatrixXd& factor() const { return factor_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }
  size_t size() const { return set_.size(); }

  double log_marginal_likelihood() const;

  /// Posterior mean only; the hot path for sphere tracing.
  double mean(const Vec3& p) const;
  /// Predictive mean and variance (latent variance floored, plus noise).
  GpPrediction predict(const Vec3& p) const;
  std::vector<GpPrediction> query(std::span<const Vec3> points) const;

 private:
  GpisModel() = default;
  void prepare_soa();
  void compute_alpha();

  ConditioningSet set_;
  KernelParams params_;
  double jitter_ = 0.0;
  Eigen::MatrixXd factor_;  // lower-triangular L with L L^T = K + (noise + jitter) I
  Eigen::VectorXd alpha_;   // (K + ...)^-1 (y - m)
  std::vector<double> xs_, ys_, zs_;
};

/// Builds K(X, X) with the process-wide SIMD kernel.
Eigen::MatrixXd kernel_matrix(std::span<const Vec3> points, const KernelParams& params);

/// Grid search over (rho, sigma) by log marginal likelihood. Noise and prior
/// mean are taken from `base`. Ties go to the smallest rho, then smallest sigma.
KernelParams optimize_hyperparameters(const ConditioningSet& set, std::span<const std::pair<double, double>> grid,
                                      const KernelParams& base, const FitOptions& opt = {});

// Binary persistence: "GPIS", u32 version, little-endian f64 payload.
void save_model(const GpisModel& model, const std::string& path);
GpisModel load_model(const std::string& path);

}  // namespace vtf
