#include <cmath>
#include <limits>

#include "vtfuse/simd/kernels.hpp"

namespace vtf::simd {
namespace {

double matern_weighted_sum(const PointsSoA& pts, std::span<const double> w, const double q[3], MaternCoeffs c) {
  double acc = 0.0;
  for (size_t i = 0; i < pts.size(); ++i) {
    const double dx = q[0] - pts.x[i];
    const double dy = q[1] - pts.y[i];
    const double dz = q[2] - pts.z[i];
    const double ar = c.a * std::sqrt(dx * dx + dy * dy + dz * dz);
    acc += w[i] * (c.sigma2 * ((1.0 + ar) * std::exp(-ar)));
  }
  return acc;
}

void matern_row(const PointsSoA& pts, const double q[3], MaternCoeffs c, std::span<double> out) {
  for (size_t i = 0; i < pts.size(); ++i) {
    const double dx = q[0] - pts.x[i];
    const double dy = q[1] - pts.y[i];
    const double dz = q[2] - pts.z[i];
    const double ar = c.a * std::sqrt(dx * dx + dy * dy + dz * dz);
    out[i] = c.sigma2 * ((1.0 + ar) * std::exp(-ar));
  }
}

void fuse(std::span<const double> mu1, std::span<const double> var1, std::span<const double> mu2,
          std::span<const double> var2, std::span<double> mu, std::span<double> var) {
  for (size_t i = 0; i < mu1.size(); ++i) {
    const double p1 = 1.0 / var1[i];
    const double p2 = 1.0 / var2[i];
    const double v = 1.0 / (p1 + p2);
    var[i] = v;
    mu[i] = v * (mu1[i] / var1[i] + mu2[i] / var2[i]);
  }
}

NearestResult nearest(const PointsSoA& pts, const double q[3]) {
  NearestResult best{0, std::numeric_limits<double>::infinity()};
  for (size_t i = 0; i < pts.size(); ++i) {
    const double dx = q[0] - pts.x[i];
    const double dy = q[1] - pts.y[i];
    const double dz = q[2] - pts.z[i];
    const double d2 = dx * dx + dy * dy + dz * dz;
    if (d2 < best.sq_dist) best = {i, d2};
  }
  return best;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{matern_weighted_sum, matern_row, fuse, nearest};
  return table;
}

}  // namespace vtf::simd
