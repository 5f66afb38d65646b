#include "vtfuse/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/SVD>

#include "vtfuse/io.hpp"
#include "vtfuse/simd/kernels.hpp"

namespace vtf {
namespace {

struct SoaCloud {
  std::vector<double> x, y, z;
  explicit SoaCloud(std::span<const Vec3> pts) : x(pts.size()), y(pts.size()), z(pts.size()) {
    for (size_t i = 0; i < pts.size(); ++i) {
      x[i] = pts[i].x();
      y[i] = pts[i].y();
      z[i] = pts[i].z();
    }
  }
  simd::PointsSoA view() const { return {x, y, z}; }
};

void require_nonempty(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw InputError("point cloud distance on an empty cloud");
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::vector<Vec3> transformed(std::span<const Vec3> pts, const Pose& t) {
  std::vector<Vec3> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(t * p);
  return out;
}

}  // namespace

double depth_mse(const ImageD& pred, const DepthVarImage& gt, const Mask* mask) {
  if (!pred.same_shape(gt.depth) || (mask != nullptr && !pred.same_shape(*mask)))
    throw InputError("depth_mse: image dimensions differ");
  double sum = 0.0;
  size_t n = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (!gt.is_hit(i) || (mask != nullptr && (*mask)[i] == 0)) continue;
    const double e = pred[i] - gt.depth[i];
    sum += e * e;
    ++n;
  }
  if (n == 0) throw InputError("depth_mse: no valid pixels");
  return sum / static_cast<double>(n);
}

double psnr(const ImageRgb& img, const ImageRgb& gt) {
  if (!img.same_shape(gt)) throw InputError("psnr: image dimensions differ");
  if (gt.size() == 0) throw InputError("psnr: empty image");
  double sum = 0.0;
  for (size_t i = 0; i < gt.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      if (!(img[i][c] >= 0.0 && img[i][c] <= 1.0 && gt[i][c] >= 0.0 && gt[i][c] <= 1.0))
        throw InputError("psnr: values must lie in [0, 1]");
      const double e = img[i][c] - gt[i][c];
      sum += e * e;
    }
  }
  const double mse = sum / (3.0 * static_cast<double>(gt.size()));
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

std::vector<double> nearest_distances(std::span<const Vec3> from, std::span<const Vec3> to) {
  require_nonempty(from, to);
  const SoaCloud soa(to);
  const auto& k = simd::kernels();
  std::vector<double> out(from.size());
  for (size_t i = 0; i < from.size(); ++i) {
    const double q[3] = {from[i].x(), from[i].y(), from[i].z()};
    out[i] = std::sqrt(k.nearest(soa.view(), q).sq_dist);
  }
  return out;
}

double chamfer(std::span<const Vec3> a, std::span<const Vec3> b) {
  return 0.5 * (mean_of(nearest_distances(a, b)) + mean_of(nearest_distances(b, a)));
}

double hausdorff(std::span<const Vec3> a, std::span<const Vec3> b) {
  double m = 0.0;
  for (double d : nearest_distances(a, b)) m = std::max(m, d);
  for (double d : nearest_distances(b, a)) m = std::max(m, d);
  return m;
}

Pose align_clouds(std::span<const Vec3> a, std::span<const Vec3> b, int iters) {
  require_nonempty(a, b);
  Vec3 ca = Vec3::Zero();
  Vec3 cb = Vec3::Zero();
  for (const auto& p : a) ca += p;
  for (const auto& p : b) cb += p;
  ca /= static_cast<double>(a.size());
  cb /= static_cast<double>(b.size());

  Pose current = Pose::Identity();
  current.translation() = cb - ca;
  Pose best = current;
  double best_cd = chamfer(transformed(a, current), b);

  const SoaCloud target(b);
  const auto& k = simd::kernels();
  for (int it = 0; it < iters; ++it) {
    const std::vector<Vec3> moved = transformed(a, current);
    // Correspondences in both directions keep the update aligned with the
    // symmetric chamfer objective.
    std::vector<Vec3> src;
    std::vector<Vec3> dst;
    src.reserve(a.size() + b.size());
    dst.reserve(a.size() + b.size());
    for (size_t i = 0; i < moved.size(); ++i) {
      const double q[3] = {moved[i].x(), moved[i].y(), moved[i].z()};
      src.push_back(moved[i]);
      dst.push_back(b[k.nearest(target.view(), q).index]);
    }
    const SoaCloud source(moved);
    for (size_t j = 0; j < b.size(); ++j) {
      const double q[3] = {b[j].x(), b[j].y(), b[j].z()};
      src.push_back(moved[k.nearest(source.view(), q).index]);
      dst.push_back(b[j]);
    }

    Vec3 ms = Vec3::Zero();
    Vec3 md = Vec3::Zero();
    for (size_t i = 0; i < src.size(); ++i) {
      ms += src[i];
      md += dst[i];
    }
    ms /= static_cast<double>(src.size());
    md /= static_cast<double>(dst.size());
    Mat3 h = Mat3::Zero();
    for (size_t i = 0; i < src.size(); ++i) h += (src[i] - ms) * (dst[i] - md).transpose();
    Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 d = Mat3::Identity();
    if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
    const Mat3 r = svd.matrixV() * d * svd.matrixU().transpose();

    Pose step = Pose::Identity();
    step.linear() = r;
    step.translation() = md - r * ms;
    current = step * current;

    const double cd = chamfer(transformed(a, current), b);
    if (cd < best_cd) {
      best_cd = cd;
      best = current;
    }
  }
  return best;
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << "psnr_db = " << io::fmt_double(psnr) << "\n";
  os << "d_mse = " << io::fmt_double(d_mse) << "\n";
  os << "d_mse_o = " << io::fmt_double(d_mse_o) << "\n";
  os << "chamfer = " << io::fmt_double(chamfer) << "\n";
  os << "hausdorff = " << io::fmt_double(hausdorff) << "\n";
  for (const auto& v : views) {
    os << "[view " << v.view << "]\n";
    os << "psnr_db = " << io::fmt_double(v.psnr) << "\n";
    os << "d_mse = " << io::fmt_double(v.d_mse) << "\n";
    os << "d_mse_o = " << io::fmt_double(v.d_mse_o) << "\n";
  }
  return os.str();
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os << "view,psnr_db,d_mse,d_mse_o,chamfer,hausdorff\n";
  os << "all," << io::fmt_double(psnr) << "," << io::fmt_double(d_mse) << "," << io::fmt_double(d_mse_o) << ","
     << io::fmt_double(chamfer) << "," << io::fmt_double(hausdorff) << "\n";
  for (const auto& v : views)
    os << v.view << "," << io::fmt_double(v.psnr) << "," << io::fmt_double(v.d_mse) << "," << io::fmt_double(v.d_mse_o)
       << ",,\n";
  return os.str();
}

}  // namespace vtf
