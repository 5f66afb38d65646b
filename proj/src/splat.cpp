#include "vtfuse/splat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace vtf {
namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct PixelTerms {
  Vec3 color;
  double depth;
  double transmittance;
};

PixelTerms blend(const SplatCloud& cloud, const Rasterization& r, size_t pixel) {
  PixelTerms out{Vec3::Zero(), 0.0, 1.0};
  for (int k : r.pixel_splats[pixel]) {
    const double a = cloud.splats[k].alpha();
    const double w = a * out.transmittance;
    out.color += w * cloud.splats[k].color;
    out.depth += w * r.splat_depth[k];
    out.transmittance *= 1.0 - a;
  }
  out.color += out.transmittance * cloud.background;
  return out;
}

bool supervised(const FusedSupervision& s, size_t i) { return s.provenance[i] != Provenance::none; }

void check_view(const TrainingView& v, bool need_supervision) {
  if (v.rgb.width() != v.camera.width || v.rgb.height() != v.camera.height)
    throw InputError("training view RGB size does not match its camera");
  if (need_supervision && (!v.rgb.same_shape(v.supervision.depth) || !v.rgb.same_shape(v.supervision.variance) ||
                           !v.rgb.same_shape(v.supervision.provenance)))
    throw InputError("training view supervision size does not match its RGB image");
}

}  // namespace

double Splat::alpha() const { return std::min(sigmoid(opacity_logit), kMaxAlpha); }

void LossConfig::validate() const {
  if (!(lambda >= 0.0)) throw InputError("loss lambda must be nonnegative");
  if (!(w >= 0.0)) throw InputError("loss w must be nonnegative");
  if (!(beta > 0.0 && beta <= 1.0)) throw InputError("loss beta must lie in (0, 1]");
  if (!(alpha0 > 0.0)) throw InputError("loss alpha0 must be positive");
}

CompositeResult composite_ray(std::span<const CompositeSample> samples) {
  CompositeResult out;
  for (size_t i = 0; i < samples.size(); ++i) {
    if (i > 0 && samples[i].depth < samples[i - 1].depth)
      throw InputError("composite_ray: samples not ordered by depth at index " + std::to_string(i));
    const double a = std::clamp(samples[i].alpha, 0.0, kMaxAlpha);
    const double w = a * out.transmittance;
    out.color += w * samples[i].color;
    out.depth += w * samples[i].depth;
    out.transmittance *= 1.0 - a;
  }
  return out;
}

Rasterization rasterize(const SplatCloud& cloud, const CameraModel& camera) {
  Rasterization r;
  r.width = camera.width;
  r.height = camera.height;
  r.pixel_splats.assign(static_cast<size_t>(camera.width) * camera.height, {});
  r.splat_depth.assign(cloud.splats.size(), 0.0);

  struct Projected {
    int index;
    double u, v, z;
  };
  std::vector<Projected> visible;
  const Pose cam_from_world = camera.pose.inverse();
  for (size_t i = 0; i < cloud.splats.size(); ++i) {
    const Vec3 p = cam_from_world * cloud.splats[i].position;
    if (!(p.z() > 1e-6)) continue;
    visible.push_back({static_cast<int>(i), camera.fx * p.x() / p.z() + camera.cx,
                       camera.fy * p.y() / p.z() + camera.cy, p.z()});
    r.splat_depth[i] = p.z();
  }
  std::sort(visible.begin(), visible.end(),
            [](const Projected& a, const Projected& b) { return a.z < b.z || (a.z == b.z && a.index < b.index); });

  for (const auto& s : visible) {
    const double rad = cloud.splats[s.index].radius;
    const double rx = camera.fx * rad / s.z;
    const double ry = camera.fy * rad / s.z;
    const int x0 = std::max(0, static_cast<int>(std::ceil(s.u - rx)));
    const int x1 = std::min(camera.width - 1, static_cast<int>(std::floor(s.u + rx)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(s.v - ry)));
    const int y1 = std::min(camera.height - 1, static_cast<int>(std::floor(s.v + ry)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double du = (x - s.u) / rx;
        const double dv = (y - s.v) / ry;
        if (du * du + dv * dv <= 1.0) r.pixel_splats[static_cast<size_t>(y) * camera.width + x].push_back(s.index);
      }
  }
  return r;
}

RenderResult render(const SplatCloud& cloud, const Rasterization& raster) {
  RenderResult out{ImageRgb(raster.width, raster.height, Vec3::Zero()), ImageD(raster.width, raster.height, 0.0)};
  std::vector<CompositeSample> samples;
  for (size_t i = 0; i < raster.pixel_splats.size(); ++i) {
    samples.clear();
    for (int k : raster.pixel_splats[i])
      samples.push_back({cloud.splats[k].alpha(), cloud.splats[k].color, raster.splat_depth[k]});
    const CompositeResult c = composite_ray(samples);
    out.color[i] = c.color + c.transmittance * cloud.background;
    out.depth[i] = c.depth;
  }
  return out;
}

RenderResult render(const SplatCloud& cloud, const CameraModel& camera) {
  return render(cloud, rasterize(cloud, camera));
}

double color_loss(const ImageRgb& rendered, const ImageRgb& gt) {
  if (!rendered.same_shape(gt)) throw InputError("color_loss: image dimensions differ");
  double sum = 0.0;
  for (size_t i = 0; i < gt.size(); ++i) sum += (rendered[i] - gt[i]).squaredNorm();
  return sum;
}

double depth_weight(double variance, const LossConfig& cfg) { return cfg.alpha0 * std::exp(-cfg.w * std::sqrt(variance)); }

double depth_loss(const ImageD& rendered, const FusedSupervision& fused, const LossConfig& cfg) {
  if (!rendered.same_shape(fused.depth) || !rendered.same_shape(fused.provenance))
    throw InputError("depth_loss: image dimensions differ");
  double sum = 0.0;
  for (size_t i = 0; i < rendered.size(); ++i) {
    if (!supervised(fused, i)) continue;
    const double r = rendered[i] - fused.depth[i];
    sum += depth_weight(fused.variance[i], cfg) * r * r;
  }
  return sum;
}

double decay_weight(double lambda, double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) throw InputError("decay beta must lie in (0, 1]");
  return beta * lambda;
}

std::vector<Vec3> backproject_init(std::span<const DepthVarImage> images) {
  if (images.empty()) throw InputError("backproject_init needs at least one image");
  std::vector<Vec3> pts;
  for (const auto& img : images)
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x)
        if (img.depth(x, y) > 0.0) pts.push_back(backproject(img.camera, x, y, img.depth(x, y)));
  return pts;
}

SplatCloud cloud_from_points(std::span<const Vec3> points, double radius, const Vec3& color, double alpha,
                             const Vec3& background) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("initial opacity must lie in (0, 1)");
  SplatCloud cloud;
  cloud.background = background;
  cloud.splats.reserve(points.size());
  const double logit = std::log(alpha / (1.0 - alpha));
  for (const auto& p : points) cloud.splats.push_back({p, color, logit, radius});
  return cloud;
}

std::vector<double> pack_params(const SplatCloud& cloud) {
  std::vector<double> p;
  p.reserve(cloud.splats.size() * kParamsPerSplat);
  for (const auto& s : cloud.splats) {
    p.insert(p.end(), {s.position.x(), s.position.y(), s.position.z(), s.color.x(), s.color.y(), s.color.z(),
                       s.opacity_logit});
  }
  return p;
}

void unpack_params(std::span<const double> p, SplatCloud& cloud) {
  if (p.size() != cloud.splats.size() * kParamsPerSplat) throw InputError("parameter vector size mismatch");
  for (size_t i = 0; i < cloud.splats.size(); ++i) {
    const double* q = p.data() + i * kParamsPerSplat;
    cloud.splats[i].position = Vec3(q[0], q[1], q[2]);
    cloud.splats[i].color = Vec3(q[3], q[4], q[5]);
    cloud.splats[i].opacity_logit = q[6];
  }
}

std::vector<double> pixel_losses(const SplatCloud& cloud, const TrainingView& view, const LossConfig& cfg,
                                 double lambda) {
  const bool use_depth = lambda != 0.0;
  check_view(view, use_depth);
  const Rasterization r = rasterize(cloud, view.camera);
  std::vector<double> out(r.pixel_splats.size(), 0.0);
  for (size_t i = 0; i < out.size(); ++i) {
    const PixelTerms t = blend(cloud, r, i);
    double l = (t.color - view.rgb[i]).squaredNorm();
    if (use_depth && supervised(view.supervision, i)) {
      const double res = t.depth - view.supervision.depth[i];
      l += lambda * depth_weight(view.supervision.variance[i], cfg) * res * res;
    }
    out[i] = l;
  }
  return out;
}

LossGradient loss_and_gradient(const SplatCloud& cloud, std::span<const TrainingView> views, const LossConfig& cfg,
                               double lambda) {
  const bool use_depth = lambda != 0.0;
  LossGradient out;
  const size_t n = cloud.splats.size();
  out.grad.assign(n * kParamsPerSplat, 0.0);
  out.coverage.assign(n, 0.0);

  std::vector<double> alpha(n);
  std::vector<bool> clamped(n);
  for (size_t i = 0; i < n; ++i) {
    alpha[i] = cloud.splats[i].alpha();
    clamped[i] = alpha[i] >= kMaxAlpha;
  }

  std::vector<double> trans;
  for (const auto& view : views) {
    check_view(view, use_depth);
    const Rasterization r = rasterize(cloud, view.camera);
    const Vec3 axis = view.camera.optical_axis();
    for (size_t px = 0; px < r.pixel_splats.size(); ++px) {
      const auto& list = r.pixel_splats[px];
      trans.resize(list.size());
      Vec3 color = Vec3::Zero();
      double depth = 0.0;
      double t = 1.0;
      for (size_t k = 0; k < list.size(); ++k) {
        const int s = list[k];
        trans[k] = t;
        const double w = alpha[s] * t;
        color += w * cloud.splats[s].color;
        depth += w * r.splat_depth[s];
        t *= 1.0 - alpha[s];
        out.coverage[s] += 1.0;
      }
      const Vec3 full = color + t * cloud.background;
      const Vec3 dl_dc = 2.0 * (full - view.rgb[px]);
      out.color_loss += (full - view.rgb[px]).squaredNorm();

      double dl_dd = 0.0;
      if (use_depth && supervised(view.supervision, px)) {
        const double weight = depth_weight(view.supervision.variance[px], cfg);
        const double res = depth - view.supervision.depth[px];
        out.depth_loss += weight * res * res;
        dl_dd = 2.0 * lambda * weight * res;
      }

      Vec3 tail_color = t * cloud.background;
      double tail_depth = 0.0;
      for (size_t k = list.size(); k-- > 0;) {
        const int s = list[k];
        const double a = alpha[s];
        const double w = a * trans[k];
        const double d = r.splat_depth[s];
        const Vec3& c = cloud.splats[s].color;
        double* g = out.grad.data() + static_cast<size_t>(s) * kParamsPerSplat;

        const Vec3 gp = (dl_dd * w) * axis;
        g[0] += gp.x();
        g[1] += gp.y();
        g[2] += gp.z();
        g[3] += dl_dc.x() * w;
        g[4] += dl_dc.y() * w;
        g[5] += dl_dc.z() * w;
        if (!clamped[s]) {
          const double inv = 1.0 / (1.0 - a);
          const double d_alpha =
              dl_dc.dot(c * trans[k] - tail_color * inv) + dl_dd * (d * trans[k] - tail_depth * inv);
          g[6] += d_alpha * a * (1.0 - a);
        }
        tail_color += w * c;
        tail_depth += w * d;
      }
    }
  }
  out.total = out.color_loss + lambda * out.depth_loss;
  return out;
}

TrainingResult optimize(const SplatCloud& cloud, std::span<const TrainingView> views, const LossConfig& cfg, int iters,
                        const OptimizerConfig& opt) {
  cfg.validate();
  if (views.empty()) throw InputError("optimize needs at least one view");
  TrainingResult out{cloud, {}};
  if (iters <= 0) return out;

  double lambda = cfg.lambda;
  std::vector<double> params = pack_params(out.cloud);
  for (int it = 0; it <= iters; ++it) {
    const LossGradient lg = loss_and_gradient(out.cloud, views, cfg, lambda);
    if (!std::isfinite(lg.total)) throw NumericalError("training loss diverged at iteration " + std::to_string(it));
    out.log.push_back({it, lg.color_loss, lg.depth_loss, lambda});
    if (it == iters) break;

    for (size_t i = 0; i < out.cloud.splats.size(); ++i) {
      const double inv_cov = 1.0 / std::max(1.0, lg.coverage[i]);
      double* p = params.data() + i * kParamsPerSplat;
      const double* g = lg.grad.data() + i * kParamsPerSplat;
      for (int j = 0; j < 3; ++j) p[j] -= opt.step * opt.position_scale * inv_cov * g[j];
      for (int j = 3; j < 6; ++j) p[j] = std::clamp(p[j] - opt.step * opt.color_scale * inv_cov * g[j], 0.0, 1.0);
      p[6] -= opt.step * opt.opacity_scale * inv_cov * g[6];
    }
    unpack_params(params, out.cloud);
    lambda = decay_weight(lambda, cfg.beta);
  }
  return out;
}

GradCheckResult grad_check(const SplatCloud& cloud, const TrainingView& view, const LossConfig& cfg, double h) {
  GradCheckResult out;
  const std::span<const TrainingView> one(&view, 1);
  out.analytic = loss_and_gradient(cloud, one, cfg, cfg.lambda).grad;
  const std::vector<double> base = pack_params(cloud);
  out.numeric.assign(base.size(), 0.0);
  SplatCloud probe = cloud;
  std::vector<double> p = base;
  for (size_t j = 0; j < base.size(); ++j) {
    p[j] = base[j] + h;
    unpack_params(p, probe);
    const auto plus = pixel_losses(probe, view, cfg, cfg.lambda);
    p[j] = base[j] - h;
    unpack_params(p, probe);
    const auto minus = pixel_losses(probe, view, cfg, cfg.lambda);
    p[j] = base[j];
    double diff = 0.0;
    for (size_t i = 0; i < plus.size(); ++i) diff += plus[i] - minus[i];
    out.numeric[j] = diff / (2.0 * h);
    const double denom = std::max({std::abs(out.analytic[j]), std::abs(out.numeric[j]), 1e-8});
    out.max_rel_error = std::max(out.max_rel_error, std::abs(out.analytic[j] - out.numeric[j]) / denom);
  }
  return out;
}

}  // namespace vtf
