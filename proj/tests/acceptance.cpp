// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include "vtfuse/pipeline.hpp"

using namespace vtf;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<Vec3> fibonacci_sphere(int n) {
  std::vector<Vec3> out;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double r = std::sqrt(1.0 - z * z);
    out.emplace_back(r * std::cos(golden * i), r * std::sin(golden * i), z);
  }
  return out;
}

Outcome gp_interpolation() {
  const auto t0 = Clock::now();
  ConditioningSet set;
  set.locations = fibonacci_sphere(50);
  set.targets.assign(50, 0.0);
  set.labels.assign(50, PointClass::surface);
  KernelParams kp;
  kp.rho = 0.5;
  kp.noise = 0.0;
  kp.prior_mean = 0.5;
  const auto model = GpisModel::fit(set, kp);

  const auto n = static_cast<Eigen::Index>(set.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double r = std::sqrt(3.0) * (set.locations[i] - set.locations[j]).norm() / kp.rho;
      k(i, j) = (1.0 + r) * std::exp(-r);
    }
  k.diagonal().array() += model.jitter();
  const Eigen::VectorXd alpha = k.fullPivLu().solve(Eigen::VectorXd::Constant(n, -kp.prior_mean));

  double worst_target = 0.0;
  double worst_oracle = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = model.mean(set.locations[i]);
    worst_target = std::max(worst_target, std::abs(m - set.targets[i]));
    const double oracle = kp.prior_mean + k.row(i).dot(alpha) - model.jitter() * alpha[i];
    worst_oracle = std::max(worst_oracle, std::abs(m - oracle));
  }
  const double dt = seconds_since(t0);
  return {worst_target < 1e-5 && worst_oracle < 1e-5 && dt < 1.0,
          fmt("max |mean-target| %.2e, max |mean-oracle| %.2e, %.3f s", worst_target, worst_oracle, dt)};
}

Outcome kernel_closed_form() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ud(0.0, 5.0), ur(0.05, 3.0), us(0.1, 2.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    KernelParams kp;
    const double d = ud(rng);
    kp.rho = ur(rng);
    kp.sigma = us(rng);
    const long double a = std::sqrt(3.0L) * d / kp.rho;
    const long double ref = static_cast<long double>(kp.sigma) * kp.sigma * (1.0L + a) * std::exp(-a);
    const double got = matern32(d, kp);
    worst = std::max(worst, static_cast<double>(std::abs(got - ref) / ref));
  }
  return {worst < 1e-12, fmt("max relative error %.2e over 100 triples", worst)};
}

Outcome sphere_halving() {
  AnalyticShape shape;
  MarchParams p;
  p.alpha = 0.5;
  p.dt_min = 1e-6;
  p.hit_tol = 1e-9;
  p.max_steps = 1000;
  std::vector<double> trace;
  const auto hit = march(AnalyticField{&shape}, Ray{Vec3(0, 0, -3), Vec3::UnitZ()}, p, {0.0, 10.0}, &trace);
  if (!hit) return {false, "ray missed the sphere"};
  double worst = 0.0;
  int checked = 0;
  for (size_t k = 1; k < trace.size(); ++k) {
    const double prev = analytic_sdf(shape, Vec3(0, 0, -3 + trace[k - 1]));
    const double cur = analytic_sdf(shape, Vec3(0, 0, -3 + trace[k]));
    if (0.5 * prev < p.dt_min) break;
    worst = std::max(worst, std::abs(cur - 0.5 * prev));
    ++checked;
  }
  return {worst < 1e-9 && checked > 10, fmt("%d steps checked, max deviation %.2e", checked, worst)};
}

Outcome gpis_reconstruction() {
  const auto t0 = Clock::now();
  AnalyticShape shape;
  NoiseModel noise;
  noise.point_sigma = 1e-3;
  const auto touches = sample_touches(shape, 200, 0.05, 5, noise, 7);
  auto opt = ConditioningOptions::defaults_for(touches);
  opt.voxel = 0.08;
  const auto set = build_conditioning_set(touches, opt);
  KernelParams kp;
  kp.rho = 0.5;
  kp.noise = 1e-6;
  kp.prior_mean = 0.5 * touch_extent(touches);
  const auto model = GpisModel::fit(set, kp);
  CameraModel cam;
  cam.width = cam.height = 64;
  cam.fx = cam.fy = 64;
  cam.cx = cam.cy = 31.5;
  cam.pose = look_at(Vec3(0, -3, 0.5), Vec3::Zero(), Vec3::UnitZ());
  GpisRenderOptions ro;
  ro.march = MarchParams::defaults_for(1.0);
  const auto img = render_depth_variance(model, cam, ro);
  const auto gt = render_gt_depth(shape, cam);
  std::vector<double> err;
  for (size_t i = 0; i < gt.depth.size(); ++i)
    if (gt.is_hit(i) && img.is_hit(i)) err.push_back(std::abs(gt.depth[i] - img.depth[i]));
  const double dt = seconds_since(t0);
  if (err.empty()) return {false, "no overlapping hit pixels"};
  std::nth_element(err.begin(), err.begin() + err.size() / 2, err.end());
  const double median = err[err.size() / 2];
  return {median < 5e-3 && dt < 60.0,
          fmt("%zu conditioning points, median |error| %.2e m over %zu pixels, %.2f s", set.size(), median, err.size(),
              dt)};
}

ImageD ramp(int w, int h) {
  ImageD d(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) d(x, y) = 1.0 + 0.05 * x + 0.11 * y + 0.01 * ((x * 7 + y * 3) % 5);
  return d;
}

Outcome alignment_recovery() {
  const ImageD raw = ramp(64, 48);
  ImageD metric = raw;
  for (auto& d : metric.pixels()) d = 2.5 * d + 0.3;

  auto sample = [&](int n, std::uint64_t seed, double sd) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> ux(0, 63), uy(0, 47);
    std::normal_distribution<double> g(0.0, sd);
    SparseDepth s;
    for (int i = 0; i < n; ++i) {
      const int u = ux(rng), v = uy(rng);
      s.samples.push_back({u, v, metric(u, v) + (sd > 0.0 ? g(rng) : 0.0)});
    }
    return s;
  };

  const auto clean = align_scale_offset(raw, sample(50, 1, 0.0));
  const double clean_err = std::max(std::abs(clean.scale - 2.5), std::abs(clean.offset - 0.3));

  int good = 0;
  for (std::uint64_t s = 0; s < 10; ++s)
    good += std::abs(align_scale_offset(raw, sample(500, 1000 + s, 0.01)).scale - 2.5) < 0.01;

  CameraModel cam;
  cam.width = 64;
  cam.height = 48;
  DepthVarImage g(cam);
  for (int y = 10; y < 30; ++y)
    for (int x = 20; x < 44; ++x) {
      g.depth(x, y) = metric(x, y) + 0.05;
      g.variance(x, y) = 1e-4;
    }
  const auto s2 = align_object_offset(metric, g, 3.0);
  const double off_err = std::abs(s2.offset - 0.05);

  return {clean_err < 1e-9 && good >= 9 && off_err < 1e-12,
          fmt("noiseless (s,t) error %.1e, noisy seeds within 0.01: %d/10, stage-2 offset error %.1e", clean_err, good,
              off_err)};
}

Outcome fusion_exactness() {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> ud(0.2, 6.0), uv(1e-4, 3.0);
  ImageD d1(16, 16), v1(16, 16), d2(16, 16), v2(16, 16);
  for (size_t i = 0; i < d1.size(); ++i) {
    d1[i] = ud(rng);
    v1[i] = uv(rng);
    d2[i] = ud(rng);
    v2[i] = uv(rng);
  }
  const auto f = fuse_images(d1, v1, d2, v2);
  bool bitwise = true;
  bool bounded = true;
  double worst_prec = 0.0;
  for (size_t i = 0; i < d1.size(); ++i) {
    const auto r = fuse_pixel(d1[i], v1[i], d2[i], v2[i]);
    bitwise = bitwise && f.depth[i] == r.mean && f.variance[i] == r.variance;
    bounded = bounded && f.variance[i] <= std::min(v1[i], v2[i]);
    const double prec = 1.0 / v1[i] + 1.0 / v2[i];
    worst_prec = std::max(worst_prec, std::abs(1.0 / f.variance[i] - prec) / prec);
  }
  return {bitwise && bounded && worst_prec < 1e-10,
          fmt("bit-identical %s, variance bound %s, precision additivity error %.1e", bitwise ? "yes" : "no",
              bounded ? "holds" : "violated", worst_prec)};
}

Outcome gradient_validity() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  CameraModel cam;
  cam.width = cam.height = 16;
  cam.fx = cam.fy = 16;
  cam.cx = cam.cy = 7.5;
  SplatCloud c;
  c.background = Vec3(0.2, 0.3, 0.4);
  for (int i = 0; i < 10; ++i) {
    Splat s;
    s.position = Vec3(u(rng) - 0.5, u(rng) - 0.5, 2.0 + u(rng));
    s.color = Vec3(u(rng), u(rng), u(rng));
    s.opacity_logit = 2.0 * u(rng) - 1.0;
    s.radius = 0.3;
    c.splats.push_back(s);
  }
  TrainingView v;
  v.camera = cam;
  v.rgb = ImageRgb(16, 16, Vec3(0.5, 0.5, 0.5));
  v.supervision.depth = ImageD(16, 16, 2.5);
  v.supervision.variance = ImageD(16, 16, 0.1);
  v.supervision.provenance = Image<Provenance>(16, 16, Provenance::fused);
  LossConfig cfg;
  const auto r = grad_check(c, v, cfg);
  return {r.max_rel_error < 1e-4, fmt("max relative error %.2e over %zu parameters", r.max_rel_error, r.analytic.size())};
}

Outcome metric_oracles() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Vec3> a(100), b(100);
  for (auto& p : a) p = Vec3(u(rng), u(rng), u(rng));
  for (auto& p : b) p = Vec3(u(rng), u(rng), u(rng));
  auto nearest = [](const Vec3& p, const std::vector<Vec3>& to) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : to) {
      const Vec3 d = p - q;
      best = std::min(best, d.x() * d.x() + d.y() * d.y() + d.z() * d.z());
    }
    return std::sqrt(best);
  };
  double sa = 0.0, sb = 0.0, h = 0.0;
  for (const auto& p : a) {
    const double d = nearest(p, b);
    sa += d;
    h = std::max(h, d);
  }
  for (const auto& p : b) {
    const double d = nearest(p, a);
    sb += d;
    h = std::max(h, d);
  }
  const double ch = 0.5 * (sa / 100.0 + sb / 100.0);
  const bool cloud_ok = chamfer(a, b) == ch && hausdorff(a, b) == h;

  CameraModel cam;
  cam.width = cam.height = 16;
  DepthVarImage gt(cam);
  ImageD pred(16, 16);
  ImageRgb img(16, 16), ref(16, 16);
  for (size_t i = 0; i < pred.size(); ++i) {
    if (u(rng) > -0.5) gt.depth[i] = 2.0 + u(rng);
    pred[i] = 2.0 + u(rng);
    img[i] = Vec3(u(rng), u(rng), u(rng)).cwiseAbs();
    ref[i] = Vec3(u(rng), u(rng), u(rng)).cwiseAbs();
  }
  double sum = 0.0;
  int n = 0;
  for (size_t i = 0; i < pred.size(); ++i)
    if (gt.depth[i] > 0.0) {
      sum += (pred[i] - gt.depth[i]) * (pred[i] - gt.depth[i]);
      ++n;
    }
  const double mse_ref = sum / n;
  double csum = 0.0;
  for (size_t i = 0; i < img.size(); ++i)
    for (int c = 0; c < 3; ++c) csum += (img[i][c] - ref[i][c]) * (img[i][c] - ref[i][c]);
  const double psnr_ref = 10.0 * std::log10(1.0 / (csum / (3.0 * img.size())));
  const double e1 = std::abs(depth_mse(pred, gt) - mse_ref) / mse_ref;
  const double e2 = std::abs(psnr(img, ref) - psnr_ref) / std::abs(psnr_ref);
  return {cloud_ok && e1 < 1e-12 && e2 < 1e-12,
          fmt("chamfer/hausdorff exact %s, depth_mse rel error %.1e, psnr rel error %.1e", cloud_ok ? "yes" : "no", e1, e2)};
}

Outcome directional_trend() {
  const auto t0 = Clock::now();
  SceneConfig cfg;
  cfg.simulate.enabled = true;
  cfg.gpis.voxel = 0.08;
  const int iters = 500;
  int wins = 0;
  std::string lines;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dataset d = simulate_dataset(cfg.simulate, seed);
    const GpisModel model = fit_gpis(d.touches, cfg.gpis);
    const auto gimgs = render_gpis(model, d.views, render_options(cfg.march, model));
    const BoundingSphere bounds = bounding_sphere(model.conditioning(), cfg.march.margin, 1e-3);
    std::vector<TrainingView> fused, vision, none;
    for (size_t i = 0; i < d.views.size(); ++i) {
      const auto& v = d.views[i];
      const auto stage1 = align_vision(v.mono, v.sparse, nullptr, cfg.align);
      const auto full = align_vision(v.mono, v.sparse, &gimgs[i], cfg.align);
      fused.push_back({v.rgb, fuse_images(full, gimgs[i]), v.camera});
      vision.push_back({v.rgb, vision_supervision(stage1), v.camera});
      none.push_back({v.rgb, empty_supervision(v.camera.width, v.camera.height), v.camera});
    }
    TrainConfig tr = cfg.train;
    tr.init = InitKind::random;
    const auto random_init = init_points(gimgs, d.views, bounds, tr, derive_seed(seed, 2));
    tr.init = InitKind::gpis;
    const auto gpis_init = init_points(gimgs, d.views, bounds, tr, derive_seed(seed, 2));
    LossConfig color_only = cfg.loss;
    color_only.lambda = 0.0;
    const auto ra = optimize(random_init, none, color_only, iters, cfg.train.optimizer);
    const auto rb = optimize(random_init, vision, cfg.loss, iters, cfg.train.optimizer);
    const auto ro = optimize(gpis_init, fused, cfg.loss, iters, cfg.train.optimizer);
    const auto ea = evaluate(ra.cloud, d.views, gimgs);
    const auto eb = evaluate(rb.cloud, d.views, gimgs);
    const auto eo = evaluate(ro.cloud, d.views, gimgs);
    const bool win = eo.d_mse < ea.d_mse && eo.d_mse < eb.d_mse && eo.d_mse_o < ea.d_mse_o && eo.d_mse_o < eb.d_mse_o;
    wins += win ? 1 : 0;
    lines += fmt("    seed %d: D-MSE color %.3f vision %.3f ours %.3f | D-MSE-O color %.3f vision %.3f ours %.3f %s\n",
                 static_cast<int>(seed), ea.d_mse, eb.d_mse, eo.d_mse, ea.d_mse_o, eb.d_mse_o, eo.d_mse_o,
                 win ? "win" : "loss");
  }
  const double dt = seconds_since(t0);
  std::fputs(lines.c_str(), stdout);
  return {wins >= 9 && dt < 600.0, fmt("fused+GPIS beats both baselines in %d/10 seeds, %.1f s", wins, dt)};
}

Outcome compositing_conservation() {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> len(0, 40);
  double worst = 0.0;
  std::vector<CompositeSample> s;
  for (int trial = 0; trial < 10000; ++trial) {
    s.clear();
    double d = 0.1;
    const int n = len(rng);
    for (int k = 0; k < n; ++k) {
      d += u(rng);
      s.push_back({u(rng), Vec3::Ones(), d});
    }
    const auto r = composite_ray(s);
    worst = std::max(worst, std::abs(r.color.x() + r.transmittance - 1.0));
  }
  return {worst < 1e-12, fmt("max |sum of weights + T - 1| %.2e over 10000 rays", worst)};
}

Outcome determinism() {
  const fs::path scene = fs::path(VTFUSE_SOURCE_DIR) / "scenes" / "sphere.cfg";
  const fs::path root = fs::temp_directory_path() / ("vtfuse_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::map<std::string, std::string> runs[2];
  std::ostringstream log;
  for (int r = 0; r < 2; ++r) {
    SceneConfig cfg = validate_config(scene);
    const fs::path dir = root / ("run" + std::to_string(r));
    cfg.dataset = dir / "dataset";
    cfg.output = dir / "out";
    const int code = run_pipeline(cfg, all_stages(), log);
    if (code != 0) return {false, fmt("pipeline exited with %d: %s", code, log.str().c_str())};
    for (const auto& e : fs::recursive_directory_iterator(dir))
      if (e.is_regular_file()) runs[r][fs::relative(e.path(), dir).generic_string()] = io::read_file(e.path());
  }
  fs::remove_all(root);
  size_t differing = 0;
  for (const auto& [name, bytes] : runs[0]) {
    const auto it = runs[1].find(name);
    if (it == runs[1].end() || it->second != bytes) ++differing;
  }
  if (runs[0].size() != runs[1].size()) ++differing;
  return {differing == 0 && !runs[0].empty(),
          fmt("%zu artifacts compared, %zu differ", runs[0].size(), differing)};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"GP interpolation", gp_interpolation},
      {"kernel closed form", kernel_closed_form},
      {"sphere tracing halving", sphere_halving},
      {"GPIS reconstruction", gpis_reconstruction},
      {"alignment recovery", alignment_recovery},
      {"fusion exactness", fusion_exactness},
      {"gradient validity", gradient_validity},
      {"metric oracles", metric_oracles},
      {"directional trend", directional_trend},
      {"compositing conservation", compositing_conservation},
      {"determinism", determinism},
  };
  int failed = 0;
  int index = 1;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
    ++index;
  }
  std::printf("%d/%zu criteria passed\n", index - 1 - failed, std::size(criteria));
  return failed == 0 ? 0 : 1;
}
