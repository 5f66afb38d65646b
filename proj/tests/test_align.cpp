#include <doctest.h>

#include <cmath>
#include <random>

#include "vtfuse/align.hpp"

using namespace vtf;

namespace {

ImageD ramp(int w, int h) {
  ImageD d(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) d(x, y) = 1.0 + 0.05 * x + 0.11 * y + 0.01 * ((x * 7 + y * 3) % 5);
  return d;
}

SparseDepth sample(const ImageD& truth, int n, std::uint64_t seed, double noise) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> ux(0, truth.width() - 1), uy(0, truth.height() - 1);
  std::normal_distribution<double> g(0.0, noise);
  SparseDepth s;
  for (int i = 0; i < n; ++i) {
    const int u = ux(rng), v = uy(rng);
    s.samples.push_back({u, v, truth(u, v) + (noise > 0.0 ? g(rng) : 0.0)});
  }
  return s;
}

double objective(const ImageD& raw, const SparseDepth& sp, double s, double t) {
  double sum = 0.0;
  for (const auto& x : sp.samples) {
    const double r = x.depth - (s * raw(x.u, x.v) + t);
    sum += r * r;
  }
  return sum;
}

DepthVarImage gpis_like(const ImageD& depth) {
  CameraModel cam;
  cam.width = depth.width();
  cam.height = depth.height();
  cam.cx = 0.5 * (cam.width - 1);
  cam.cy = 0.5 * (cam.height - 1);
  DepthVarImage g(cam);
  return g;
}

}  // namespace

TEST_CASE("noiseless stage one recovers scale and offset") {
  const ImageD raw = ramp(40, 30);
  ImageD metric = raw;
  for (auto& d : metric.pixels()) d = 2.5 * d + 0.3;
  const auto fit = align_scale_offset(raw, sample(metric, 50, 1, 0.0));
  CHECK(std::abs(fit.scale - 2.5) < 1e-9);
  CHECK(std::abs(fit.offset - 0.3) < 1e-9);
  for (size_t i = 0; i < raw.size(); ++i) CHECK(std::abs(fit.aligned[i] - metric[i]) < 1e-9);

  const auto id = align_scale_offset(raw, sample(raw, 20, 2, 0.0));
  CHECK(std::abs(id.scale - 1.0) < 1e-12);
  CHECK(std::abs(id.offset) < 1e-12);
}

TEST_CASE("noisy stage one stays close in most seeds") {
  const ImageD raw = ramp(64, 48);
  ImageD metric = raw;
  for (auto& d : metric.pixels()) d = 2.5 * d + 0.3;
  int good = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto fit = align_scale_offset(raw, sample(metric, 500, 100 + s, 0.01));
    good += std::abs(fit.scale - 2.5) < 0.01 && std::abs(fit.offset - 0.3) < 0.02;
  }
  CHECK(good >= 9);
}

TEST_CASE("stage one solution is a least-squares minimum") {
  const ImageD raw = ramp(30, 20);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 10; ++trial) {
    SparseDepth sp;
    for (int i = 0; i < 30; ++i) sp.samples.push_back({i % 30, (i * 7) % 20, 3.0 + g(rng)});
    const auto fit = align_scale_offset(raw, sp);
    const double best = objective(raw, sp, fit.scale, fit.offset);
    for (double ds : {-1e-3, 1e-3}) {
      CHECK(objective(raw, sp, fit.scale + ds, fit.offset) >= best);
      CHECK(objective(raw, sp, fit.scale, fit.offset + ds) >= best);
    }
  }
}

TEST_CASE("stage one input errors") {
  const ImageD raw(10, 10, 1.0);
  SparseDepth sp;
  sp.samples = {{1, 1, 2.0}, {2, 2, 3.0}};
  CHECK_THROWS_WITH_AS(align_scale_offset(raw, sp), doctest::Contains("rank deficient"), InputError);
  sp.samples = {{1, 1, 2.0}};
  CHECK_THROWS_AS(align_scale_offset(ramp(10, 10), sp), InputError);
  sp.samples = {{1, 1, 2.0}, {20, 1, 2.0}};
  CHECK_THROWS_AS(align_scale_offset(ramp(10, 10), sp), InputError);
  sp.samples = {{1, 1, 2.0}, {2, 1, -2.0}};
  CHECK_THROWS_AS(align_scale_offset(ramp(10, 10), sp), InputError);
}

TEST_CASE("stage two recovers a constant object offset exactly") {
  const ImageD aligned = ramp(16, 12);
  DepthVarImage g = gpis_like(aligned);
  for (int y = 3; y < 9; ++y)
    for (int x = 4; x < 12; ++x) {
      g.depth(x, y) = aligned(x, y) + 0.05;
      g.variance(x, y) = 1e-4;
    }
  const auto fit = align_object_offset(aligned, g, 3.0);
  CHECK(fit.offset == doctest::Approx(0.05).epsilon(1e-12));
  for (size_t i = 0; i < aligned.size(); ++i) {
    if (g.is_hit(i)) {
      CHECK(fit.object_mask[i] == 1);
      CHECK(std::abs(fit.aligned[i] - g.depth[i]) < 1e-12);
    } else {
      CHECK(fit.object_mask[i] == 0);
      CHECK(fit.aligned[i] == aligned[i]);
    }
  }
}

TEST_CASE("stage two with no overlap leaves the image alone") {
  const ImageD aligned = ramp(8, 8);
  const DepthVarImage g = gpis_like(aligned);
  const auto fit = align_object_offset(aligned, g, 3.0);
  CHECK(fit.empty_mask);
  CHECK(fit.offset == 0.0);
  CHECK(fit.aligned == aligned);
}

TEST_CASE("stage two ignores gaps beyond max_gap") {
  const ImageD aligned(4, 4, 1.0);
  DepthVarImage g = gpis_like(aligned);
  g.depth(1, 1) = 6.0;
  g.variance(1, 1) = 0.1;
  const auto fit = align_object_offset(aligned, g, 3.0);
  CHECK(fit.offset == 0.0);
  CHECK(fit.aligned == aligned);
}

TEST_CASE("vision uncertainty formula") {
  ImageD d(3, 1, 0.0);
  auto v = vision_uncertainty(d, 0.1, 0.25);
  for (double x : v.pixels()) CHECK(x == 0.25);
  d(0, 0) = 2.0;
  d(1, 0) = 4.0;
  d(2, 0) = 8.0;
  v = vision_uncertainty(d, 0.1, 0.25);
  CHECK(v(0, 0) == doctest::Approx(0.29).epsilon(1e-15));
  CHECK((v(1, 0) - 0.25) == doctest::Approx(4.0 * (v(0, 0) - 0.25)).epsilon(1e-12));
  CHECK(v(2, 0) >= v(1, 0));
  CHECK_THROWS_AS(vision_uncertainty(d, -0.1, 0.25), InputError);
  CHECK_THROWS_AS(vision_uncertainty(d, 0.1, 0.0), InputError);
}

TEST_CASE("composed alignment reports both stages") {
  const ImageD raw = ramp(16, 12);
  ImageD metric = raw;
  for (auto& d : metric.pixels()) d = 2.0 * d + 0.5;
  const auto sp = sample(metric, 40, 9, 0.0);
  DepthVarImage g = gpis_like(raw);
  g.depth(5, 5) = metric(5, 5) - 0.05;
  g.variance(5, 5) = 1e-3;
  const auto av = align_vision(raw, sp, &g, AlignParams{});
  CHECK(av.s_star == doctest::Approx(2.0));
  CHECK(av.t_star == doctest::Approx(0.5));
  CHECK(av.t_gpis == doctest::Approx(-0.05));
  CHECK(av.depth(5, 5) == doctest::Approx(g.depth(5, 5)));
  CHECK(av.variance(0, 0) == doctest::Approx(std::pow(0.1 * av.depth(0, 0), 2) + 0.25));
  const auto s1 = align_vision(raw, sp, nullptr, AlignParams{});
  CHECK(s1.t_gpis == 0.0);
  CHECK(s1.depth(5, 5) == doctest::Approx(metric(5, 5)));
}
