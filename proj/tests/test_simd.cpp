#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "vtfuse/simd/kernels.hpp"

using namespace vtf::simd;

namespace {

struct Cloud {
  std::vector<double> x, y, z;
  PointsSoA soa() const { return {x, y, z}; }
};

Cloud random_cloud(size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Cloud c;
  for (size_t i = 0; i < n; ++i) {
    c.x.push_back(u(rng));
    c.y.push_back(u(rng));
    c.z.push_back(u(rng));
  }
  return c;
}

std::vector<Backend> vector_backends() {
  std::vector<Backend> out;
  if (backend_supported(Backend::avx2)) out.push_back(Backend::avx2);
  return out;
}

}  // namespace

TEST_CASE("scalar backend is always available") {
  CHECK(backend_supported(Backend::scalar));
  CHECK(backend_name(Backend::scalar) == "scalar");
  CHECK(backend_supported(active_backend()));
}

TEST_CASE("matern_row agrees with the scalar reference on every tail length") {
  std::mt19937_64 rng(11);
  const auto& ref = scalar_kernels();
  for (Backend b : vector_backends()) {
    const auto& k = kernels(b);
    for (size_t n = 0; n <= 37; ++n) {
      const Cloud c = random_cloud(n, rng, 2.0);
      const double q[3] = {0.1, -0.3, 0.7};
      for (double rho : {0.05, 0.5, 3.0}) {
        const MaternCoeffs mc{std::sqrt(3.0) / rho, 1.7};
        std::vector<double> a(n), r(n);
        ref.matern_row(c.soa(), q, mc, r);
        k.matern_row(c.soa(), q, mc, a);
        for (size_t i = 0; i < n; ++i) CHECK(std::abs(a[i] - r[i]) <= 1e-14 * mc.sigma2 + 1e-14 * std::abs(r[i]));
      }
    }
  }
}

TEST_CASE("matern_weighted_sum agrees with the scalar reference") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g;
  const auto& ref = scalar_kernels();
  for (Backend b : vector_backends()) {
    const auto& k = kernels(b);
    for (size_t n : {0, 1, 3, 4, 5, 8, 63, 500}) {
      const Cloud c = random_cloud(n, rng);
      std::vector<double> w(n);
      double mag = 0.0;
      for (auto& v : w) {
        v = g(rng);
        mag += std::abs(v);
      }
      const double q[3] = {0.2, 0.2, -0.4};
      const MaternCoeffs mc{std::sqrt(3.0) / 0.4, 1.0};
      const double a = k.matern_weighted_sum(c.soa(), w, q, mc);
      const double r = ref.matern_weighted_sum(c.soa(), w, q, mc);
      CHECK(std::abs(a - r) <= 1e-13 * (mag + 1.0));
    }
  }
}

TEST_CASE("fuse kernel is bit-identical across backends") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> d(0.1, 5.0), v(1e-4, 2.0);
  const auto& ref = scalar_kernels();
  for (Backend b : vector_backends()) {
    for (size_t n : {0, 1, 3, 4, 7, 256, 1001}) {
      std::vector<double> m1(n), v1(n), m2(n), v2(n);
      for (size_t i = 0; i < n; ++i) {
        m1[i] = d(rng);
        v1[i] = v(rng);
        m2[i] = d(rng);
        v2[i] = i % 5 == 0 ? 1e10 : v(rng);
      }
      std::vector<double> ma(n), va(n), mr(n), vr(n);
      kernels(b).fuse(m1, v1, m2, v2, ma, va);
      ref.fuse(m1, v1, m2, v2, mr, vr);
      CHECK(std::memcmp(ma.data(), mr.data(), n * sizeof(double)) == 0);
      CHECK(std::memcmp(va.data(), vr.data(), n * sizeof(double)) == 0);
    }
  }
}

TEST_CASE("nearest matches the scalar reference including ties") {
  std::mt19937_64 rng(14);
  const auto& ref = scalar_kernels();
  for (Backend b : vector_backends()) {
    for (size_t n : {1, 2, 5, 9, 100}) {
      Cloud c = random_cloud(n, rng);
      // duplicate the first point at the end so ties occur
      c.x.push_back(c.x[0]);
      c.y.push_back(c.y[0]);
      c.z.push_back(c.z[0]);
      for (int t = 0; t < 20; ++t) {
        const double q[3] = {c.x[0], c.y[0], c.z[0] + (t == 0 ? 0.0 : 0.01 * t)};
        const auto a = kernels(b).nearest(c.soa(), q);
        const auto r = ref.nearest(c.soa(), q);
        CHECK(a.index == r.index);
        CHECK(a.sq_dist == r.sq_dist);
      }
      const double q0[3] = {c.x[0], c.y[0], c.z[0]};
      CHECK(kernels(b).nearest(c.soa(), q0).index == 0);
    }
  }
}
