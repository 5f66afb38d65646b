// AVX2 variants. This file is compiled with -mavx2 -mfma; nothing in it may be
// called unless the dispatcher has confirmed CPU support.

#include <immintrin.h>

#include <cmath>
#include <limits>

#include "vtfuse/simd/kernels.hpp"

namespace vtf::simd {
namespace {

// Cephes-style exp: range reduction by ln2 split into hi/lo parts and a
// (3,4) Pade approximant on [-ln2/2, ln2/2]. Accurate to ~1 ulp for the
// clamped domain [-708, 709].
inline __m256d exp_pd(__m256d x) {
  const __m256d lo = _mm256_set1_pd(-708.0);
  const __m256d hi = _mm256_set1_pd(709.0);
  x = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

  __m256d fx = _mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634073599));
  fx = _mm256_round_pd(_mm256_add_pd(fx, _mm256_set1_pd(0.5)), _MM_FROUND_TO_NEG_INF | _MM_FROUND_NO_EXC);

  x = _mm256_sub_pd(x, _mm256_mul_pd(fx, _mm256_set1_pd(6.93145751953125e-1)));
  x = _mm256_sub_pd(x, _mm256_mul_pd(fx, _mm256_set1_pd(1.42860682030941723212e-6)));
  const __m256d xx = _mm256_mul_pd(x, x);

  __m256d p = _mm256_set1_pd(1.26177193074810590878e-4);
  p = _mm256_add_pd(_mm256_mul_pd(p, xx), _mm256_set1_pd(3.02994407707441961300e-2));
  p = _mm256_add_pd(_mm256_mul_pd(p, xx), _mm256_set1_pd(9.99999999999999999910e-1));
  p = _mm256_mul_pd(p, x);

  __m256d q = _mm256_set1_pd(3.00198505138664455042e-6);
  q = _mm256_add_pd(_mm256_mul_pd(q, xx), _mm256_set1_pd(2.52448340349684104244e-3));
  q = _mm256_add_pd(_mm256_mul_pd(q, xx), _mm256_set1_pd(2.27265548208155028766e-1));
  q = _mm256_add_pd(_mm256_mul_pd(q, xx), _mm256_set1_pd(2.00000000000000000009e0));

  __m256d r = _mm256_div_pd(p, _mm256_sub_pd(q, p));
  r = _mm256_add_pd(_mm256_set1_pd(1.0), _mm256_add_pd(r, r));

  __m256i n = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(fx));
  n = _mm256_slli_epi64(_mm256_add_epi64(n, _mm256_set1_epi64x(1023)), 52);
  return _mm256_mul_pd(r, _mm256_castsi256_pd(n));
}

inline __m256d matern4(const PointsSoA& pts, size_t i, __m256d qx, __m256d qy, __m256d qz, __m256d a,
                       __m256d s2) {
  const __m256d dx = _mm256_sub_pd(qx, _mm256_loadu_pd(pts.x.data() + i));
  const __m256d dy = _mm256_sub_pd(qy, _mm256_loadu_pd(pts.y.data() + i));
  const __m256d dz = _mm256_sub_pd(qz, _mm256_loadu_pd(pts.z.data() + i));
  const __m256d d2 = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)),
                                   _mm256_mul_pd(dz, dz));
  const __m256d ar = _mm256_mul_pd(a, _mm256_sqrt_pd(d2));
  const __m256d e = exp_pd(_mm256_sub_pd(_mm256_setzero_pd(), ar));
  return _mm256_mul_pd(s2, _mm256_mul_pd(_mm256_add_pd(_mm256_set1_pd(1.0), ar), e));
}

inline double scalar_matern(const PointsSoA& pts, size_t i, const double q[3], MaternCoeffs c) {
  const double dx = q[0] - pts.x[i];
  const double dy = q[1] - pts.y[i];
  const double dz = q[2] - pts.z[i];
  const double ar = c.a * std::sqrt(dx * dx + dy * dy + dz * dz);
  return c.sigma2 * ((1.0 + ar) * std::exp(-ar));
}

double matern_weighted_sum(const PointsSoA& pts, std::span<const double> w, const double q[3], MaternCoeffs c) {
  const size_t n = pts.size();
  const size_t n4 = n & ~size_t{3};
  const __m256d qx = _mm256_set1_pd(q[0]);
  const __m256d qy = _mm256_set1_pd(q[1]);
  const __m256d qz = _mm256_set1_pd(q[2]);
  const __m256d a = _mm256_set1_pd(c.a);
  const __m256d s2 = _mm256_set1_pd(c.sigma2);
  __m256d acc = _mm256_setzero_pd();
  for (size_t i = 0; i < n4; i += 4) {
    const __m256d k = matern4(pts, i, qx, qy, qz, a, s2);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(w.data() + i), k));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double total = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (size_t i = n4; i < n; ++i) total += w[i] * scalar_matern(pts, i, q, c);
  return total;
}

void matern_row(const PointsSoA& pts, const double q[3], MaternCoeffs c, std::span<double> out) {
  const size_t n = pts.size();
  const size_t n4 = n & ~size_t{3};
  const __m256d qx = _mm256_set1_pd(q[0]);
  const __m256d qy = _mm256_set1_pd(q[1]);
  const __m256d qz = _mm256_set1_pd(q[2]);
  const __m256d a = _mm256_set1_pd(c.a);
  const __m256d s2 = _mm256_set1_pd(c.sigma2);
  for (size_t i = 0; i < n4; i += 4) _mm256_storeu_pd(out.data() + i, matern4(pts, i, qx, qy, qz, a, s2));
  for (size_t i = n4; i < n; ++i) out[i] = scalar_matern(pts, i, q, c);
}

void fuse(std::span<const double> mu1, std::span<const double> var1, std::span<const double> mu2,
          std::span<const double> var2, std::span<double> mu, std::span<double> var) {
  const size_t n = mu1.size();
  const size_t n4 = n & ~size_t{3};
  const __m256d one = _mm256_set1_pd(1.0);
  for (size_t i = 0; i < n4; i += 4) {
    const __m256d m1 = _mm256_loadu_pd(mu1.data() + i);
    const __m256d v1 = _mm256_loadu_pd(var1.data() + i);
    const __m256d m2 = _mm256_loadu_pd(mu2.data() + i);
    const __m256d v2 = _mm256_loadu_pd(var2.data() + i);
    const __m256d v = _mm256_div_pd(one, _mm256_add_pd(_mm256_div_pd(one, v1), _mm256_div_pd(one, v2)));
    _mm256_storeu_pd(var.data() + i, v);
    _mm256_storeu_pd(mu.data() + i,
                     _mm256_mul_pd(v, _mm256_add_pd(_mm256_div_pd(m1, v1), _mm256_div_pd(m2, v2))));
  }
  for (size_t i = n4; i < n; ++i) {
    const double p1 = 1.0 / var1[i];
    const double p2 = 1.0 / var2[i];
    const double v = 1.0 / (p1 + p2);
    var[i] = v;
    mu[i] = v * (mu1[i] / var1[i] + mu2[i] / var2[i]);
  }
}

NearestResult nearest(const PointsSoA& pts, const double q[3]) {
  const size_t n = pts.size();
  const size_t n4 = n & ~size_t{3};
  const __m256d qx = _mm256_set1_pd(q[0]);
  const __m256d qy = _mm256_set1_pd(q[1]);
  const __m256d qz = _mm256_set1_pd(q[2]);
  __m256d best = _mm256_set1_pd(std::numeric_limits<double>::infinity());
  __m256i best_idx = _mm256_setzero_si256();
  __m256i idx = _mm256_setr_epi64x(0, 1, 2, 3);
  const __m256i step = _mm256_set1_epi64x(4);
  for (size_t i = 0; i < n4; i += 4) {
    const __m256d dx = _mm256_sub_pd(qx, _mm256_loadu_pd(pts.x.data() + i));
    const __m256d dy = _mm256_sub_pd(qy, _mm256_loadu_pd(pts.y.data() + i));
    const __m256d dz = _mm256_sub_pd(qz, _mm256_loadu_pd(pts.z.data() + i));
    const __m256d d2 = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)),
                                     _mm256_mul_pd(dz, dz));
    const __m256d lt = _mm256_cmp_pd(d2, best, _CMP_LT_OQ);
    best = _mm256_blendv_pd(best, d2, lt);
    best_idx = _mm256_castpd_si256(
        _mm256_blendv_pd(_mm256_castsi256_pd(best_idx), _mm256_castsi256_pd(idx), lt));
    idx = _mm256_add_epi64(idx, step);
  }
  alignas(32) double d[4];
  alignas(32) long long k[4];
  _mm256_store_pd(d, best);
  _mm256_store_si256(reinterpret_cast<__m256i*>(k), best_idx);
  NearestResult out{0, std::numeric_limits<double>::infinity()};
  for (int l = 0; l < 4; ++l) {
    const auto li = static_cast<size_t>(k[l]);
    if (d[l] < out.sq_dist || (d[l] == out.sq_dist && li < out.index)) out = {li, d[l]};
  }
  for (size_t i = n4; i < n; ++i) {
    const double dx = q[0] - pts.x[i];
    const double dy = q[1] - pts.y[i];
    const double dz = q[2] - pts.z[i];
    const double d2 = dx * dx + dy * dy + dz * dz;
    if (d2 < out.sq_dist) out = {i, d2};
  }
  return out;
}

}  // namespace

const KernelTable& avx2_kernels() {
  static const KernelTable table{matern_weighted_sum, matern_row, fuse, nearest};
  return table;
}

}  // namespace vtf::simd
