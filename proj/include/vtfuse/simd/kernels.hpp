#pragma once

// Data-parallel inner loops shared by the GP, fusion and metric code.
//
// Every kernel has a scalar reference implementation. Vector variants are
// compiled into separate translation units with their own target flags and
// selected once at runtime from the CPU feature set. Set VTFUSE_SIMD=scalar
// in the environment to force the reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace vtf::simd {

enum class Backend { scalar, avx2 };

/// Structure-of-arrays view of a 3D point set.
struct PointsSoA {
  std::span<const double> x;
  std::span<const double> y;
  std::span<const double> z;

  size_t size() const { return x.size(); }
};

/// Matern-3/2 evaluation parameters: k(d) = sigma2 (1 + a d) exp(-a d), a = sqrt(3)/rho.
struct MaternCoeffs {
  double a;
  double sigma2;
};

struct NearestResult {
  size_t index;
  double sq_dist;
};

struct KernelTable {
  /// sum_i w[i] * k(|q - p_i|)
  double (*matern_weighted_sum)(const PointsSoA& pts, std::span<const double> w, const double q[3],
                                MaternCoeffs c);
  /// out[i] = k(|q - p_i|)
  void (*matern_row)(const PointsSoA& pts, const double q[3], MaternCoeffs c, std::span<double> out);
  /// Precision-weighted fusion: var = 1/(1/v1 + 1/v2), mu = var (m1/v1 + m2/v2).
  void (*fuse)(std::span<const double> mu1, std::span<const double> var1, std::span<const double> mu2,
               std::span<const double> var2, std::span<double> mu, std::span<double> var);
  /// Nearest point to q by squared distance; ties resolve to the lowest index.
  NearestResult (*nearest)(const PointsSoA& pts, const double q[3]);
};

const KernelTable& scalar_kernels();
#if defined(VTFUSE_HAVE_AVX2)
const KernelTable& avx2_kernels();
#endif

bool backend_supported(Backend b);
const KernelTable& kernels(Backend b);
/// The table chosen for this process (cached after the first call).
const KernelTable& kernels();
Backend active_backend();
std::string_view backend_name(Backend b);

}  // namespace vtf::simd
