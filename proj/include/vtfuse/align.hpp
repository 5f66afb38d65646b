#pragma once

// Metric alignment of monocular depth: scale/offset against sparse depth,
// then an offset-only correction on the touched object, plus a heuristic
// depth-dependent variance.

#include <cmath>
#include <vector>

#include "vtfuse/image.hpp"

namespace vtf {

struct SparseSample {
  int u;
  int v;
  double depth;
};

enum class SparseSource { sensor, synthetic };

struct SparseDepth {
  std::vector<SparseSample> samples;
  SparseSource source = SparseSource::sensor;
};

struct ScaleOffsetFit {
  double scale;
  double offset;
  ImageD aligned;
};

/// Least-squares (s, t) minimizing sum (sparse - (s * raw + t))^2, applied to
/// every pixel. Throws when the sampled raw depths have no spread.
ScaleOffsetFit align_scale_offset(const ImageD& raw, const SparseDepth& sparse);

struct ObjectOffsetFit {
  double offset = 0.0;  // mean of (gpis - aligned) over the object mask
  ImageD aligned;
  Mask object_mask;
  bool empty_mask = false;
};

/// Shifts only object pixels (GPIS hits within max_gap of the aligned depth).
/// Background pixels are copied bit-exactly.
ObjectOffsetFit align_object_offset(const ImageD& aligned, const DepthVarImage& gpis, double max_gap);

/// sigma^2 = (k * depth)^2 + c, pixelwise.
ImageD vision_uncertainty(const ImageD& depth, double k, double c);

struct AlignedVision {
  ImageD depth;
  ImageD variance;
  double s_star = 1.0;
  double t_star = 0.0;
  double t_gpis = 0.0;
};

inline bool vision_valid(double depth) { return depth > 0.0 && std::isfinite(depth); }

struct AlignParams {
  double k = 0.1;
  double c = 0.25;  // meters^2
  double max_gap = 3.0;

  void validate() const;
};

/// Stage 1, then stage 2 against `gpis` when given, then the variance map.
AlignedVision align_vision(const ImageD& raw, const SparseDepth& sparse, const DepthVarImage* gpis,
                           const AlignParams& params);

}  // namespace vtf
