#include "vtfuse/align.hpp"

#include <cmath>
#include <string>

namespace vtf {

ScaleOffsetFit align_scale_offset(const ImageD& raw, const SparseDepth& sparse) {
  if (sparse.samples.size() < 2) throw InputError("scale/offset alignment needs at least 2 sparse samples");
  double mx = 0.0;
  double my = 0.0;
  for (const auto& s : sparse.samples) {
    if (s.u < 0 || s.v < 0 || s.u >= raw.width() || s.v >= raw.height())
      throw InputError("sparse sample at (" + std::to_string(s.u) + ", " + std::to_string(s.v) + ") outside image");
    if (!(s.depth > 0.0)) throw InputError("sparse depth must be positive");
    mx += raw(s.u, s.v);
    my += s.depth;
  }
  const double n = static_cast<double>(sparse.samples.size());
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  double x_scale = 0.0;
  for (const auto& s : sparse.samples) {
    const double dx = raw(s.u, s.v) - mx;
    sxx += dx * dx;
    sxy += dx * (s.depth - my);
    x_scale = std::max(x_scale, std::abs(raw(s.u, s.v)));
  }
  if (!(sxx > 1e-24 * n * std::max(x_scale * x_scale, 1e-300)))
    throw InputError("sparse samples share one raw depth; scale/offset alignment is rank deficient");

  ScaleOffsetFit fit{sxy / sxx, 0.0, raw};
  fit.offset = my - fit.scale * mx;
  for (auto& d : fit.aligned.pixels()) d = fit.scale * d + fit.offset;
  return fit;
}

ObjectOffsetFit align_object_offset(const ImageD& aligned, const DepthVarImage& gpis, double max_gap) {
  if (!aligned.same_shape(gpis.depth)) throw InputError("aligned depth and GPIS render differ in size");
  ObjectOffsetFit out;
  out.aligned = aligned;
  out.object_mask = Mask(aligned.width(), aligned.height(), 0);
  double sum = 0.0;
  size_t count = 0;
  for (size_t i = 0; i < aligned.size(); ++i) {
    if (!gpis.is_hit(i) || !vision_valid(aligned[i])) continue;
    const double gap = gpis.depth[i] - aligned[i];
    if (!(std::abs(gap) <= max_gap)) continue;
    out.object_mask[i] = 1;
    sum += gap;
    ++count;
  }
  if (count == 0) {
    out.empty_mask = true;
    return out;
  }
  out.offset = sum / static_cast<double>(count);
  for (size_t i = 0; i < aligned.size(); ++i)
    if (out.object_mask[i] != 0) out.aligned[i] = aligned[i] + out.offset;
  return out;
}

ImageD vision_uncertainty(const ImageD& depth, double k, double c) {
  if (!(k >= 0.0)) throw InputError("vision uncertainty slope k must be nonnegative");
  if (!(c > 0.0)) throw InputError("vision uncertainty floor c must be positive");
  ImageD var(depth.width(), depth.height());
  for (size_t i = 0; i < depth.size(); ++i) {
    const double sd = k * depth[i];
    var[i] = sd * sd + c;
  }
  return var;
}

void AlignParams::validate() const {
  if (!(k >= 0.0)) throw InputError("align k must be nonnegative");
  if (!(c > 0.0)) throw InputError("align c must be positive");
  if (!(max_gap >= 0.0)) throw InputError("align max_gap must be nonnegative");
}

AlignedVision align_vision(const ImageD& raw, const SparseDepth& sparse, const DepthVarImage* gpis,
                           const AlignParams& params) {
  params.validate();
  ScaleOffsetFit s1 = align_scale_offset(raw, sparse);
  AlignedVision out;
  out.s_star = s1.scale;
  out.t_star = s1.offset;
  if (gpis != nullptr) {
    ObjectOffsetFit s2 = align_object_offset(s1.aligned, *gpis, params.max_gap);
    out.t_gpis = s2.offset;
    out.depth = std::move(s2.aligned);
  } else {
    out.depth = std::move(s1.aligned);
  }
  out.variance = vision_uncertainty(out.depth, params.k, params.c);
  return out;
}

}  // namespace vtf
