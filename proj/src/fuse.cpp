#include "vtfuse/fuse.hpp"

#include <string>

#include "vtfuse/simd/kernels.hpp"

namespace vtf {

std::uint8_t provenance_gray(Provenance p) {
  switch (p) {
    case Provenance::none:
      return 0;
    case Provenance::vision:
      return 85;
    case Provenance::touch:
      return 170;
    case Provenance::fused:
      return 255;
  }
  return 0;
}

Provenance provenance_from_gray(std::uint8_t g) {
  switch (g) {
    case 0:
      return Provenance::none;
    case 85:
      return Provenance::vision;
    case 170:
      return Provenance::touch;
    case 255:
      return Provenance::fused;
    default:
      throw InputError("invalid provenance gray level " + std::to_string(g));
  }
}

FusedPixel fuse_pixel(double mu1, double var1, double mu2, double var2) {
  if (!(var1 > 0.0) || !(var2 > 0.0)) throw InputError("fuse_pixel: variances must be positive");
  const double p1 = 1.0 / var1;
  const double p2 = 1.0 / var2;
  const double v = 1.0 / (p1 + p2);
  return {v * (mu1 / var1 + mu2 / var2), v};
}

FusedSupervision fuse_images(const ImageD& depth1, const ImageD& var1, const ImageD& depth2, const ImageD& var2) {
  if (!depth1.same_shape(var1) || !depth1.same_shape(depth2) || !depth1.same_shape(var2))
    throw InputError("fuse_images: image dimensions differ");
  for (size_t i = 0; i < var1.size(); ++i)
    if (!(var1[i] > 0.0) || !(var2[i] > 0.0)) throw InputError("fuse_images: variances must be positive");

  const int w = depth1.width();
  const int h = depth1.height();
  FusedSupervision out{ImageD(w, h), ImageD(w, h), Image<Provenance>(w, h, Provenance::none)};
  simd::kernels().fuse(depth1.pixels(), var1.pixels(), depth2.pixels(), var2.pixels(), out.depth.pixels(),
                       out.variance.pixels());

  for (size_t i = 0; i < depth1.size(); ++i) {
    const bool a = vision_valid(depth1[i]) && var1[i] < kMissVariance;
    const bool b = vision_valid(depth2[i]) && var2[i] < kMissVariance;
    if (a && b) {
      out.provenance[i] = Provenance::fused;
    } else if (a) {
      out.provenance[i] = Provenance::vision;
      out.depth[i] = depth1[i];
      out.variance[i] = var1[i];
    } else if (b) {
      out.provenance[i] = Provenance::touch;
      out.depth[i] = depth2[i];
      out.variance[i] = var2[i];
    } else {
      out.depth[i] = 0.0;
      out.variance[i] = kMissVariance;
    }
  }
  return out;
}

FusedSupervision fuse_images(const AlignedVision& vision, const DepthVarImage& gpis) {
  return fuse_images(vision.depth, vision.variance, gpis.depth, gpis.variance);
}

}  // namespace vtf
