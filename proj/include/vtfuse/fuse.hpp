#pragma once

#include <cstdint>

#include "vtfuse/align.hpp"
#include "vtfuse/image.hpp"

namespace vtf {

enum class Provenance : std::uint8_t { none = 0, vision = 1, touch = 2, fused = 3 };

/// PGM gray level used for each provenance class.
std::uint8_t provenance_gray(Provenance p);
Provenance provenance_from_gray(std::uint8_t g);

struct FusedSupervision {
  ImageD depth;
  ImageD variance;
  Image<Provenance> provenance;
};

struct FusedPixel {
  double mean;
  double variance;
};

/// Inverse-variance (Bayesian) combination of two independent Gaussian estimates.
FusedPixel fuse_pixel(double mu1, double var1, double mu2, double var2);

/// Pixelwise fusion. Pixels valid in only one source copy that source; pixels
/// valid in neither become depth 0 / kMissVariance / Provenance::none. A GPIS
/// miss is invalid for the touch side; vision is invalid where depth <= 0.
FusedSupervision fuse_images(const AlignedVision& vision, const DepthVarImage& gpis);

/// Symmetric core: both inputs are depth/variance pairs with depth 0 as miss.
/// `first` is reported as vision, `second` as touch.
FusedSupervision fuse_images(const ImageD& depth1, const ImageD& var1, const ImageD& depth2, const ImageD& var2);

}  // namespace vtf
