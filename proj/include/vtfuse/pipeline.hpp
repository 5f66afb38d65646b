#pragma once

// Stage functions and the on-disk orchestration behind the CLI.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vtfuse/config.hpp"
#include "vtfuse/fuse.hpp"
#include "vtfuse/gpis.hpp"
#include "vtfuse/io.hpp"
#include "vtfuse/metrics.hpp"
#include "vtfuse/sdfrender.hpp"
#include "vtfuse/splat.hpp"
#include "vtfuse/touchsim.hpp"

namespace vtf {

inline constexpr const char* kVersion = "0.1.0";

struct ViewData {
  std::string name;
  CameraModel camera;
  SparseDepth sparse;
  ImageD mono;
  ImageRgb rgb;
  std::optional<GtRender> gt;
};

struct Dataset {
  std::vector<TouchReading> touches;
  std::vector<ViewData> views;
};

/// Deterministic sub-seed for one consumer of the run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

Scene make_scene(const SimulateConfig& sim);
/// Cameras evenly spaced on a horizontal ring, all looking at the origin.
std::vector<io::NamedCamera> ring_cameras(const SimulateConfig& sim);
Dataset simulate_dataset(const SimulateConfig& sim, std::uint64_t seed);

void write_dataset(const std::filesystem::path& dir, const Dataset& data, const SceneConfig& cfg);
/// Ground truth is loaded when gt_depth/ is present.
Dataset read_dataset(const std::filesystem::path& dir);

struct GpisFitReport {
  ConditioningOptions conditioning;
  size_t points = 0;
  double log_marginal_likelihood = 0.0;
};

/// Conditioning options with "auto" fields resolved. An automatic voxel pitch
/// starts at r / 50 and coarsens until the set fits under max_points.
ConditioningOptions resolve_conditioning(std::span<const TouchReading> touches, const GpisConfig& cfg);
GpisModel fit_gpis(std::span<const TouchReading> touches, const GpisConfig& cfg, GpisFitReport* report = nullptr);

GpisRenderOptions render_options(const MarchConfig& cfg, const GpisModel& model);
std::vector<DepthVarImage> render_gpis(const GpisModel& model, std::span<const ViewData> views,
                                       const GpisRenderOptions& opt);

/// Stage-1-only vision supervision: vision everywhere it is valid.
FusedSupervision vision_supervision(const AlignedVision& stage1);
/// All-none supervision of the given size.
FusedSupervision empty_supervision(int width, int height);

/// GPIS backprojection (voxel-thinned, only for InitKind::gpis) plus
/// `random_points` splats on random camera rays at depths spread around the
/// GPIS bounding sphere.
SplatCloud init_points(std::span<const DepthVarImage> gpis, std::span<const ViewData> views,
                       const BoundingSphere& object_bounds, const TrainConfig& cfg, std::uint64_t seed);

/// Renders every view; depth metrics use the dataset ground truth. The shape
/// terms compare GPIS backprojected points (after ICP alignment) with ground-truth
/// object points.
EvalReport evaluate(const SplatCloud& cloud, std::span<const ViewData> views, std::span<const DepthVarImage> gpis);

enum class Stage { simulate, gpis_fit, gpis_render, align, fuse, init_points, train, eval };

const std::vector<Stage>& all_stages();
std::string stage_name(Stage s);
/// Comma-separated stage names; throws ConfigError on an unknown name.
std::vector<Stage> parse_stages(const std::string& list);

/// Runs the requested stages in dependency order. Returns the process exit
/// code: 0 ok, 1 I/O or input error, 2 config, 3 missing upstream stage, 4 numerical.
int run_pipeline(const SceneConfig& cfg, const std::vector<Stage>& stages, std::ostream& log);

}  // namespace vtf
