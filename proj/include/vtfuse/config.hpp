#pragma once

// Scene configuration: flat "key = value" text grouped by [section].

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vtfuse/align.hpp"
#include "vtfuse/splat.hpp"
#include "vtfuse/touchsim.hpp"

namespace vtf {

struct SimulateConfig {
  bool enabled = false;  // true when the file has a [simulate] section
  AnalyticShape shape;
  bool floor = true;  // slab under the object
  int views = 5;
  double ring_radius = 4.0;
  double ring_height = 1.5;
  int width = 64;
  int height = 48;
  double focal = 60.0;  // pixels
  int touches = 100;
  double patch_radius = 0.05;
  int points_per_touch = 5;
  NoiseModel noise{1e-3, 0.0, 0.005};
  double sparse_fraction = 0.01;
  MonoModel mono;
  Vec3 object_color = Vec3(0.8, 0.3, 0.2);
};

struct GpisConfig {
  std::vector<double> rho_grid{0.5};
  double sigma = 1.0;
  double noise = 1e-6;
  std::optional<double> delta;
  std::optional<double> epsilon;
  int n_slices = 8;
  std::optional<double> voxel;
  size_t max_points = 8000;
  std::optional<double> prior_mean;
};

struct MarchConfig {
  double alpha = 0.9;
  std::optional<double> hit_tol;
  std::optional<double> dt_min;
  int max_steps = 200;
  double margin = 0.1;
};

enum class SupervisionKind { fused, vision, none };
enum class InitKind { gpis, random };

struct TrainConfig {
  int iters = 2000;
  OptimizerConfig optimizer{1e-2, 5.0, 1.0, 30.0};
  SupervisionKind supervision = SupervisionKind::fused;
  InitKind init = InitKind::gpis;
  int random_points = 1500;
  double radius = 0.25;
  double surface_radius = 0.1;  // splats seeded from the GPIS surface
  double init_alpha = 0.5;
  double init_voxel = 0.1;
};

struct SceneConfig {
  std::filesystem::path source;  // the config file itself
  std::filesystem::path dataset;
  std::filesystem::path output;
  std::uint64_t seed = 0;
  SimulateConfig simulate;
  GpisConfig gpis;
  MarchConfig march;
  AlignParams align;
  LossConfig loss;
  TrainConfig train;
};

/// Parses config text. Relative paths resolve against `base_dir`. Errors are
/// ConfigError carrying "<origin>:<line>: ..." messages. File existence is not checked.
SceneConfig parse_config(const std::string& text, const std::filesystem::path& base_dir,
                         const std::string& origin = "<config>");

/// Reads, parses, defaults and range-checks a config file. The dataset
/// directory must exist unless the file asks for simulation.
SceneConfig validate_config(const std::filesystem::path& path);

/// Canonical text of one section ("scene", "simulate", "gpis", "march",
/// "align", "loss", "train"); feeds the stage hashes.
std::string render_section(const SceneConfig& config, const std::string& section);

/// Every section concatenated; parse_config(render_config(c)) reproduces c.
std::string render_config(const SceneConfig& config);

}  // namespace vtf
