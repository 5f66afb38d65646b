#include "vtfuse/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

namespace vtf {
namespace fs = std::filesystem;
namespace {

std::string view_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "view_%02d", i);
  return buf;
}

// Cell-mean downsampling in lexicographic cell order.
std::vector<Vec3> voxel_thin(std::span<const Vec3> pts, double pitch) {
  if (!(pitch > 0.0)) return {pts.begin(), pts.end()};
  std::map<std::array<long long, 3>, std::pair<Vec3, int>> cells;
  for (const auto& p : pts) {
    const std::array<long long, 3> key{static_cast<long long>(std::floor(p.x() / pitch)),
                                       static_cast<long long>(std::floor(p.y() / pitch)),
                                       static_cast<long long>(std::floor(p.z() / pitch))};
    auto [it, fresh] = cells.try_emplace(key, Vec3::Zero(), 0);
    auto& c = it->second;
    c.first += p;
    ++c.second;
  }
  std::vector<Vec3> out;
  out.reserve(cells.size());
  for (const auto& [key, c] : cells) out.push_back(c.first / c.second);
  return out;
}

Mask to_gray(const Mask& m) {
  Mask out = m;
  for (auto& v : out.pixels()) v = v != 0 ? 255 : 0;
  return out;
}

Mask from_gray(const Mask& m) {
  Mask out = m;
  for (auto& v : out.pixels()) v = v >= 128 ? 1 : 0;
  return out;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 over the pair
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Scene make_scene(const SimulateConfig& sim) {
  Scene scene;
  scene.object = sim.shape;
  scene.object.validate();
  if (sim.floor) {
    const double r = scene.object.bounding_radius();
    AnalyticShape slab;
    slab.kind = ShapeKind::box;
    slab.size = Vec3(2.5 * r, 2.5 * r, 0.05 * r);
    slab.pose = Pose::Identity();
    slab.pose.translation() = sim.shape.pose.translation() - Vec3(0.0, 0.0, r + slab.size.z());
    scene.backdrop = slab;
  }
  return scene;
}

std::vector<io::NamedCamera> ring_cameras(const SimulateConfig& sim) {
  std::vector<io::NamedCamera> cams;
  const Vec3 target = sim.shape.pose.translation();
  for (int i = 0; i < sim.views; ++i) {
    const double phi = 2.0 * std::numbers::pi * i / sim.views;
    const Vec3 eye = target + Vec3(sim.ring_radius * std::cos(phi), sim.ring_radius * std::sin(phi), sim.ring_height);
    CameraModel cam;
    cam.width = sim.width;
    cam.height = sim.height;
    cam.fx = cam.fy = sim.focal;
    cam.cx = 0.5 * (sim.width - 1);
    cam.cy = 0.5 * (sim.height - 1);
    cam.pose = look_at(eye, target, Vec3::UnitZ());
    cams.push_back({view_name(i), cam});
  }
  return cams;
}

Dataset simulate_dataset(const SimulateConfig& sim, std::uint64_t seed) {
  const Scene scene = make_scene(sim);
  Dataset data;
  data.touches = sample_touches(sim.shape, sim.touches, sim.patch_radius, sim.points_per_touch, sim.noise,
                                derive_seed(seed, 1));
  const Vec3 light = Vec3(0.4, -0.3, 1.0).normalized();
  int i = 0;
  for (auto& nc : ring_cameras(sim)) {
    ViewData v;
    v.name = nc.name;
    v.camera = nc.camera;
    GtRender gt = render_gt_scene(scene, v.camera);
    v.sparse = make_sparse_depth(gt.depth, sim.sparse_fraction, sim.noise, derive_seed(seed, 100 + i));
    v.mono = make_mono_depth(gt, sim.mono);
    v.rgb = render_gt_rgb(scene, gt, sim.object_color, light);
    v.gt = std::move(gt);
    data.views.push_back(std::move(v));
    ++i;
  }
  return data;
}

void write_dataset(const fs::path& dir, const Dataset& data, const SceneConfig& cfg) {
  for (const char* sub : {"touches", "sparse", "mono", "rgb", "gt_depth"}) {
    const fs::path d = dir / sub;
    if (!fs::is_directory(d)) continue;
    for (const auto& e : fs::directory_iterator(d)) {
      const auto ext = e.path().extension();
      if (e.is_regular_file() && (ext == ".ply" || ext == ".txt" || ext == ".pfm" || ext == ".ppm" || ext == ".pgm"))
        fs::remove(e.path());
    }
  }
  for (size_t t = 0; t < data.touches.size(); ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "touch_%04zu.ply", t);
    io::write_touch_ply(dir / "touches" / name, data.touches[t]);
  }
  std::vector<io::NamedCamera> cams;
  for (const auto& v : data.views) {
    cams.push_back({v.name, v.camera});
    io::write_sparse(dir / "sparse" / (v.name + ".txt"), v.sparse);
    io::write_pfm(dir / "mono" / (v.name + ".pfm"), v.mono);
    io::write_ppm(dir / "rgb" / (v.name + ".ppm"), v.rgb);
    if (v.gt) {
      io::write_pfm(dir / "gt_depth" / (v.name + ".pfm"), v.gt->depth.depth);
      io::write_pgm(dir / "gt_depth" / (v.name + "_object.pgm"), to_gray(v.gt->object_mask));
    }
  }
  io::write_cameras(dir / "cameras.txt", cams);
  io::write_file_atomic(dir / "scene.cfg", "seed = " + std::to_string(cfg.seed) + "\n" + render_section(cfg, "simulate"));
}

Dataset read_dataset(const fs::path& dir) {
  Dataset data;
  data.touches = io::read_touch_dir(dir / "touches");
  for (auto& nc : io::read_cameras(dir / "cameras.txt")) {
    ViewData v;
    v.name = nc.name;
    v.camera = nc.camera;
    v.sparse = io::read_sparse(dir / "sparse" / (v.name + ".txt"));
    v.mono = io::read_pfm(dir / "mono" / (v.name + ".pfm"));
    v.rgb = io::read_ppm(dir / "rgb" / (v.name + ".ppm"));
    if (v.mono.width() != v.camera.width || v.mono.height() != v.camera.height)
      throw IoError(v.name + ": monocular depth size does not match the camera");
    const fs::path gt = dir / "gt_depth" / (v.name + ".pfm");
    if (fs::exists(gt)) {
      GtRender g;
      g.depth = DepthVarImage(v.camera);
      g.depth.depth = io::read_pfm(gt);
      for (size_t i = 0; i < g.depth.depth.size(); ++i) g.depth.variance[i] = g.depth.is_hit(i) ? 0.0 : kMissVariance;
      g.object_mask = from_gray(io::read_pgm(dir / "gt_depth" / (v.name + "_object.pgm")));
      v.gt = std::move(g);
    }
    data.views.push_back(std::move(v));
  }
  return data;
}

ConditioningOptions resolve_conditioning(std::span<const TouchReading> touches, const GpisConfig& cfg) {
  ConditioningOptions opt = ConditioningOptions::defaults_for(touches);
  if (cfg.delta) opt.delta = *cfg.delta;
  if (cfg.epsilon) opt.epsilon = *cfg.epsilon;
  opt.n_slices = cfg.n_slices;
  if (cfg.voxel) {
    opt.voxel = *cfg.voxel;
    return opt;
  }
  for (int attempt = 0; attempt < 64; ++attempt) {
    if (build_conditioning_set(touches, opt).size() <= cfg.max_points) return opt;
    opt.voxel *= 1.25;
  }
  throw ConfigError("could not find a voxel pitch that fits the conditioning set under max_points");
}

GpisModel fit_gpis(std::span<const TouchReading> touches, const GpisConfig& cfg, GpisFitReport* report) {
  const ConditioningOptions opt = resolve_conditioning(touches, cfg);
  ConditioningSet set = build_conditioning_set(touches, opt);
  KernelParams base;
  base.sigma = cfg.sigma;
  base.noise = cfg.noise;
  base.rho = cfg.rho_grid.front();
  base.prior_mean = cfg.prior_mean ? *cfg.prior_mean : 0.5 * touch_extent(touches);
  FitOptions fo;
  fo.max_points = cfg.max_points;
  KernelParams params = base;
  if (cfg.rho_grid.size() > 1) {
    std::vector<std::pair<double, double>> grid;
    for (double r : cfg.rho_grid) grid.emplace_back(r, cfg.sigma);
    params = optimize_hyperparameters(set, grid, base, fo);
  }
  GpisModel model = GpisModel::fit(std::move(set), params, fo);
  if (report) {
    report->conditioning = opt;
    report->points = model.size();
    report->log_marginal_likelihood = model.log_marginal_likelihood();
  }
  return model;
}

GpisRenderOptions render_options(const MarchConfig& cfg, const GpisModel& model) {
  const BoundingSphere b = bounding_sphere(model.conditioning(), 0.0, 1e-3);
  GpisRenderOptions opt;
  opt.march = MarchParams::defaults_for(b.radius);
  opt.march.alpha = cfg.alpha;
  opt.march.max_steps = cfg.max_steps;
  if (cfg.hit_tol) opt.march.hit_tol = *cfg.hit_tol;
  if (cfg.dt_min) opt.march.dt_min = *cfg.dt_min;
  opt.margin_frac = cfg.margin;
  return opt;
}

std::vector<DepthVarImage> render_gpis(const GpisModel& model, std::span<const ViewData> views,
                                       const GpisRenderOptions& opt) {
  std::vector<DepthVarImage> out;
  out.reserve(views.size());
  for (const auto& v : views) out.push_back(render_depth_variance(model, v.camera, opt));
  return out;
}

FusedSupervision vision_supervision(const AlignedVision& stage1) {
  const ImageD none_depth(stage1.depth.width(), stage1.depth.height(), 0.0);
  const ImageD none_var(stage1.depth.width(), stage1.depth.height(), kMissVariance);
  return fuse_images(stage1.depth, stage1.variance, none_depth, none_var);
}

FusedSupervision empty_supervision(int width, int height) {
  return {ImageD(width, height, 0.0), ImageD(width, height, kMissVariance),
          Image<Provenance>(width, height, Provenance::none)};
}

SplatCloud init_points(std::span<const DepthVarImage> gpis, std::span<const ViewData> views,
                       const BoundingSphere& object_bounds, const TrainConfig& cfg, std::uint64_t seed) {
  if (views.empty()) throw InputError("init_points needs at least one view");
  SplatCloud cloud;
  std::vector<Vec3> seeds;
  if (cfg.init == InitKind::gpis) seeds = voxel_thin(backproject_init(gpis), cfg.init_voxel);
  cloud = cloud_from_points(seeds, cfg.surface_radius, Vec3(0.5, 0.5, 0.5), cfg.init_alpha, Vec3::Zero());

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double logit = std::log(cfg.init_alpha / (1.0 - cfg.init_alpha));
  for (int i = 0; i < cfg.random_points; ++i) {
    const auto& cam = views[static_cast<size_t>(i) % views.size()].camera;
    const double u = -0.5 + unit(rng) * cam.width;
    const double v = -0.5 + unit(rng) * cam.height;
    const double d = (object_bounds.center - cam.position()).norm();
    const Ray ray = generate_ray(cam, std::min(u, cam.width - 0.5 - 1e-9), std::min(v, cam.height - 0.5 - 1e-9));
    const double t = d * (0.25 + 1.5 * unit(rng));
    Splat s;
    s.position = ray.at(t);
    s.color = Vec3(unit(rng), unit(rng), unit(rng));
    s.opacity_logit = logit;
    s.radius = cfg.radius;
    cloud.splats.push_back(s);
  }
  return cloud;
}

EvalReport evaluate(const SplatCloud& cloud, std::span<const ViewData> views, std::span<const DepthVarImage> gpis) {
  if (views.empty()) throw InputError("evaluate needs at least one view");
  EvalReport report;
  std::vector<Vec3> gt_points;
  for (const auto& v : views) {
    if (!v.gt) throw DependencyError("view " + v.name + " has no ground-truth depth; run 'simulate' first");
    RenderResult r = render(cloud, v.camera);
    for (auto& c : r.color.pixels()) c = c.cwiseMax(0.0).cwiseMin(1.0);
    ViewMetrics m;
    m.view = v.name;
    m.psnr = psnr(r.color, v.rgb);
    m.d_mse = depth_mse(r.depth, v.gt->depth);
    m.d_mse_o = depth_mse(r.depth, v.gt->depth, &v.gt->object_mask);
    report.views.push_back(m);
    for (int y = 0; y < v.camera.height; ++y)
      for (int x = 0; x < v.camera.width; ++x)
        if (v.gt->object_mask(x, y) != 0) gt_points.push_back(backproject(v.camera, x, y, v.gt->depth.depth(x, y)));
  }
  const double n = static_cast<double>(report.views.size());
  for (const auto& m : report.views) {
    report.psnr += m.psnr / n;
    report.d_mse += m.d_mse / n;
    report.d_mse_o += m.d_mse_o / n;
  }
  std::vector<Vec3> recon = backproject_init(gpis);
  if (!recon.empty() && !gt_points.empty()) {
    const Pose T = align_clouds(recon, gt_points, 30);
    for (auto& p : recon) p = T * p;
    report.chamfer = chamfer(recon, gt_points);
    report.hausdorff = hausdorff(recon, gt_points);
  }
  return report;
}

// ---- orchestration ----

namespace {

struct StageInfo {
  Stage stage;
  const char* name;
};

constexpr StageInfo kStages[] = {
    {Stage::simulate, "simulate"},   {Stage::gpis_fit, "gpis-fit"}, {Stage::gpis_render, "gpis-render"},
    {Stage::align, "align"},         {Stage::fuse, "fuse"},         {Stage::init_points, "init-points"},
    {Stage::train, "train"},         {Stage::eval, "eval"},
};

struct ManifestEntry {
  std::string input_hash;
  std::vector<std::pair<std::string, std::string>> outputs;  // relative path, sha256
};

class Manifest {
 public:
  explicit Manifest(fs::path path) : path_(std::move(path)) {
    if (!fs::exists(path_)) return;
    std::istringstream in(io::read_file(path_));
    std::string line;
    ManifestEntry* cur = nullptr;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string tag;
      ls >> tag;
      if (tag == "stage") {
        std::string name, hash;
        ls >> name >> hash;
        cur = &entries_[name];
        *cur = {hash, {}};
      } else if (tag == "out" && cur != nullptr) {
        std::string rel, hash;
        ls >> rel >> hash;
        cur->outputs.emplace_back(rel, hash);
      }
    }
  }

  const ManifestEntry* find(const std::string& stage) const {
    auto it = entries_.find(stage);
    return it == entries_.end() ? nullptr : &it->second;
  }
  void set(const std::string& stage, ManifestEntry e) { entries_[stage] = std::move(e); }

  void save() const {
    std::string out = std::string("vtfuse ") + kVersion + "\n";
    for (const auto& info : kStages) {
      auto it = entries_.find(info.name);
      if (it == entries_.end()) continue;
      out += std::string("stage ") + info.name + " " + it->second.input_hash + "\n";
      for (const auto& [rel, hash] : it->second.outputs) out += "out " + rel + " " + hash + "\n";
    }
    io::write_file_atomic(path_, out);
  }

 private:
  fs::path path_;
  std::map<std::string, ManifestEntry> entries_;
};

class LockFile {
 public:
  explicit LockFile(const fs::path& path) : path_(path) {
    fs::create_directories(path.parent_path());
    std::FILE* f = std::fopen(path.c_str(), "wx");
    if (f == nullptr)
      throw IoError("output directory is locked by " + path.string() +
                    "; another run is active or a previous run crashed (delete the file to continue)");
    std::fclose(f);
  }
  ~LockFile() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  LockFile(const LockFile&) = delete;
  LockFile& operator=(const LockFile&) = delete;

 private:
  fs::path path_;
};

struct Input {
  fs::path path;
  Stage producer;
};

class Runner {
 public:
  Runner(const SceneConfig& cfg, std::ostream& log)
      : cfg_(cfg), out_(fs::absolute(cfg.output)), data_(fs::absolute(cfg.dataset)), log_(log),
        manifest_(out_ / "manifest.txt") {}

  void run(Stage s);

 private:
  std::string rel(const fs::path& p) const { return fs::relative(p, out_).generic_string(); }
  fs::path gpis_dir() const { return out_ / "gpis"; }
  fs::path align_dir() const { return out_ / "align"; }
  fs::path fuse_dir() const { return out_ / "fuse"; }
  fs::path model_path() const { return gpis_dir() / "model.gpis"; }

  std::vector<io::NamedCamera> cameras() const {
    const fs::path p = data_ / "cameras.txt";
    if (!fs::exists(p)) throw DependencyError("missing " + p.string() + "; run 'simulate' first");
    return io::read_cameras(p);
  }

  std::vector<fs::path> touch_files() const {
    std::vector<fs::path> files;
    if (fs::is_directory(data_ / "touches"))
      for (const auto& e : fs::directory_iterator(data_ / "touches"))
        if (e.is_regular_file() && e.path().extension() == ".ply") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DependencyError("no touch files in " + (data_ / "touches").string() + "; run 'simulate' first");
    return files;
  }

  // Fails with a dependency error naming the upstream stage, otherwise hashes
  // the stage identity, its config text and every input file.
  std::string input_hash(Stage s, const std::vector<Input>& inputs, const std::string& config_text) const {
    std::string blob = std::string("stage ") + stage_name(s) + " " + kVersion + "\n" + config_text;
    for (const auto& in : inputs) {
      if (!fs::exists(in.path))
        throw DependencyError("stage " + stage_name(s) + " needs " + in.path.string() + "; run '" +
                              stage_name(in.producer) + "' first");
      blob += "in " + rel(in.path) + " " + io::sha256_hex(io::read_file(in.path)) + "\n";
    }
    return io::sha256_hex(blob);
  }

  bool up_to_date(Stage s, const std::string& hash) const {
    const ManifestEntry* e = manifest_.find(stage_name(s));
    if (e == nullptr || e->input_hash != hash) return false;
    for (const auto& [r, h] : e->outputs) {
      const fs::path p = out_ / r;
      if (!fs::exists(p) || io::sha256_hex(io::read_file(p)) != h) return false;
    }
    return true;
  }

  void record(Stage s, const std::string& hash, const std::vector<fs::path>& outputs) {
    ManifestEntry e{hash, {}};
    for (const auto& p : outputs) e.outputs.emplace_back(rel(p), io::sha256_hex(io::read_file(p)));
    manifest_.set(stage_name(s), std::move(e));
    manifest_.save();
  }

  std::vector<ViewData> load_views(bool need_gt) const;
  std::vector<DepthVarImage> load_gpis(const std::vector<io::NamedCamera>& cams) const;

  std::vector<fs::path> do_simulate();
  std::vector<fs::path> do_gpis_fit();
  std::vector<fs::path> do_gpis_render();
  std::vector<fs::path> do_align();
  std::vector<fs::path> do_fuse();
  std::vector<fs::path> do_init_points();
  std::vector<fs::path> do_train();
  std::vector<fs::path> do_eval();

  std::vector<Input> inputs_for(Stage s) const;
  std::string config_for(Stage s) const;

  const SceneConfig& cfg_;
  fs::path out_;
  fs::path data_;
  std::ostream& log_;
  Manifest manifest_;
};

std::vector<Input> Runner::inputs_for(Stage s) const {
  std::vector<Input> in;
  auto per_view = [&](auto&& fn) {
    for (const auto& nc : cameras()) fn(nc.name);
  };
  auto gpis_views = [&](const std::string& v) {
    in.push_back({gpis_dir() / (v + "_gpis_depth.pfm"), Stage::gpis_render});
    in.push_back({gpis_dir() / (v + "_gpis_var.pfm"), Stage::gpis_render});
  };
  switch (s) {
    case Stage::simulate:
      break;
    case Stage::gpis_fit:
      for (const auto& f : touch_files()) in.push_back({f, Stage::simulate});
      break;
    case Stage::gpis_render:
      in.push_back({model_path(), Stage::gpis_fit});
      in.push_back({data_ / "cameras.txt", Stage::simulate});
      break;
    case Stage::align:
      in.push_back({data_ / "cameras.txt", Stage::simulate});
      per_view([&](const std::string& v) {
        in.push_back({data_ / "mono" / (v + ".pfm"), Stage::simulate});
        in.push_back({data_ / "sparse" / (v + ".txt"), Stage::simulate});
        gpis_views(v);
      });
      break;
    case Stage::fuse:
      per_view([&](const std::string& v) {
        in.push_back({align_dir() / (v + "_vision_depth.pfm"), Stage::align});
        in.push_back({align_dir() / (v + "_vision_var.pfm"), Stage::align});
        gpis_views(v);
      });
      break;
    case Stage::init_points:
      in.push_back({model_path(), Stage::gpis_fit});
      in.push_back({data_ / "cameras.txt", Stage::simulate});
      per_view(gpis_views);
      break;
    case Stage::train:
      in.push_back({out_ / "init" / "points.ply", Stage::init_points});
      in.push_back({data_ / "cameras.txt", Stage::simulate});
      per_view([&](const std::string& v) {
        in.push_back({data_ / "rgb" / (v + ".ppm"), Stage::simulate});
        if (cfg_.train.supervision == SupervisionKind::fused) {
          in.push_back({fuse_dir() / (v + "_fused_depth.pfm"), Stage::fuse});
          in.push_back({fuse_dir() / (v + "_fused_var.pfm"), Stage::fuse});
          in.push_back({fuse_dir() / (v + "_provenance.pgm"), Stage::fuse});
        } else if (cfg_.train.supervision == SupervisionKind::vision) {
          in.push_back({align_dir() / (v + "_stage1_depth.pfm"), Stage::align});
          in.push_back({align_dir() / (v + "_stage1_var.pfm"), Stage::align});
        }
      });
      break;
    case Stage::eval:
      in.push_back({out_ / "train" / "splats.ply", Stage::train});
      in.push_back({data_ / "cameras.txt", Stage::simulate});
      per_view([&](const std::string& v) {
        in.push_back({data_ / "rgb" / (v + ".ppm"), Stage::simulate});
        in.push_back({data_ / "gt_depth" / (v + ".pfm"), Stage::simulate});
        in.push_back({data_ / "gt_depth" / (v + "_object.pgm"), Stage::simulate});
        gpis_views(v);
      });
      break;
  }
  return in;
}

std::string Runner::config_for(Stage s) const {
  switch (s) {
    case Stage::simulate: return "seed " + std::to_string(cfg_.seed) + "\n" + render_section(cfg_, "simulate");
    case Stage::gpis_fit: return render_section(cfg_, "gpis");
    case Stage::gpis_render: return render_section(cfg_, "march");
    case Stage::align: return render_section(cfg_, "align");
    case Stage::fuse: return {};
    case Stage::init_points:
    case Stage::train:
      return "seed " + std::to_string(cfg_.seed) + "\n" + render_section(cfg_, "loss") + render_section(cfg_, "train");
    case Stage::eval: return {};
  }
  return {};
}

void Runner::run(Stage s) {
  const std::string name = stage_name(s);
  if (s == Stage::simulate && !cfg_.simulate.enabled) {
    log_ << name << ": no [simulate] section, using dataset " << data_.string() << "\n";
    return;
  }
  const std::string hash = input_hash(s, inputs_for(s), config_for(s));
  if (up_to_date(s, hash)) {
    log_ << name << ": up to date, skipped\n";
    return;
  }
  log_ << name << ": running\n";
  std::vector<fs::path> outputs;
  switch (s) {
    case Stage::simulate: outputs = do_simulate(); break;
    case Stage::gpis_fit: outputs = do_gpis_fit(); break;
    case Stage::gpis_render: outputs = do_gpis_render(); break;
    case Stage::align: outputs = do_align(); break;
    case Stage::fuse: outputs = do_fuse(); break;
    case Stage::init_points: outputs = do_init_points(); break;
    case Stage::train: outputs = do_train(); break;
    case Stage::eval: outputs = do_eval(); break;
  }
  record(s, hash, outputs);
}

std::vector<ViewData> Runner::load_views(bool need_gt) const {
  Dataset d = read_dataset(data_);
  if (need_gt)
    for (const auto& v : d.views)
      if (!v.gt) throw DependencyError("view " + v.name + " has no ground truth; run 'simulate' first");
  return std::move(d.views);
}

std::vector<DepthVarImage> Runner::load_gpis(const std::vector<io::NamedCamera>& cams) const {
  std::vector<DepthVarImage> out;
  for (const auto& nc : cams) {
    DepthVarImage img(nc.camera);
    img.depth = io::read_pfm(gpis_dir() / (nc.name + "_gpis_depth.pfm"));
    img.variance = io::read_pfm(gpis_dir() / (nc.name + "_gpis_var.pfm"));
    if (img.depth.width() != nc.camera.width || img.depth.height() != nc.camera.height ||
        !img.depth.same_shape(img.variance))
      throw IoError(nc.name + ": GPIS render size does not match the camera");
    out.push_back(std::move(img));
  }
  return out;
}

std::vector<fs::path> Runner::do_simulate() {
  const Dataset d = simulate_dataset(cfg_.simulate, cfg_.seed);
  write_dataset(data_, d, cfg_);
  std::vector<fs::path> outs;
  for (const auto& f : touch_files()) outs.push_back(f);
  outs.push_back(data_ / "cameras.txt");
  outs.push_back(data_ / "scene.cfg");
  for (const auto& v : d.views) {
    outs.push_back(data_ / "sparse" / (v.name + ".txt"));
    outs.push_back(data_ / "mono" / (v.name + ".pfm"));
    outs.push_back(data_ / "rgb" / (v.name + ".ppm"));
    outs.push_back(data_ / "gt_depth" / (v.name + ".pfm"));
    outs.push_back(data_ / "gt_depth" / (v.name + "_object.pgm"));
  }
  return outs;
}

std::vector<fs::path> Runner::do_gpis_fit() {
  const auto touches = io::read_touch_dir(data_ / "touches");
  GpisFitReport rep;
  const GpisModel model = fit_gpis(touches, cfg_.gpis, &rep);
  save_model(model, model_path().string());
  const auto& p = model.params();
  std::string txt;
  txt += "points = " + std::to_string(rep.points) + "\n";
  txt += "voxel = " + io::fmt_double(rep.conditioning.voxel) + "\n";
  txt += "delta = " + io::fmt_double(rep.conditioning.delta) + "\n";
  txt += "epsilon = " + io::fmt_double(rep.conditioning.epsilon) + "\n";
  txt += "rho = " + io::fmt_double(p.rho) + "\n";
  txt += "sigma = " + io::fmt_double(p.sigma) + "\n";
  txt += "noise = " + io::fmt_double(p.noise) + "\n";
  txt += "prior_mean = " + io::fmt_double(p.prior_mean) + "\n";
  txt += "jitter = " + io::fmt_double(model.jitter()) + "\n";
  txt += "log_marginal_likelihood = " + io::fmt_double(rep.log_marginal_likelihood) + "\n";
  io::write_file_atomic(gpis_dir() / "fit.txt", txt);
  log_ << "gpis-fit: " << rep.points << " conditioning points, rho " << p.rho << "\n";
  return {model_path(), gpis_dir() / "fit.txt"};
}

std::vector<fs::path> Runner::do_gpis_render() {
  const GpisModel model = load_model(model_path().string());
  const GpisRenderOptions opt = render_options(cfg_.march, model);
  std::vector<fs::path> outs;
  for (const auto& nc : cameras()) {
    const DepthVarImage img = render_depth_variance(model, nc.camera, opt);
    const fs::path d = gpis_dir() / (nc.name + "_gpis_depth.pfm");
    const fs::path v = gpis_dir() / (nc.name + "_gpis_var.pfm");
    io::write_pfm(d, img.depth);
    io::write_pfm(v, img.variance);
    outs.insert(outs.end(), {d, v});
    log_ << "gpis-render: " << nc.name << " " << img.hit_count() << " hit pixels\n";
  }
  return outs;
}

std::vector<fs::path> Runner::do_align() {
  const auto cams = cameras();
  const auto gpis = load_gpis(cams);
  const auto views = load_views(false);
  std::vector<fs::path> outs;
  for (size_t i = 0; i < views.size(); ++i) {
    const auto& v = views[i];
    const AlignedVision s1 = align_vision(v.mono, v.sparse, nullptr, cfg_.align);
    const AlignedVision full = align_vision(v.mono, v.sparse, &gpis[i], cfg_.align);
    const fs::path base = align_dir() / v.name;
    const std::vector<fs::path> files = {
        base.string() + "_vision_depth.pfm", base.string() + "_vision_var.pfm", base.string() + "_stage1_depth.pfm",
        base.string() + "_stage1_var.pfm", base.string() + "_align.txt"};
    io::write_pfm(files[0], full.depth);
    io::write_pfm(files[1], full.variance);
    io::write_pfm(files[2], s1.depth);
    io::write_pfm(files[3], s1.variance);
    io::write_file_atomic(files[4], "s_star = " + io::fmt_double(full.s_star) + "\nt_star = " +
                                        io::fmt_double(full.t_star) + "\nt_gpis = " + io::fmt_double(full.t_gpis) +
                                        "\nsparse_samples = " + std::to_string(v.sparse.samples.size()) + "\n");
    if (full.t_gpis == 0.0) log_ << "align: " << v.name << " has no GPIS overlap; stage 2 left the depth unchanged\n";
    outs.insert(outs.end(), files.begin(), files.end());
  }
  return outs;
}

std::vector<fs::path> Runner::do_fuse() {
  const auto cams = cameras();
  const auto gpis = load_gpis(cams);
  std::vector<fs::path> outs;
  for (size_t i = 0; i < cams.size(); ++i) {
    const std::string& name = cams[i].name;
    AlignedVision av;
    av.depth = io::read_pfm(align_dir() / (name + "_vision_depth.pfm"));
    av.variance = io::read_pfm(align_dir() / (name + "_vision_var.pfm"));
    const FusedSupervision f = fuse_images(av, gpis[i]);
    Mask prov(f.provenance.width(), f.provenance.height());
    for (size_t k = 0; k < prov.size(); ++k) prov[k] = provenance_gray(f.provenance[k]);
    const fs::path base = fuse_dir() / name;
    const std::vector<fs::path> files = {base.string() + "_fused_depth.pfm", base.string() + "_fused_var.pfm",
                                         base.string() + "_provenance.pgm"};
    io::write_pfm(files[0], f.depth);
    io::write_pfm(files[1], f.variance);
    io::write_pgm(files[2], prov);
    outs.insert(outs.end(), files.begin(), files.end());
  }
  return outs;
}

std::vector<fs::path> Runner::do_init_points() {
  const auto cams = cameras();
  const auto gpis = load_gpis(cams);
  const auto views = load_views(false);
  const GpisModel model = load_model(model_path().string());
  const BoundingSphere b = bounding_sphere(model.conditioning(), cfg_.march.margin, 1e-3);
  const SplatCloud cloud = init_points(gpis, views, b, cfg_.train, derive_seed(cfg_.seed, 2));
  const fs::path p = out_ / "init" / "points.ply";
  io::write_splat_ply(p, cloud);
  log_ << "init-points: " << cloud.splats.size() << " splats\n";
  return {p};
}

std::vector<fs::path> Runner::do_train() {
  const auto views = load_views(false);
  const SplatCloud init = io::read_splat_ply(out_ / "init" / "points.ply");
  std::vector<TrainingView> tv;
  LossConfig loss = cfg_.loss;
  for (const auto& v : views) {
    TrainingView t;
    t.rgb = v.rgb;
    t.camera = v.camera;
    switch (cfg_.train.supervision) {
      case SupervisionKind::fused:
        t.supervision.depth = io::read_pfm(fuse_dir() / (v.name + "_fused_depth.pfm"));
        t.supervision.variance = io::read_pfm(fuse_dir() / (v.name + "_fused_var.pfm"));
        {
          const Mask prov = io::read_pgm(fuse_dir() / (v.name + "_provenance.pgm"));
          t.supervision.provenance = Image<Provenance>(prov.width(), prov.height());
          for (size_t k = 0; k < prov.size(); ++k) t.supervision.provenance[k] = provenance_from_gray(prov[k]);
        }
        break;
      case SupervisionKind::vision: {
        AlignedVision s1;
        s1.depth = io::read_pfm(align_dir() / (v.name + "_stage1_depth.pfm"));
        s1.variance = io::read_pfm(align_dir() / (v.name + "_stage1_var.pfm"));
        t.supervision = vision_supervision(s1);
        break;
      }
      case SupervisionKind::none:
        t.supervision = empty_supervision(v.camera.width, v.camera.height);
        loss.lambda = 0.0;
        break;
    }
    tv.push_back(std::move(t));
  }
  const TrainingResult res = optimize(init, tv, loss, cfg_.train.iters, cfg_.train.optimizer);
  const fs::path splats = out_ / "train" / "splats.ply";
  const fs::path logp = out_ / "train" / "log.csv";
  io::write_splat_ply(splats, res.cloud);
  std::string csv = "iter,color_loss,depth_loss,lambda\n";
  for (const auto& r : res.log)
    csv += std::to_string(r.iter) + "," + io::fmt_double(r.color_loss) + "," + io::fmt_double(r.depth_loss) + "," +
           io::fmt_double(r.lambda) + "\n";
  io::write_file_atomic(logp, csv);
  if (!res.log.empty())
    log_ << "train: color loss " << res.log.front().color_loss << " -> " << res.log.back().color_loss << "\n";
  return {splats, logp};
}

std::vector<fs::path> Runner::do_eval() {
  const auto cams = cameras();
  const auto gpis = load_gpis(cams);
  const auto views = load_views(true);
  const SplatCloud cloud = io::read_splat_ply(out_ / "train" / "splats.ply");
  const EvalReport rep = evaluate(cloud, views, gpis);
  const fs::path txt = out_ / "eval" / "report.txt";
  const fs::path csv = out_ / "eval" / "report.csv";
  io::write_file_atomic(txt, rep.to_text());
  io::write_file_atomic(csv, rep.to_csv());
  log_ << rep.to_text();
  return {txt, csv};
}

}  // namespace

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> s = [] {
    std::vector<Stage> v;
    for (const auto& info : kStages) v.push_back(info.stage);
    return v;
  }();
  return s;
}

std::string stage_name(Stage s) {
  for (const auto& info : kStages)
    if (info.stage == s) return info.name;
  return "?";
}

std::vector<Stage> parse_stages(const std::string& list) {
  std::vector<Stage> out;
  std::istringstream in(list);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    const auto b = tok.find_first_not_of(' ');
    const auto e = tok.find_last_not_of(' ');
    if (b == std::string::npos) continue;
    tok = tok.substr(b, e - b + 1);
    bool found = false;
    for (const auto& info : kStages)
      if (tok == info.name) {
        if (std::find(out.begin(), out.end(), info.stage) == out.end()) out.push_back(info.stage);
        found = true;
      }
    if (!found) throw ConfigError("unknown stage '" + tok + "'");
  }
  if (out.empty()) throw ConfigError("no stages requested");
  std::sort(out.begin(), out.end());
  return out;
}

int run_pipeline(const SceneConfig& cfg, const std::vector<Stage>& stages, std::ostream& log) {
  try {
    const LockFile lock(fs::absolute(cfg.output) / ".lock");
    Runner runner(cfg, log);
    std::vector<Stage> ordered = stages;
    std::sort(ordered.begin(), ordered.end());
    for (Stage s : ordered) runner.run(s);
    return 0;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DependencyError& e) {
    log << "dependency error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    log << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace vtf
