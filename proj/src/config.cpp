#include "vtfuse/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "vtfuse/io.hpp"

namespace vtf {
namespace fs = std::filesystem;
namespace {

struct ParseError {
  std::string message;
};

double parse_double(const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out))
    throw ParseError{"expected a number, got '" + v + "'"};
  return out;
}

long long parse_int(const std::string& v) {
  long long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ParseError{"expected an integer, got '" + v + "'"};
  return out;
}

std::vector<double> parse_list(const std::string& v) {
  std::istringstream in(v);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) out.push_back(parse_double(tok));
  if (out.empty()) throw ParseError{"expected at least one number"};
  return out;
}

std::optional<double> parse_auto(const std::string& v) {
  if (v == "auto") return std::nullopt;
  return parse_double(v);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ParseError{what};
}

double positive(const std::string& v) {
  const double x = parse_double(v);
  require(x > 0.0, "must be positive");
  return x;
}

double nonnegative(const std::string& v) {
  const double x = parse_double(v);
  require(x >= 0.0, "must be nonnegative");
  return x;
}

int count(const std::string& v, long long lo, long long hi) {
  const long long x = parse_int(v);
  require(x >= lo && x <= hi, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return static_cast<int>(x);
}

std::optional<double> positive_auto(const std::string& v) {
  auto x = parse_auto(v);
  require(!x || *x > 0.0, "must be positive or auto");
  return x;
}

std::string fmt(double v) { return io::fmt_double(v); }
std::string fmt(const std::optional<double>& v) { return v ? io::fmt_double(*v) : "auto"; }
std::string fmt(const Vec3& v) { return fmt(v.x()) + " " + fmt(v.y()) + " " + fmt(v.z()); }

Vec3 parse_vec3(const std::string& v) {
  const auto xs = parse_list(v);
  require(xs.size() == 3, "expected three numbers");
  return Vec3(xs[0], xs[1], xs[2]);
}

struct Key {
  std::string section;
  std::string name;
  std::function<void(SceneConfig&, const std::string&, const fs::path&)> set;
  std::function<std::string(const SceneConfig&)> get;
};

const char* shape_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::sphere: return "sphere";
    case ShapeKind::box: return "box";
    case ShapeKind::torus: return "torus";
  }
  return "sphere";
}

const std::vector<Key>& keys() {
  using C = SceneConfig;
  using P = const fs::path&;
  using S = const std::string&;
  static const std::vector<Key> table = {
      {"scene", "dataset", [](C& c, S v, P b) { c.dataset = b / v; }, [](const C& c) { return c.dataset.string(); }},
      {"scene", "output", [](C& c, S v, P b) { c.output = b / v; }, [](const C& c) { return c.output.string(); }},
      {"scene", "seed",
       [](C& c, S v, P) {
         const long long x = parse_int(v);
         require(x >= 0, "must be nonnegative");
         c.seed = static_cast<std::uint64_t>(x);
       },
       [](const C& c) { return std::to_string(c.seed); }},

      {"simulate", "shape",
       [](C& c, S v, P) {
         if (v == "sphere") c.simulate.shape.kind = ShapeKind::sphere;
         else if (v == "box") c.simulate.shape.kind = ShapeKind::box;
         else if (v == "torus") c.simulate.shape.kind = ShapeKind::torus;
         else throw ParseError{"expected sphere, box or torus"};
       },
       [](const C& c) { return std::string(shape_name(c.simulate.shape.kind)); }},
      {"simulate", "size", [](C& c, S v, P) { c.simulate.shape.size = parse_vec3(v); },
       [](const C& c) { return fmt(c.simulate.shape.size); }},
      {"simulate", "floor",
       [](C& c, S v, P) {
         require(v == "true" || v == "false", "expected true or false");
         c.simulate.floor = v == "true";
       },
       [](const C& c) { return std::string(c.simulate.floor ? "true" : "false"); }},
      {"simulate", "views", [](C& c, S v, P) { c.simulate.views = count(v, 1, 64); },
       [](const C& c) { return std::to_string(c.simulate.views); }},
      {"simulate", "ring_radius", [](C& c, S v, P) { c.simulate.ring_radius = positive(v); },
       [](const C& c) { return fmt(c.simulate.ring_radius); }},
      {"simulate", "ring_height", [](C& c, S v, P) { c.simulate.ring_height = parse_double(v); },
       [](const C& c) { return fmt(c.simulate.ring_height); }},
      {"simulate", "width", [](C& c, S v, P) { c.simulate.width = count(v, 1, 4096); },
       [](const C& c) { return std::to_string(c.simulate.width); }},
      {"simulate", "height", [](C& c, S v, P) { c.simulate.height = count(v, 1, 4096); },
       [](const C& c) { return std::to_string(c.simulate.height); }},
      {"simulate", "focal", [](C& c, S v, P) { c.simulate.focal = positive(v); },
       [](const C& c) { return fmt(c.simulate.focal); }},
      {"simulate", "touches", [](C& c, S v, P) { c.simulate.touches = count(v, 1, 100000); },
       [](const C& c) { return std::to_string(c.simulate.touches); }},
      {"simulate", "patch_radius", [](C& c, S v, P) { c.simulate.patch_radius = nonnegative(v); },
       [](const C& c) { return fmt(c.simulate.patch_radius); }},
      {"simulate", "points_per_touch", [](C& c, S v, P) { c.simulate.points_per_touch = count(v, 1, 100000); },
       [](const C& c) { return std::to_string(c.simulate.points_per_touch); }},
      {"simulate", "point_sigma", [](C& c, S v, P) { c.simulate.noise.point_sigma = nonnegative(v); },
       [](const C& c) { return fmt(c.simulate.noise.point_sigma); }},
      {"simulate", "normal_sigma", [](C& c, S v, P) { c.simulate.noise.normal_sigma = nonnegative(v); },
       [](const C& c) { return fmt(c.simulate.noise.normal_sigma); }},
      {"simulate", "sparse_a", [](C& c, S v, P) { c.simulate.noise.sparse_a = nonnegative(v); },
       [](const C& c) { return fmt(c.simulate.noise.sparse_a); }},
      {"simulate", "sparse_fraction",
       [](C& c, S v, P) {
         const double x = parse_double(v);
         require(x > 0.0 && x <= 0.01, "must lie in (0, 0.01]");
         c.simulate.sparse_fraction = x;
       },
       [](const C& c) { return fmt(c.simulate.sparse_fraction); }},
      {"simulate", "mono_scale", [](C& c, S v, P) { c.simulate.mono.scale = positive(v); },
       [](const C& c) { return fmt(c.simulate.mono.scale); }},
      {"simulate", "mono_offset", [](C& c, S v, P) { c.simulate.mono.offset = parse_double(v); },
       [](const C& c) { return fmt(c.simulate.mono.offset); }},
      {"simulate", "mono_object_bias", [](C& c, S v, P) { c.simulate.mono.object_bias = parse_double(v); },
       [](const C& c) { return fmt(c.simulate.mono.object_bias); }},
      {"simulate", "mono_distortion",
       [](C& c, S v, P) {
         const double x = parse_double(v);
         require(x >= 0.0 && x < 1.0, "must lie in [0, 1)");
         c.simulate.mono.distortion = x;
       },
       [](const C& c) { return fmt(c.simulate.mono.distortion); }},
      {"simulate", "object_color",
       [](C& c, S v, P) {
         const Vec3 x = parse_vec3(v);
         require(x.minCoeff() >= 0.0 && x.maxCoeff() <= 1.0, "components must lie in [0, 1]");
         c.simulate.object_color = x;
       },
       [](const C& c) { return fmt(c.simulate.object_color); }},

      {"gpis", "rho",
       [](C& c, S v, P) {
         auto xs = parse_list(v);
         for (double x : xs) require(x > 0.0, "every rho must be positive");
         c.gpis.rho_grid = std::move(xs);
       },
       [](const C& c) {
         std::string out;
         for (double x : c.gpis.rho_grid) out += (out.empty() ? "" : " ") + fmt(x);
         return out;
       }},
      {"gpis", "sigma", [](C& c, S v, P) { c.gpis.sigma = positive(v); }, [](const C& c) { return fmt(c.gpis.sigma); }},
      {"gpis", "noise", [](C& c, S v, P) { c.gpis.noise = nonnegative(v); },
       [](const C& c) { return fmt(c.gpis.noise); }},
      {"gpis", "delta", [](C& c, S v, P) { c.gpis.delta = positive_auto(v); },
       [](const C& c) { return fmt(c.gpis.delta); }},
      {"gpis", "epsilon", [](C& c, S v, P) { c.gpis.epsilon = positive_auto(v); },
       [](const C& c) { return fmt(c.gpis.epsilon); }},
      {"gpis", "n_slices", [](C& c, S v, P) { c.gpis.n_slices = count(v, 1, 1000); },
       [](const C& c) { return std::to_string(c.gpis.n_slices); }},
      {"gpis", "voxel",
       [](C& c, S v, P) {
         auto x = parse_auto(v);
         require(!x || *x >= 0.0, "must be nonnegative or auto");
         c.gpis.voxel = x;
       },
       [](const C& c) { return fmt(c.gpis.voxel); }},
      {"gpis", "max_points", [](C& c, S v, P) { c.gpis.max_points = static_cast<size_t>(count(v, 1, 8000)); },
       [](const C& c) { return std::to_string(c.gpis.max_points); }},
      {"gpis", "prior_mean", [](C& c, S v, P) { c.gpis.prior_mean = parse_auto(v); },
       [](const C& c) { return fmt(c.gpis.prior_mean); }},

      {"march", "alpha",
       [](C& c, S v, P) {
         const double x = parse_double(v);
         require(x > 0.0 && x <= 1.0, "must lie in (0, 1]");
         c.march.alpha = x;
       },
       [](const C& c) { return fmt(c.march.alpha); }},
      {"march", "hit_tol", [](C& c, S v, P) { c.march.hit_tol = positive_auto(v); },
       [](const C& c) { return fmt(c.march.hit_tol); }},
      {"march", "dt_min", [](C& c, S v, P) { c.march.dt_min = positive_auto(v); },
       [](const C& c) { return fmt(c.march.dt_min); }},
      {"march", "max_steps", [](C& c, S v, P) { c.march.max_steps = count(v, 1, 1000000); },
       [](const C& c) { return std::to_string(c.march.max_steps); }},
      {"march", "margin", [](C& c, S v, P) { c.march.margin = nonnegative(v); },
       [](const C& c) { return fmt(c.march.margin); }},

      {"align", "k", [](C& c, S v, P) { c.align.k = nonnegative(v); }, [](const C& c) { return fmt(c.align.k); }},
      {"align", "c", [](C& c, S v, P) { c.align.c = positive(v); }, [](const C& c) { return fmt(c.align.c); }},
      {"align", "max_gap", [](C& c, S v, P) { c.align.max_gap = nonnegative(v); },
       [](const C& c) { return fmt(c.align.max_gap); }},

      {"loss", "lambda", [](C& c, S v, P) { c.loss.lambda = nonnegative(v); },
       [](const C& c) { return fmt(c.loss.lambda); }},
      {"loss", "w", [](C& c, S v, P) { c.loss.w = nonnegative(v); }, [](const C& c) { return fmt(c.loss.w); }},
      {"loss", "beta",
       [](C& c, S v, P) {
         const double x = parse_double(v);
         require(x > 0.0 && x <= 1.0, "must lie in (0, 1]");
         c.loss.beta = x;
       },
       [](const C& c) { return fmt(c.loss.beta); }},
      {"loss", "alpha0", [](C& c, S v, P) { c.loss.alpha0 = positive(v); },
       [](const C& c) { return fmt(c.loss.alpha0); }},

      {"train", "iters", [](C& c, S v, P) { c.train.iters = count(v, 0, 10000000); },
       [](const C& c) { return std::to_string(c.train.iters); }},
      {"train", "step", [](C& c, S v, P) { c.train.optimizer.step = positive(v); },
       [](const C& c) { return fmt(c.train.optimizer.step); }},
      {"train", "position_scale", [](C& c, S v, P) { c.train.optimizer.position_scale = nonnegative(v); },
       [](const C& c) { return fmt(c.train.optimizer.position_scale); }},
      {"train", "color_scale", [](C& c, S v, P) { c.train.optimizer.color_scale = nonnegative(v); },
       [](const C& c) { return fmt(c.train.optimizer.color_scale); }},
      {"train", "opacity_scale", [](C& c, S v, P) { c.train.optimizer.opacity_scale = nonnegative(v); },
       [](const C& c) { return fmt(c.train.optimizer.opacity_scale); }},
      {"train", "supervision",
       [](C& c, S v, P) {
         if (v == "fused") c.train.supervision = SupervisionKind::fused;
         else if (v == "vision") c.train.supervision = SupervisionKind::vision;
         else if (v == "none") c.train.supervision = SupervisionKind::none;
         else throw ParseError{"expected fused, vision or none"};
       },
       [](const C& c) {
         switch (c.train.supervision) {
           case SupervisionKind::fused: return std::string("fused");
           case SupervisionKind::vision: return std::string("vision");
           case SupervisionKind::none: return std::string("none");
         }
         return std::string("fused");
       }},
      {"train", "init",
       [](C& c, S v, P) {
         if (v == "gpis") c.train.init = InitKind::gpis;
         else if (v == "random") c.train.init = InitKind::random;
         else throw ParseError{"expected gpis or random"};
       },
       [](const C& c) { return std::string(c.train.init == InitKind::gpis ? "gpis" : "random"); }},
      {"train", "random_points", [](C& c, S v, P) { c.train.random_points = count(v, 0, 1000000); },
       [](const C& c) { return std::to_string(c.train.random_points); }},
      {"train", "radius", [](C& c, S v, P) { c.train.radius = positive(v); },
       [](const C& c) { return fmt(c.train.radius); }},
      {"train", "surface_radius", [](C& c, S v, P) { c.train.surface_radius = positive(v); },
       [](const C& c) { return fmt(c.train.surface_radius); }},
      {"train", "init_alpha",
       [](C& c, S v, P) {
         const double x = parse_double(v);
         require(x > 0.0 && x < 1.0, "must lie in (0, 1)");
         c.train.init_alpha = x;
       },
       [](const C& c) { return fmt(c.train.init_alpha); }},
      {"train", "init_voxel", [](C& c, S v, P) { c.train.init_voxel = nonnegative(v); },
       [](const C& c) { return fmt(c.train.init_voxel); }},
  };
  return table;
}

const std::vector<std::string>& sections() {
  static const std::vector<std::string> s = {"scene", "simulate", "gpis", "march", "align", "loss", "train"};
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

SceneConfig parse_config(const std::string& text, const fs::path& base_dir, const std::string& origin) {
  SceneConfig cfg;
  cfg.dataset = base_dir / "dataset";
  cfg.output = base_dir / "out";
  std::map<std::string, const Key*> lookup;
  for (const auto& k : keys()) lookup[k.section + "." + k.name] = &k;

  std::set<std::string> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  auto fail = [&](const std::string& msg) { throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + msg); };

  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (std::find(sections().begin(), sections().end(), section) == sections().end())
        fail("unknown section [" + section + "]");
      if (section == "simulate") cfg.simulate.enabled = true;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) fail("key '" + key + "' appears before any [section]");
    const std::string full = section + "." + key;
    const auto it = lookup.find(full);
    if (it == lookup.end()) fail("unknown key '" + key + "' in [" + section + "]");
    if (!seen.insert(full).second) fail("duplicate key '" + key + "' in [" + section + "]");
    if (value.empty()) fail("key '" + key + "' has no value");
    try {
      it->second->set(cfg, value, base_dir);
    } catch (const ParseError& e) {
      fail(key + ": " + e.message);
    }
  }

  if (cfg.simulate.enabled) {
    try {
      cfg.simulate.shape.validate();
    } catch (const InputError& e) {
      throw ConfigError(origin + ": [simulate] " + e.what());
    }
  }
  return cfg;
}

SceneConfig validate_config(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw ConfigError(path.string() + ": config file not found");
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  const fs::path base = fs::absolute(path).parent_path();
  SceneConfig cfg = parse_config(text, base, path.string());
  cfg.source = path;
  if (!cfg.simulate.enabled && !fs::is_directory(cfg.dataset))
    throw ConfigError(path.string() + ": dataset directory " + cfg.dataset.string() +
                      " does not exist (add a [simulate] section to generate it)");
  return cfg;
}

std::string render_section(const SceneConfig& config, const std::string& section) {
  std::string out = "[" + section + "]\n";
  for (const auto& k : keys())
    if (k.section == section) out += k.name + " = " + k.get(config) + "\n";
  return out;
}

std::string render_config(const SceneConfig& config) {
  std::string out;
  for (const auto& s : sections()) {
    if (s == "simulate" && !config.simulate.enabled) continue;
    out += render_section(config, s);
  }
  return out;
}

}  // namespace vtf
