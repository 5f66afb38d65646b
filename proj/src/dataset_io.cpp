#include <algorithm>
#include <cmath>
#include <sstream>

#include "vtfuse/io.hpp"

namespace vtf::io {
namespace fs = std::filesystem;
namespace {

struct PlyHeader {
  size_t vertex_count = 0;
  std::vector<std::string> properties;
  std::vector<std::string> comments;
};

// Parses an ASCII PLY header and leaves `in` positioned at the first vertex line.
PlyHeader read_ply_header(std::istream& in, const fs::path& path) {
  std::string line;
  if (!std::getline(in, line) || line != "ply") throw IoError(path.string() + ": not a PLY file");
  PlyHeader h;
  bool in_vertex = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "end_header") return h;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") throw IoError(path.string() + ": only ASCII PLY is supported");
    } else if (word == "comment") {
      std::string rest;
      std::getline(ls, rest);
      h.comments.push_back(rest);
    } else if (word == "element") {
      std::string name;
      ls >> name;
      in_vertex = name == "vertex";
      if (in_vertex && !(ls >> h.vertex_count)) throw IoError(path.string() + ": bad vertex count");
    } else if (word == "property") {
      std::string type, name;
      ls >> type >> name;
      if (in_vertex) h.properties.push_back(name);
    }
  }
  throw IoError(path.string() + ": PLY header has no end_header");
}

std::vector<double> read_row(std::istream& in, size_t n, const fs::path& path) {
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": fewer vertices than declared");
  std::istringstream ls(line);
  std::vector<double> row(n);
  for (auto& v : row)
    if (!(ls >> v)) throw IoError(path.string() + ": malformed vertex row '" + line + "'");
  return row;
}

void expect_properties(const PlyHeader& h, const std::vector<std::string>& want, const fs::path& path) {
  if (h.properties != want) throw IoError(path.string() + ": unexpected vertex properties");
}

}  // namespace

void write_touch_ply(const fs::path& path, const TouchReading& touch) {
  if (touch.points.size() != touch.normals.size()) throw InputError("touch points and normals differ in count");
  std::ostringstream out;
  out << "ply\nformat ascii 1.0\ncomment sensor_pose";
  const Eigen::Matrix<double, 3, 4> m = touch.sensor_pose.matrix().topRows<3>();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) out << ' ' << fmt_double(m(r, c));
  out << "\nelement vertex " << touch.points.size() << "\n";
  for (const char* p : {"x", "y", "z", "nx", "ny", "nz"}) out << "property double " << p << "\n";
  out << "end_header\n";
  for (size_t i = 0; i < touch.points.size(); ++i) {
    const Vec3& p = touch.points[i];
    const Vec3& n = touch.normals[i];
    out << fmt_double(p.x()) << ' ' << fmt_double(p.y()) << ' ' << fmt_double(p.z()) << ' ' << fmt_double(n.x())
        << ' ' << fmt_double(n.y()) << ' ' << fmt_double(n.z()) << '\n';
  }
  write_file_atomic(path, out.str());
}

TouchReading read_touch_ply(const fs::path& path) {
  std::istringstream in(read_file(path));
  const PlyHeader h = read_ply_header(in, path);
  expect_properties(h, {"x", "y", "z", "nx", "ny", "nz"}, path);
  TouchReading t;
  for (const auto& c : h.comments) {
    std::istringstream cs(c);
    std::string tag;
    cs >> tag;
    if (tag != "sensor_pose") continue;
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    for (int r = 0; r < 3; ++r)
      for (int col = 0; col < 4; ++col)
        if (!(cs >> m(r, col))) throw IoError(path.string() + ": malformed sensor_pose comment");
    t.sensor_pose = Pose(m);
  }
  t.points.reserve(h.vertex_count);
  t.normals.reserve(h.vertex_count);
  for (size_t i = 0; i < h.vertex_count; ++i) {
    const auto row = read_row(in, 6, path);
    t.points.emplace_back(row[0], row[1], row[2]);
    t.normals.emplace_back(row[3], row[4], row[5]);
  }
  return t;
}

std::vector<TouchReading> read_touch_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string() + ": touch directory not found");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".ply") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<TouchReading> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(read_touch_ply(f));
  return out;
}

void write_splat_ply(const fs::path& path, const SplatCloud& cloud) {
  std::ostringstream out;
  out << "ply\nformat ascii 1.0\ncomment background " << fmt_double(cloud.background.x()) << ' '
      << fmt_double(cloud.background.y()) << ' ' << fmt_double(cloud.background.z()) << "\nelement vertex "
      << cloud.splats.size() << "\n";
  for (const char* p : {"x", "y", "z", "r", "g", "b", "opacity", "radius"}) out << "property double " << p << "\n";
  out << "end_header\n";
  for (const auto& s : cloud.splats) {
    out << fmt_double(s.position.x()) << ' ' << fmt_double(s.position.y()) << ' ' << fmt_double(s.position.z())
        << ' ' << fmt_double(s.color.x()) << ' ' << fmt_double(s.color.y()) << ' ' << fmt_double(s.color.z()) << ' '
        << fmt_double(s.alpha()) << ' ' << fmt_double(s.radius) << '\n';
  }
  write_file_atomic(path, out.str());
}

SplatCloud read_splat_ply(const fs::path& path) {
  std::istringstream in(read_file(path));
  const PlyHeader h = read_ply_header(in, path);
  expect_properties(h, {"x", "y", "z", "r", "g", "b", "opacity", "radius"}, path);
  SplatCloud cloud;
  for (const auto& c : h.comments) {
    std::istringstream cs(c);
    std::string tag;
    cs >> tag;
    if (tag == "background") cs >> cloud.background.x() >> cloud.background.y() >> cloud.background.z();
  }
  cloud.splats.reserve(h.vertex_count);
  for (size_t i = 0; i < h.vertex_count; ++i) {
    const auto row = read_row(in, 8, path);
    Splat s;
    s.position = Vec3(row[0], row[1], row[2]);
    s.color = Vec3(row[3], row[4], row[5]);
    const double a = std::clamp(row[6], 1e-6, 1.0 - 1e-6);
    s.opacity_logit = std::log(a / (1.0 - a));
    s.radius = row[7];
    if (!(s.radius > 0.0)) throw IoError(path.string() + ": splat radius must be positive");
    cloud.splats.push_back(s);
  }
  return cloud;
}

std::string encode_cameras(const std::vector<NamedCamera>& cams) {
  std::ostringstream out;
  for (const auto& nc : cams) {
    const auto& c = nc.camera;
    out << "view " << nc.name << ' ' << c.width << ' ' << c.height << ' ' << fmt_double(c.fx) << ' '
        << fmt_double(c.fy) << ' ' << fmt_double(c.cx) << ' ' << fmt_double(c.cy) << '\n';
    const Eigen::Matrix4d m = c.pose.matrix();
    for (int r = 0; r < 4; ++r) {
      for (int col = 0; col < 4; ++col) out << (col ? " " : "") << fmt_double(m(r, col));
      out << '\n';
    }
  }
  return out.str();
}

std::vector<NamedCamera> decode_cameras(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<NamedCamera> cams;
  std::string word;
  while (in >> word) {
    if (word != "view") throw IoError("cameras: expected 'view', got '" + word + "'");
    NamedCamera nc;
    auto& c = nc.camera;
    if (!(in >> nc.name >> c.width >> c.height >> c.fx >> c.fy >> c.cx >> c.cy))
      throw IoError("cameras: malformed view line");
    Eigen::Matrix4d m;
    for (int r = 0; r < 4; ++r)
      for (int col = 0; col < 4; ++col)
        if (!(in >> m(r, col))) throw IoError("cameras: truncated pose for view " + nc.name);
    c.pose = Pose(m);
    c.validate();
    for (const auto& other : cams)
      if (other.name == nc.name) throw IoError("cameras: duplicate view name " + nc.name);
    cams.push_back(std::move(nc));
  }
  return cams;
}

void write_cameras(const fs::path& path, const std::vector<NamedCamera>& cams) {
  write_file_atomic(path, encode_cameras(cams));
}

std::vector<NamedCamera> read_cameras(const fs::path& path) { return decode_cameras(read_file(path)); }

void write_sparse(const fs::path& path, const SparseDepth& sparse) {
  std::ostringstream out;
  for (const auto& s : sparse.samples) out << s.u << ' ' << s.v << ' ' << fmt_double(s.depth) << '\n';
  write_file_atomic(path, out.str());
}

SparseDepth read_sparse(const fs::path& path) {
  std::istringstream in(read_file(path));
  SparseDepth out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    SparseSample s{};
    if (!(ls >> s.u >> s.v >> s.depth)) throw IoError(path.string() + ": malformed sparse row '" + line + "'");
    out.samples.push_back(s);
  }
  return out;
}

}  // namespace vtf::io
