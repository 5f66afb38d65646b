#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include <unistd.h>

#include "vtfuse/io.hpp"

using namespace vtf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("vtfuse_test_io_" + std::to_string(::getpid())) / name;
  fs::create_directories(p.parent_path());
  return p;
}

}  // namespace

TEST_CASE("sha256 known vectors") {
  CHECK(io::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("decimal formatting round trips") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 200; ++i) {
    const double v = u(rng) * std::pow(10.0, i % 20 - 10);
    CHECK(std::stod(io::fmt_double(v)) == v);
  }
  CHECK(io::fmt_double(0.5) == "0.5");
  CHECK(io::fmt_double(std::numeric_limits<double>::infinity()) == "inf");
}

TEST_CASE("atomic write replaces contents and leaves no temp file") {
  const auto p = scratch("atomic/sub/file.txt");
  io::write_file_atomic(p, "first");
  io::write_file_atomic(p, "second");
  CHECK(io::read_file(p) == "second");
  for (const auto& e : fs::directory_iterator(p.parent_path())) CHECK(e.path().filename() == "file.txt");
  CHECK_THROWS_AS(io::read_file(p.parent_path() / "missing"), IoError);
}

TEST_CASE("PFM round trip keeps float precision and orientation") {
  ImageD img(5, 3);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 5; ++x) img(x, y) = 1.0 + x + 10.0 * y + 0.125;
  img(4, 2) = 1e10;
  const auto bytes = io::encode_pfm(img);
  CHECK(bytes.rfind("Pf\n5 3\n-1", 0) == 0);
  const auto back = io::decode_pfm(bytes);
  CHECK(back == img);
  const auto p = scratch("d.pfm");
  io::write_pfm(p, img);
  CHECK(io::read_pfm(p) == img);
  CHECK_THROWS_AS(io::decode_pfm(bytes.substr(0, bytes.size() - 4)), IoError);
  CHECK_THROWS_AS(io::decode_pfm("PF\n1 1\n-1\n0000"), IoError);
}

TEST_CASE("PGM and PPM round trips") {
  Mask m(4, 2, 0);
  m(1, 1) = 255;
  m(3, 0) = 85;
  const auto pm = scratch("m.pgm");
  io::write_pgm(pm, m);
  CHECK(io::read_pgm(pm) == m);

  ImageRgb c(3, 2, Vec3::Zero());
  c(0, 0) = Vec3(1, 0.5, 0);
  c(2, 1) = Vec3(2.0, -1.0, 0.2);
  const auto pc = scratch("c.ppm");
  io::write_ppm(pc, c);
  const auto back = io::read_ppm(pc);
  CHECK(back(0, 0).isApprox(Vec3(1, 128.0 / 255, 0)));
  CHECK(back(2, 1).isApprox(Vec3(1, 0, 51.0 / 255)));
}

TEST_CASE("touch PLY round trip") {
  TouchReading t;
  t.points = {Vec3(0.1, 0.2, 0.3), Vec3(-1e-7, 5, 1.0 / 3.0)};
  t.normals = {Vec3(0, 0, 1), Vec3(1, 0, 0)};
  t.sensor_pose.translation() = Vec3(1, 2, 3);
  t.sensor_pose.linear() = Eigen::AngleAxisd(0.3, Vec3::UnitY()).toRotationMatrix();
  const auto dir = scratch("touch/a.ply").parent_path();
  io::write_touch_ply(dir / "b.ply", t);
  io::write_touch_ply(dir / "a.ply", t);
  const auto back = io::read_touch_ply(dir / "a.ply");
  CHECK(back.points == t.points);
  CHECK(back.normals == t.normals);
  CHECK(back.sensor_pose.matrix() == t.sensor_pose.matrix());
  CHECK(io::read_touch_dir(dir).size() == 2);
  io::write_file_atomic(dir / "c.ply", "ply\nformat ascii 1.0\nelement vertex 2\nend_header\n1 2 3\n");
  CHECK_THROWS_AS(io::read_touch_ply(dir / "c.ply"), IoError);
}

TEST_CASE("splat PLY round trip") {
  SplatCloud c;
  c.background = Vec3(0.1, 0.2, 0.3);
  c.splats.push_back({Vec3(1, 2, 3), Vec3(0.5, 0.25, 1), 0.7, 0.15});
  c.splats.push_back({Vec3(-1, 0, 2), Vec3(0, 0, 0), -3.0, 0.05});
  const auto p = scratch("s.ply");
  io::write_splat_ply(p, c);
  const auto back = io::read_splat_ply(p);
  REQUIRE(back.splats.size() == 2);
  CHECK(back.background == c.background);
  for (size_t i = 0; i < 2; ++i) {
    CHECK(back.splats[i].position == c.splats[i].position);
    CHECK(back.splats[i].color == c.splats[i].color);
    CHECK(back.splats[i].radius == c.splats[i].radius);
    CHECK(back.splats[i].opacity_logit == doctest::Approx(c.splats[i].opacity_logit).epsilon(1e-12));
  }
}

TEST_CASE("camera file round trip and validation") {
  io::NamedCamera a;
  a.name = "front";
  a.camera.width = 64;
  a.camera.height = 48;
  a.camera.fx = a.camera.fy = 60;
  a.camera.cx = 31.5;
  a.camera.cy = 23.5;
  a.camera.pose = look_at(Vec3(0, -4, 1.5), Vec3::Zero(), Vec3::UnitZ());
  io::NamedCamera b = a;
  b.name = "back";
  const auto text = io::encode_cameras({a, b});
  const auto back = io::decode_cameras(text);
  REQUIRE(back.size() == 2);
  CHECK(back[1].name == "back");
  CHECK(back[0].camera.pose.matrix() == a.camera.pose.matrix());
  CHECK(back[0].camera.cx == 31.5);
  CHECK_THROWS_AS(io::decode_cameras(io::encode_cameras({a, a})), IoError);
  CHECK_THROWS_AS(io::decode_cameras("view x 1 1 1 1 0 0\n1 0 0 0\n"), IoError);
}

TEST_CASE("sparse depth round trip") {
  SparseDepth s;
  s.samples = {{1, 2, 3.5}, {10, 0, 0.1}};
  const auto p = scratch("sp.txt");
  io::write_sparse(p, s);
  const auto back = io::read_sparse(p);
  REQUIRE(back.samples.size() == 2);
  CHECK(back.samples[0].u == 1);
  CHECK(back.samples[1].depth == 0.1);
  io::write_file_atomic(p, "# comment\n1 2 3\n4 5\n");
  CHECK_THROWS_AS(io::read_sparse(p), IoError);
}
