#include <bit>
#include <cstdint>
#include <cstring>

#include "vtfuse/gpis.hpp"
#include "vtfuse/io.hpp"

namespace vtf {
namespace {

constexpr std::uint32_t kModelVersion = 1;

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void raw(std::string_view s) { buf_.append(s); }
  const std::string& bytes() const { return buf_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string_view b, std::string path) : b_(b), path_(std::move(path)) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::string_view raw(size_t n) {
    need(n);
    auto s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == b_.size(); }
  void need(size_t n) const {
    if (b_.size() - pos_ < n) throw IoError(path_ + ": truncated GPIS model");
  }

 private:
  std::uint64_t get(int n) {
    need(static_cast<size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += static_cast<size_t>(n);
    return v;
  }
  std::string_view b_;
  size_t pos_ = 0;
  std::string path_;
};

}  // namespace

void save_model(const GpisModel& model, const std::string& path) {
  const auto& set = model.conditioning();
  const auto& p = model.params();
  const size_t n = set.size();
  Writer w;
  w.raw("GPIS");
  w.u32(kModelVersion);
  w.u64(n);
  for (double v : {p.rho, p.sigma, p.noise, p.prior_mean, model.jitter(), set.delta, set.epsilon}) w.f64(v);
  for (const auto& x : set.locations)
    for (int k = 0; k < 3; ++k) w.f64(x[k]);
  for (double t : set.targets) w.f64(t);
  for (auto l : set.labels) w.u8(static_cast<std::uint8_t>(l));
  const Eigen::MatrixXd& L = model.factor();
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j <= i; ++j) w.f64(L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
  io::write_file_atomic(path, w.bytes());
}

GpisModel load_model(const std::string& path) {
  const std::string bytes = io::read_file(path);
  Reader r(bytes, path);
  if (r.raw(4) != "GPIS") throw IoError(path + ": not a GPIS model file");
  if (const auto v = r.u32(); v != kModelVersion)
    throw IoError(path + ": unsupported GPIS model version " + std::to_string(v));
  const std::uint64_t n = r.u64();
  // Cheap sanity check before allocating n^2 storage.
  r.need(n * (3 * 8 + 8 + 1));
  KernelParams p;
  p.rho = r.f64();
  p.sigma = r.f64();
  p.noise = r.f64();
  p.prior_mean = r.f64();
  const double jitter = r.f64();
  ConditioningSet set;
  set.delta = r.f64();
  set.epsilon = r.f64();
  set.locations.resize(n);
  for (auto& x : set.locations)
    for (int k = 0; k < 3; ++k) x[k] = r.f64();
  set.targets.resize(n);
  for (auto& t : set.targets) t = r.f64();
  set.labels.resize(n);
  for (auto& l : set.labels) {
    const auto raw = r.u8();
    if (raw > 3) throw IoError(path + ": invalid point label");
    l = static_cast<PointClass>(raw);
  }
  r.need(n * (n + 1) / 2 * 8);
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j <= i; ++j) L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r.f64();
  if (!r.at_end()) throw IoError(path + ": trailing bytes after GPIS model");
  return GpisModel::from_factor(std::move(set), p, jitter, std::move(L));
}

}  // namespace vtf
