#include "vtfuse/gpis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <unordered_map>

#include <Eigen/Cholesky>

#include "vtfuse/simd/kernels.hpp"

namespace vtf {
namespace {

using CellKey = std::array<std::int64_t, 3>;

CellKey cell_of(const Vec3& p, double pitch) {
  return {static_cast<std::int64_t>(std::floor(p.x() / pitch)), static_cast<std::int64_t>(std::floor(p.y() / pitch)),
          static_cast<std::int64_t>(std::floor(p.z() / pitch))};
}

struct CellKeyHash {
  size_t operator()(const CellKey& k) const {
    size_t h = 1469598103934665603ull;
    for (auto v : k) h = (h ^ static_cast<size_t>(v)) * 1099511628211ull;
    return h;
  }
};

struct Oriented {
  Vec3 point;
  Vec3 normal;
};

// Cell-mean downsampling followed by a greedy thinning pass that enforces a
// minimum spacing of pitch/2 between retained points. Cells are visited in
// key order so the result does not depend on hash iteration order.
std::vector<Oriented> voxel_downsample(const std::vector<Oriented>& in, double pitch) {
  struct Acc {
    Vec3 p = Vec3::Zero();
    Vec3 n = Vec3::Zero();
    Vec3 first_normal = Vec3::Zero();
    size_t count = 0;
  };
  std::map<CellKey, Acc> cells;
  for (const auto& o : in) {
    auto& acc = cells[cell_of(o.point, pitch)];
    if (acc.count == 0) acc.first_normal = o.normal;
    acc.p += o.point;
    acc.n += o.normal;
    ++acc.count;
  }

  const double min_spacing = 0.5 * pitch;
  const double min_sq = min_spacing * min_spacing;
  std::unordered_map<CellKey, std::vector<size_t>, CellKeyHash> accepted_grid;
  std::vector<Oriented> out;
  out.reserve(cells.size());
  for (const auto& [key, acc] : cells) {
    Oriented rep;
    rep.point = acc.p / static_cast<double>(acc.count);
    const double nn = acc.n.norm();
    rep.normal = nn > 1e-9 ? Vec3(acc.n / nn) : acc.first_normal;

    const CellKey c = cell_of(rep.point, min_spacing);
    bool clash = false;
    for (std::int64_t dx = -1; dx <= 1 && !clash; ++dx)
      for (std::int64_t dy = -1; dy <= 1 && !clash; ++dy)
        for (std::int64_t dz = -1; dz <= 1 && !clash; ++dz) {
          auto it = accepted_grid.find({c[0] + dx, c[1] + dy, c[2] + dz});
          if (it == accepted_grid.end()) continue;
          for (size_t j : it->second)
            if ((out[j].point - rep.point).squaredNorm() < min_sq) {
              clash = true;
              break;
            }
        }
    if (clash) continue;
    accepted_grid[c].push_back(out.size());
    out.push_back(rep);
  }
  return out;
}

simd::MaternCoeffs coeffs_of(const KernelParams& p) {
  return {std::numbers::sqrt3 / p.rho, p.sigma * p.sigma};
}

}  // namespace

std::vector<Vec3> ConditioningSet::surface_points() const {
  std::vector<Vec3> out;
  for (size_t i = 0; i < locations.size(); ++i)
    if (labels[i] == PointClass::surface) out.push_back(locations[i]);
  return out;
}

double touch_extent(std::span<const TouchReading> touches) {
  Vec3 centroid = Vec3::Zero();
  size_t n = 0;
  for (const auto& t : touches)
    for (const auto& p : t.points) {
      centroid += p;
      ++n;
    }
  if (n == 0) throw InputError("no tactile data");
  centroid /= static_cast<double>(n);
  double r = 0.0;
  for (const auto& t : touches)
    for (const auto& p : t.points) r = std::max(r, (p - centroid).norm());
  return r;
}

ConditioningOptions ConditioningOptions::defaults_for(std::span<const TouchReading> touches) {
  const double r = std::max(touch_extent(touches), 1e-3);
  ConditioningOptions opt;
  opt.delta = 0.02 * r;
  opt.epsilon = 0.01 * r;
  opt.voxel = r / 50.0;
  return opt;
}

ConditioningSet build_conditioning_set(std::span<const TouchReading> touches, const ConditioningOptions& opt) {
  if (!(opt.delta > 0.0)) throw InputError("delta must be positive");
  if (!(opt.epsilon > 0.0)) throw InputError("epsilon must be positive");
  if (opt.n_slices < 1) throw InputError("n_slices must be at least 1");

  std::vector<Oriented> raw;
  size_t index = 0;
  for (const auto& touch : touches) {
    if (touch.points.size() != touch.normals.size())
      throw InputError("touch has " + std::to_string(touch.points.size()) + " points but " +
                       std::to_string(touch.normals.size()) + " normals");
    for (size_t i = 0; i < touch.points.size(); ++i, ++index) {
      const Vec3& p = touch.points[i];
      const Vec3& n = touch.normals[i];
      if (!p.allFinite()) throw InputError("non-finite touch point at index " + std::to_string(index));
      if (!(std::abs(n.norm() - 1.0) <= 1e-6))
        throw InputError("normal at index " + std::to_string(index) + " is not unit length");
      raw.push_back({p, n});
    }
  }
  if (raw.empty()) throw InputError("no tactile data");

  const std::vector<Oriented> surface = opt.voxel > 0.0 ? voxel_downsample(raw, opt.voxel) : raw;

  ConditioningSet set;
  set.delta = opt.delta;
  set.epsilon = opt.epsilon;
  set.locations.reserve(3 * surface.size() + opt.n_slices);
  auto emit = [&](const Vec3& x, double y, PointClass c) {
    set.locations.push_back(x);
    set.targets.push_back(y);
    set.labels.push_back(c);
  };
  for (const auto& s : surface) {
    emit(s.point, 0.0, PointClass::surface);
    emit(s.point - opt.delta * s.normal, -opt.delta, PointClass::inside);
    emit(s.point + opt.delta * s.normal, opt.delta, PointClass::outside);
  }

  double zmin = surface.front().point.z();
  double zmax = zmin;
  for (const auto& s : surface) {
    zmin = std::min(zmin, s.point.z());
    zmax = std::max(zmax, s.point.z());
  }
  std::vector<Vec3> slice_sum(opt.n_slices, Vec3::Zero());
  std::vector<size_t> slice_count(opt.n_slices, 0);
  const double extent = zmax - zmin;
  for (const auto& s : surface) {
    int bin = 0;
    if (extent > 0.0)
      bin = std::min(static_cast<int>((s.point.z() - zmin) / extent * opt.n_slices), opt.n_slices - 1);
    slice_sum[bin] += s.point;
    ++slice_count[bin];
  }
  for (int i = 0; i < opt.n_slices; ++i)
    if (slice_count[i] > 0) emit(slice_sum[i] / static_cast<double>(slice_count[i]), -opt.epsilon, PointClass::interior);
  return set;
}

void KernelParams::validate() const {
  if (!(rho > 0.0)) throw InputError("kernel length scale rho must be positive");
  if (!(sigma > 0.0)) throw InputError("kernel output scale sigma must be positive");
  if (!(noise >= 0.0)) throw InputError("kernel noise variance must be nonnegative");
  if (!std::isfinite(prior_mean)) throw InputError("prior mean must be finite");
}

double matern32(double d, const KernelParams& params) {
  if (!(d >= 0.0)) throw InputError("matern32: distance must be nonnegative");
  const double ar = std::numbers::sqrt3 * d / params.rho;
  return params.sigma * params.sigma * ((1.0 + ar) * std::exp(-ar));
}

Eigen::MatrixXd kernel_matrix(std::span<const Vec3> points, const KernelParams& params) {
  const size_t n = points.size();
  std::vector<double> xs(n), ys(n), zs(n);
  for (size_t i = 0; i < n; ++i) {
    xs[i] = points[i].x();
    ys[i] = points[i].y();
    zs[i] = points[i].z();
  }
  const simd::PointsSoA soa{xs, ys, zs};
  const auto& kern = simd::kernels();
  const auto c = coeffs_of(params);
  Eigen::MatrixXd k(n, n);
  std::vector<double> row(n);
  for (size_t i = 0; i < n; ++i) {
    const double q[3] = {xs[i], ys[i], zs[i]};
    kern.matern_row(soa, q, c, row);
    for (size_t j = 0; j <= i; ++j) k(i, j) = row[j];
  }
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) k(i, j) = k(j, i);
  return k;
}

GpisModel GpisModel::fit(ConditioningSet set, const KernelParams& params, const FitOptions& opt) {
  params.validate();
  if (set.empty()) throw InputError("cannot fit a GP to an empty conditioning set");
  if (set.targets.size() != set.size() || set.labels.size() != set.size())
    throw InputError("conditioning set arrays have mismatched lengths");
  if (set.size() > opt.max_points)
    throw InputError("conditioning set has " + std::to_string(set.size()) + " points, above the cap of " +
                     std::to_string(opt.max_points) + "; use a coarser voxel pitch");

  const Eigen::MatrixXd k = kernel_matrix(set.locations, params);
  const double s2 = params.sigma * params.sigma;
  const auto n = static_cast<Eigen::Index>(set.size());

  auto try_factor = [&](double diag, Eigen::MatrixXd& out) {
    Eigen::MatrixXd a = k;
    a.diagonal().array() += diag;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) return false;
    out = llt.matrixL();
    for (Eigen::Index i = 0; i < n; ++i)
      if (!(out(i, i) * out(i, i) > 1e-12 * s2)) return false;
    return true;
  };

  GpisModel model;
  model.set_ = std::move(set);
  model.params_ = params;
  if (!try_factor(params.noise, model.factor_)) {
    bool ok = false;
    for (double j = opt.jitter_start * s2; j <= opt.jitter_limit * s2 * (1.0 + 1e-9); j *= 10.0) {
      if (try_factor(params.noise + j, model.factor_)) {
        model.jitter_ = j;
        ok = true;
        break;
      }
    }
    if (!ok) throw NumericalError("kernel matrix not positive definite");
  }
  model.prepare_soa();
  model.compute_alpha();
  return model;
}

GpisModel GpisModel::from_factor(ConditioningSet set, const KernelParams& params, double jitter,
                                 Eigen::MatrixXd lower_factor) {
  params.validate();
  if (lower_factor.rows() != static_cast<Eigen::Index>(set.size()) || lower_factor.cols() != lower_factor.rows())
    throw InputError("factor dimension does not match conditioning set");
  GpisModel model;
  model.set_ = std::move(set);
  model.params_ = params;
  model.jitter_ = jitter;
  model.factor_ = std::move(lower_factor);
  model.prepare_soa();
  model.compute_alpha();
  return model;
}

void GpisModel::prepare_soa() {
  const size_t n = set_.size();
  xs_.resize(n);
  ys_.resize(n);
  zs_.resize(n);
  for (size_t i = 0; i < n; ++i) {
    xs_[i] = set_.locations[i].x();
    ys_[i] = set_.locations[i].y();
    zs_[i] = set_.locations[i].z();
  }
}

void GpisModel::compute_alpha() {
  Eigen::VectorXd y(static_cast<Eigen::Index>(set_.size()));
  for (size_t i = 0; i < set_.size(); ++i) y[static_cast<Eigen::Index>(i)] = set_.targets[i] - params_.prior_mean;
  const Eigen::VectorXd w = factor_.triangularView<Eigen::Lower>().solve(y);
  alpha_ = factor_.transpose().triangularView<Eigen::Upper>().solve(w);
}

double GpisModel::log_marginal_likelihood() const {
  Eigen::VectorXd y(static_cast<Eigen::Index>(set_.size()));
  for (size_t i = 0; i < set_.size(); ++i) y[static_cast<Eigen::Index>(i)] = set_.targets[i] - params_.prior_mean;
  const double fit_term = -0.5 * y.dot(alpha_);
  const double logdet = factor_.diagonal().array().log().sum();
  return fit_term - logdet - 0.5 * static_cast<double>(set_.size()) * std::log(2.0 * std::numbers::pi);
}

double GpisModel::mean(const Vec3& p) const {
  const double q[3] = {p.x(), p.y(), p.z()};
  const simd::PointsSoA soa{xs_, ys_, zs_};
  return params_.prior_mean +
         simd::kernels().matern_weighted_sum(soa, {alpha_.data(), static_cast<size_t>(alpha_.size())}, q,
                                             coeffs_of(params_));
}

GpPrediction GpisModel::predict(const Vec3& p) const {
  const double q[3] = {p.x(), p.y(), p.z()};
  const simd::PointsSoA soa{xs_, ys_, zs_};
  Eigen::VectorXd k(static_cast<Eigen::Index>(set_.size()));
  simd::kernels().matern_row(soa, q, coeffs_of(params_), {k.data(), static_cast<size_t>(k.size())});
  const double mean = params_.prior_mean + k.dot(alpha_);
  const Eigen::VectorXd v = factor_.triangularView<Eigen::Lower>().solve(k);
  const double s2 = params_.sigma * params_.sigma;
  const double latent = std::clamp(s2 - v.squaredNorm(), 1e-12 * s2, s2);
  return {mean, latent + params_.noise};
}

std::vector<GpPrediction> GpisModel::query(std::span<const Vec3> points) const {
  std::vector<GpPrediction> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    if (!p.allFinite()) throw InputError("query point is not finite");
    out.push_back(predict(p));
  }
  return out;
}

KernelParams optimize_hyperparameters(const ConditioningSet& set, std::span<const std::pair<double, double>> grid,
                                      const KernelParams& base, const FitOptions& opt) {
  if (grid.empty()) throw InputError("hyperparameter grid is empty");
  std::vector<std::pair<double, double>> order(grid.begin(), grid.end());
  std::sort(order.begin(), order.end());

  bool found = false;
  double best_lml = 0.0;
  KernelParams best = base;
  for (const auto& [rho, sigma] : order) {
    KernelParams cand = base;
    cand.rho = rho;
    cand.sigma = sigma;
    try {
      const double lml = GpisModel::fit(set, cand, opt).log_marginal_likelihood();
      if (!std::isfinite(lml)) continue;
      if (!found || lml > best_lml) {
        best_lml = lml;
        best = cand;
        found = true;
      }
    } catch (const NumericalError&) {
    }
  }
  if (!found) throw NumericalError("every hyperparameter candidate failed to factorize");
  return best;
}

}  // namespace vtf
