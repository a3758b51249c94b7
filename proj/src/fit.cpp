#include "eac/fit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "eac/errors.hpp"

namespace eac::fit {

using concepts::AssetPtr;
using concepts::ConceptAsset;

void FitConfig::validate() const {
  if (grid_per_param < 1 || refine_iterations < 0 || screen_iterations < 0 || polish_iterations < 0 || starts < 1 ||
      !(tolerance > 0) || !(inlier_threshold > 0) || !(max_residual > 0) || max_points < 10 || refine_points < 10 ||
      score_points < 10)
    throw std::invalid_argument("FitConfig: resolutions, counts and tolerances must be positive");
}

std::map<std::string, double> FitResult::bound(const ConceptAsset& asset) const {
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < params.size(); ++i) out[asset.params[i].name] = params[i];
  return out;
}

concepts::AssetInstance FitResult::instance(const AssetPtr& asset) const { return {asset, params}; }

namespace {

double rms(const Solid& solid, const Transform3& pose, const std::vector<Vec3>& pts) {
  const Mat3 rt = pose.rotation().matrix().transpose();
  double acc = 0.0;
  for (const auto& x : pts) {
    const double d = solid.sdf(rt * (x - pose.translation()));
    acc += d * d;
  }
  return std::sqrt(acc / double(pts.size()));
}

struct Frame {
  Vec3 centroid;
  Mat3 axes;  // principal directions as columns, right-handed
};

Frame principal_frame(const std::vector<Vec3>& pts) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  c /= double(pts.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pts) cov += (p - c) * (p - c).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  Mat3 axes = eig.eigenvectors().rowwise().reverse();  // descending variance
  if (axes.determinant() < 0) axes.col(2) *= -1.0;
  return {c, axes};
}

// The 24 proper rotations that permute and flip coordinate axes.
const std::vector<Mat3>& cube_rotations() {
  static const std::vector<Mat3> all = [] {
    std::vector<Mat3> out;
    std::array<int, 3> perm{0, 1, 2};
    do {
      for (int signs = 0; signs < 8; ++signs) {
        Mat3 m = Mat3::Zero();
        for (int r = 0; r < 3; ++r) m(r, perm[std::size_t(r)]) = (signs >> r) & 1 ? -1.0 : 1.0;
        if (m.determinant() > 0) out.push_back(m);
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
  }();
  return all;
}

struct State {
  Rotation3 rot;
  Vec3 trans = Vec3::Zero();
  std::vector<double> params;
};

class Refiner {
 public:
  Refiner(const ConceptAsset& asset, std::vector<int> free_idx, const std::vector<Vec3>& pts, double area_ref)
      : asset_(asset),
        free_(std::move(free_idx)),
        pts_(pts),
        area_scale_(kAreaWeight * std::sqrt(double(pts.size())) / area_ref) {}

  // Bounded Levenberg-Marquardt on the signed distances with a forward
  // difference Jacobian. Only cost-decreasing steps are accepted.
  //
  // One extra residual proportional to the surface area resolves directions
  // the data cannot see (a model extending past the observed points costs
  // nothing otherwise): among equally good fits the tightest one wins. Its
  // weight only moves a well-determined optimum by well under a micrometre.
  State run(State s, int iterations, double tolerance, std::vector<double>* history) const {
    const int n_free = int(free_.size());
    const int dim = 6 + n_free;
    const auto n = Eigen::Index(pts_.size());
    Eigen::VectorXd r = residuals(s);
    Eigen::MatrixXd jac(n + 1, dim);
    double c = r.squaredNorm();
    if (history) history->push_back(std::sqrt(c / double(n)));
    double lambda = 1e-3;
    for (int it = 0; it < iterations; ++it) {
      for (int k = 0; k < dim; ++k) {
        const double h = 1e-7;
        jac.col(k) = (residuals(perturb(s, k, h)) - r) / h;
      }
      const Eigen::MatrixXd jtj = jac.transpose() * jac;
      const Eigen::VectorXd g = jac.transpose() * r;
      bool accepted = false;
      while (lambda < 1e12) {
        Eigen::MatrixXd a = jtj;
        for (int k = 0; k < dim; ++k) a(k, k) += lambda * std::max(jtj(k, k), 1e-12);
        const Eigen::VectorXd step = a.ldlt().solve(-g);
        State cand = apply(s, step);
        const Eigen::VectorXd rc = residuals(cand);
        const double cc = rc.squaredNorm();
        if (cc < c) {
          const double moved = step.head<6>().norm() + (n_free ? step.tail(n_free).norm() : 0.0);
          s = std::move(cand);
          r = rc;
          const double gain = c - cc;
          c = cc;
          lambda = std::max(lambda / 3.0, 1e-12);
          accepted = true;
          if (history) history->push_back(std::sqrt(c / double(n)));
          if (moved < tolerance || gain < 1e-14 * c) return s;
          break;
        }
        lambda *= 4.0;
      }
      if (!accepted) break;
    }
    return s;
  }

 private:
  SolidPtr build(const std::vector<double>& params) const { return asset_.kernel->build(params); }

  static constexpr double kAreaWeight = 1e-5;  // metres

  Eigen::VectorXd residuals(const State& s) const {
    const SolidPtr solid = build(s.params);
    const Mat3 rt = s.rot.matrix().transpose();
    const auto n = Eigen::Index(pts_.size());
    Eigen::VectorXd r(n + 1);
    for (Eigen::Index i = 0; i < n; ++i) r[i] = solid->sdf(rt * (pts_[std::size_t(i)] - s.trans));
    r[n] = area_scale_ * solid->area();
    return r;
  }

  State perturb(const State& s, int k, double h) const {
    Eigen::VectorXd step = Eigen::VectorXd::Zero(6 + Eigen::Index(free_.size()));
    step[k] = h;
    return apply(s, step, false);
  }

  State apply(const State& s, const Eigen::VectorXd& step, bool clamp = true) const {
    State out = s;
    out.rot = s.rot * exp_so3(step.head<3>());
    out.trans = s.trans + step.segment<3>(3);
    for (std::size_t k = 0; k < free_.size(); ++k) {
      const auto& spec = asset_.params[std::size_t(free_[k])];
      double v = s.params[std::size_t(free_[k])] + step[6 + Eigen::Index(k)];
      if (clamp) v = std::clamp(v, spec.lower, spec.upper);
      out.params[std::size_t(free_[k])] = v;
    }
    return out;
  }

  const ConceptAsset& asset_;
  std::vector<int> free_;
  const std::vector<Vec3>& pts_;
  double area_scale_;
};

std::vector<double> midpoints(const ConceptAsset& asset) {
  std::vector<double> v;
  for (const auto& p : asset.params) v.push_back(p.midpoint());
  return v;
}

// Calls fn for every combination of values (odometer order).
template <typename Fn>
void for_each_combination(const std::vector<std::vector<double>>& values, Fn&& fn) {
  std::vector<std::size_t> idx(values.size(), 0);
  std::vector<double> cur(values.size());
  while (true) {
    for (std::size_t k = 0; k < values.size(); ++k) cur[k] = values[k][idx[k]];
    fn(cur);
    std::size_t k = 0;
    while (k < values.size() && ++idx[k] == values[k].size()) idx[k++] = 0;
    if (k == values.size()) return;
  }
}

void finish(FitResult& res, const ConceptAsset& asset, const PointCloud& cloud, double max_residual,
            double inlier_threshold) {
  const SolidPtr solid = asset.kernel->build(res.params);
  const Mat3 rt = res.pose.rotation().matrix().transpose();
  double acc = 0.0;
  std::size_t inliers = 0;
  for (const auto& x : cloud.points) {
    const double d = solid->sdf(rt * (x - res.pose.translation()));
    acc += d * d;
    if (std::abs(d) <= inlier_threshold) ++inliers;
  }
  res.residual = std::sqrt(acc / double(cloud.size()));
  res.inlier_fraction = double(inliers) / double(cloud.size());
  res.fitted = res.residual <= max_residual;
  if (!res.fitted) {
    std::ostringstream os;
    os << "no fit: residual " << res.residual << " m exceeds " << max_residual << " m (inliers "
       << res.inlier_fraction << ")";
    res.diagnostics = os.str();
  }
}

}  // namespace

double rms_residual(const concepts::AssetInstance& inst, const Transform3& pose, const PointCloud& cloud) {
  if (cloud.empty()) throw PreconditionError("rms_residual: empty cloud");
  return rms(inst.solid(), pose, cloud.points);
}

FitResult fit_structural(const AssetPtr& asset, const PointCloud& cloud, const FitConfig& cfg) {
  cfg.validate();
  if (cloud.size() < 50)
    throw PreconditionError("fit_structural: need at least 50 points, got " + std::to_string(cloud.size()));
  if (!asset->kernel) throw PreconditionError("fit_structural: asset '" + asset->asset_id + "' has no geometry");

  // deterministic subsamples
  std::vector<std::size_t> order(cloud.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Vec3> work, mid, score;
  for (std::size_t i = 0; i < std::min(cfg.max_points, cloud.size()); ++i) work.push_back(cloud.points[order[i]]);
  for (std::size_t i = 0; i < std::min(cfg.refine_points, work.size()); ++i) mid.push_back(work[i]);
  for (std::size_t i = 0; i < std::min(cfg.score_points, work.size()); ++i) score.push_back(work[i]);

  std::vector<int> free_idx;
  std::vector<std::vector<double>> grid;
  for (std::size_t k = 0; k < asset->params.size(); ++k) {
    const auto& p = asset->params[k];
    if (!p.geometric) continue;
    free_idx.push_back(int(k));
    std::vector<double> vals;
    for (int j = 0; j < cfg.grid_per_param; ++j)
      vals.push_back(p.lower + (p.upper - p.lower) * (j + 0.5) / cfg.grid_per_param);
    grid.push_back(vals);
  }

  const Frame cloud_frame = principal_frame(cloud.points);
  const auto& rots = cube_rotations();

  struct Start {
    double score;
    std::size_t rot;
    std::vector<double> params;
    Transform3 pose;
  };
  std::vector<Start> starts;
  auto consider = [&](const std::vector<double>& free_vals) {
    std::vector<double> params = midpoints(*asset);
    for (std::size_t k = 0; k < free_idx.size(); ++k) params[std::size_t(free_idx[k])] = free_vals[k];
    const SolidPtr solid = asset->kernel->build(params);
    Rng srng(cfg.seed + 17);
    std::vector<Vec3> canon;
    for (const auto& s : sample_solid(*solid, 256, srng)) canon.push_back(s.point);
    const Frame f = principal_frame(canon);
    for (std::size_t r = 0; r < rots.size(); ++r) {
      const Rotation3 rot(cloud_frame.axes * rots[r] * f.axes.transpose());
      const Transform3 pose(rot, cloud_frame.centroid - rot * f.centroid);
      starts.push_back({rms(*solid, pose, score), r, params, pose});
    }
  };
  if (grid.empty())
    consider({});
  else
    for_each_combination(grid, consider);

  // best grid point per orientation, briefly refined on the scoring subset;
  // the most promising few are then refined on the full working set
  std::stable_sort(starts.begin(), starts.end(), [](const Start& a, const Start& b) { return a.score < b.score; });
  std::vector<const Start*> per_rot;
  std::vector<bool> rot_used(rots.size(), false);
  for (const auto& s : starts) {
    if (rot_used[s.rot]) continue;
    rot_used[s.rot] = true;
    per_rot.push_back(&s);
  }
  const double area_ref = asset->kernel->build(midpoints(*asset))->area();
  const Refiner coarse(*asset, free_idx, score, area_ref);
  std::vector<std::pair<double, State>> screened;
  for (const Start* s : per_rot) {
    std::vector<double> history;
    State out = coarse.run({s->pose.rotation(), s->pose.translation(), s->params}, cfg.screen_iterations,
                           cfg.tolerance, &history);
    screened.emplace_back(history.back(), std::move(out));
  }
  std::stable_sort(screened.begin(), screened.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  const Refiner refiner(*asset, free_idx, mid, area_ref);
  State best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < std::min<std::size_t>(std::size_t(cfg.starts), screened.size()); ++i) {
    std::vector<double> history;
    State out = refiner.run(screened[i].second, cfg.refine_iterations, cfg.tolerance, &history);
    if (history.back() < best_cost) {
      best_cost = history.back();
      best = std::move(out);
    }
  }
  std::vector<double> history;
  best = Refiner(*asset, free_idx, work, area_ref).run(best, cfg.polish_iterations, cfg.tolerance, &history);

  FitResult res;
  res.asset_id = asset->asset_id;
  res.params = best.params;
  res.pose = Transform3(best.rot, best.trans);
  res.history = std::move(history);
  finish(res, *asset, cloud, cfg.max_residual, cfg.inlier_threshold);
  return res;
}

FitResult resolve_facing(const AssetPtr& asset, const FitResult& fit, const PointCloud& cloud,
                         const std::vector<Vec3>& surroundings) {
  if (!fit.fitted || cloud.empty() || surroundings.empty()) return fit;
  const concepts::AssetInstance inst = fit.instance(asset);
  const PointCloud surface = concepts::sample_surface(inst, 512, 0);
  Vec3 lo = surface.points.front(), hi = lo;
  for (const auto& p : surface.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 center = 0.5 * (lo + hi);
  FitResult turned = fit;
  turned.pose = fit.pose * translate(center) * rotate(Rotation3::rx(kPi)) * translate(-center);
  auto gap = [&](const Transform3& pose) {
    const Vec3 mount = pose.translation();
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : surroundings) best = std::min(best, (s - mount).squaredNorm());
    return best;
  };
  if (gap(turned.pose) >= gap(fit.pose)) return fit;
  const double r = rms_residual(inst, turned.pose, cloud);
  if (r > 1.2 * fit.residual + 1e-5) return fit;
  turned.residual = r;
  return turned;
}

Transform3 recover_pose(const Transform3& known_object_pose, const Transform3& fitted_local) {
  return known_object_pose * fitted_local;
}

std::vector<std::vector<double>> uniform_grid(const ConceptAsset& asset, int per_param) {
  if (per_param < 1) throw PreconditionError("uniform_grid: need at least one value per parameter");
  std::vector<std::vector<double>> out;
  for (const auto& p : asset.params) {
    std::vector<double> vals;
    if (!p.geometric || per_param == 1) {
      vals.push_back(p.midpoint());
    } else {
      for (int j = 0; j < per_param; ++j) vals.push_back(p.lower + (p.upper - p.lower) * j / (per_param - 1));
    }
    out.push_back(vals);
  }
  return out;
}

FitResult brute_force_oracle(const AssetPtr& asset, const PointCloud& cloud, const OracleGrid& grid) {
  if (grid.poses.empty() || grid.values.size() != asset->params.size())
    throw PreconditionError("brute_force_oracle: grid must list values for every parameter and at least one pose");
  for (const auto& v : grid.values)
    if (v.empty()) throw PreconditionError("brute_force_oracle: empty parameter grid");
  if (cloud.empty()) throw PreconditionError("brute_force_oracle: empty cloud");
  FitResult best;
  best.asset_id = asset->asset_id;
  double best_cost = std::numeric_limits<double>::infinity();
  for_each_combination(grid.values, [&](const std::vector<double>& params) {
    const SolidPtr solid = asset->kernel->build(params);
    for (const auto& pose : grid.poses) {
      const double c = rms(*solid, pose, cloud.points);
      if (c < best_cost) {
        best_cost = c;
        best.params = params;
        best.pose = pose;
      }
    }
  });
  finish(best, *asset, cloud, std::numeric_limits<double>::infinity(), 0.002);
  return best;
}

nlohmann::json to_json(const FitResult& r, const ConceptAsset& asset) {
  nlohmann::json j;
  j["asset"] = r.asset_id;
  j["params"] = nlohmann::json::object();
  for (std::size_t i = 0; i < r.params.size(); ++i) j["params"][asset.params[i].name] = r.params[i];
  const Vec3 t = r.pose.translation(), rpy = r.pose.rotation().rpy();
  j["pose"] = {{"xyz", {t.x(), t.y(), t.z()}}, {"rpy", {rpy.x(), rpy.y(), rpy.z()}}};
  j["residual"] = r.residual;
  j["inlier_fraction"] = r.inlier_fraction;
  j["fitted"] = r.fitted;
  if (!r.diagnostics.empty()) j["diagnostics"] = r.diagnostics;
  return j;
}

}  // namespace eac::fit
