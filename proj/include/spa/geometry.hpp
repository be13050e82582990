#pragma once

#include "spa/segment.hpp"

#include <array>

namespace spa {

/// Orthonormal basis built from a patch normal and the displacement to a
/// neighbor: u along the displacement, v the normal component orthogonal
/// to it, w = u x v. Degenerate when the two are near-colinear.
struct LocalFrame {
  Vec3 u = Vec3::UnitX();
  Vec3 v = Vec3::UnitY();
  Vec3 w = Vec3::UnitZ();
  bool degenerate = false;
};

/// Seven-element invariant feature for an (owner, neighbor) patch pair:
/// three sign-gated distance components, the inter-centroid distance and
/// three relative angles. Distances in meters, angles in radians.
struct RelFeature {
  std::array<double, 7> q{};
  int alpha_id = -1;

  double operator[](size_t i) const { return q[i]; }
};

struct FeatureSet {
  int owner = -1;
  std::vector<RelFeature> features;           // one per neighborhood patch
  Eigen::Matrix<double, 7, 1> mean;           // raw component-wise mean
  Eigen::Matrix<double, 7, 1> normalized_mean;  // mean scaled by view stddev

  FeatureSet() : mean(Eigen::Matrix<double, 7, 1>::Zero()),
                 normalized_mean(Eigen::Matrix<double, 7, 1>::Zero()) {}
};

inline LocalFrame local_frame(const Vec3& n_mu, const Vec3& r, double e_theta) {
  const double r_norm = r.norm();
  if (r_norm <= 0.0) throw std::invalid_argument("local_frame: zero displacement");
  LocalFrame f;
  f.u = r / r_norm;
  const double angle = safe_acos(f.u.dot(n_mu));
  if (angle < e_theta || angle > kPi - e_theta) {
    f.degenerate = true;
    return f;
  }
  const Vec3 v_raw = n_mu - n_mu.dot(f.u) * f.u;
  f.v = v_raw / v_raw.norm();
  f.w = f.u.cross(f.v).normalized();
  return f;
}

/// Epsilon-insensitive signum of the projection of n onto basis vector b:
/// zero when the angle between them is within e_theta of 90 degrees.
inline double sgn_eps(const Vec3& n, const Vec3& b, double e_theta) {
  const double angle = safe_acos(n.dot(b));
  if (angle < e_theta || angle > kPi - e_theta) return n.dot(b) >= 0 ? 1.0 : -1.0;
  if (angle >= kPi / 2 - e_theta && angle <= kPi / 2 + e_theta) return 0.0;
  return n.dot(b) >= 0 ? 1.0 : -1.0;
}

inline RelFeature relative_feature(const Superpixel& mu, const Superpixel& alpha,
                                   double e_theta) {
  const Vec3 r = alpha.centroid - mu.centroid;
  const double r_norm = r.norm();
  if (r_norm <= 0.0) throw std::invalid_argument("relative_feature: coincident centroids");
  const Vec3 r_hat = r / r_norm;

  const LocalFrame f = local_frame(mu.normal, r, e_theta);
  RelFeature feat;
  feat.alpha_id = alpha.id;
  if (f.degenerate) {
    feat.q[0] = feat.q[1] = feat.q[2] = 0.0;
  } else {
    feat.q[0] = r_norm * sgn_eps(alpha.normal, f.u, e_theta);
    feat.q[1] = r_norm * sgn_eps(alpha.normal, f.v, e_theta);
    feat.q[2] = r_norm * sgn_eps(alpha.normal, f.w, e_theta);
  }
  feat.q[3] = r_norm;
  feat.q[4] = safe_acos(mu.normal.dot(alpha.normal));
  feat.q[5] = safe_acos(r_hat.dot(mu.normal));
  feat.q[6] = safe_acos(r_hat.dot(alpha.normal));
  return feat;
}

/// Builds the feature set of mu over the given neighborhood (excluding mu
/// itself). The raw mean is filled; normalized means are filled view-wide
/// by normalize_means.
inline FeatureSet feature_set(const Superpixel& mu, const std::vector<const Superpixel*>& neighborhood,
                              double e_theta) {
  if (neighborhood.empty()) throw std::invalid_argument("feature_set: empty neighborhood");
  FeatureSet fs;
  fs.owner = mu.id;
  fs.features.reserve(neighborhood.size());
  Eigen::Matrix<double, 7, 1> sum = Eigen::Matrix<double, 7, 1>::Zero();
  for (const Superpixel* alpha : neighborhood) {
    if (alpha->id == mu.id) continue;
    RelFeature f = relative_feature(mu, *alpha, e_theta);
    for (int i = 0; i < 7; ++i) sum[i] += f.q[i];
    fs.features.push_back(std::move(f));
  }
  if (fs.features.empty()) throw std::invalid_argument("feature_set: neighborhood held only mu");
  fs.mean = sum / static_cast<double>(fs.features.size());
  fs.normalized_mean = fs.mean;
  return fs;
}

/// k_S nearest patches to mu by centroid distance, ties broken by id.
/// k_s <= 0 means the full view.
inline std::vector<const Superpixel*> nearest_neighborhood(const Decomposition& dec, int mu_id,
                                                           int k_s) {
  const Superpixel& mu = dec.superpixels[mu_id];
  std::vector<const Superpixel*> others;
  others.reserve(dec.superpixels.size());
  for (const auto& sp : dec.superpixels)
    if (sp.id != mu_id) others.push_back(&sp);
  auto closer = [&](const Superpixel* a, const Superpixel* b) {
    const double da = (a->centroid - mu.centroid).squaredNorm();
    const double db = (b->centroid - mu.centroid).squaredNorm();
    return da < db || (da == db && a->id < b->id);
  };
  if (k_s > 0 && k_s < static_cast<int>(others.size())) {
    std::nth_element(others.begin(), others.begin() + k_s, others.end(), closer);
    others.resize(k_s);
  }
  std::sort(others.begin(), others.end(), closer);
  return others;
}

/// Feature sets for every patch in the view, then per-view stddev
/// normalization of the means (so distance and angle components weigh
/// comparably in the mean index).
inline std::vector<FeatureSet> view_feature_sets(const Decomposition& dec, int k_s, double e_theta,
                                                 int threads = 0) {
  const int n = dec.size();
  std::vector<FeatureSet> sets(n);
  parallel_for(
      0, n,
      [&](int lo, int hi) {
        for (int i = lo; i < hi; ++i)
          sets[i] = feature_set(dec.superpixels[i], nearest_neighborhood(dec, i, k_s), e_theta);
      },
      threads);

  // view-wide stddev of the means, per component
  Eigen::Matrix<double, 7, 1> mean_of_means = Eigen::Matrix<double, 7, 1>::Zero();
  for (const auto& fs : sets) mean_of_means += fs.mean;
  mean_of_means /= std::max(1, n);
  Eigen::Matrix<double, 7, 1> var = Eigen::Matrix<double, 7, 1>::Zero();
  for (const auto& fs : sets) {
    const auto d = fs.mean - mean_of_means;
    var += d.cwiseProduct(d);
  }
  var /= std::max(1, n);
  Eigen::Matrix<double, 7, 1> scale;
  for (int i = 0; i < 7; ++i) scale[i] = var[i] > 1e-24 ? 1.0 / std::sqrt(var[i]) : 1.0;
  for (auto& fs : sets) fs.normalized_mean = fs.mean.cwiseProduct(scale);
  return sets;
}

}  // namespace spa
