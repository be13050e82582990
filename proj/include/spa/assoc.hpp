#pragma once

#include "spa/kdtree.hpp"
#include "spa/matching.hpp"
#include "spa/transform.hpp"

#include <Eigen/SVD>

#include <map>

namespace spa {

struct Association {
  int mu = -1;        // patch id in view S
  int mu_prime = -1;  // patch id in view S'
  double d_rdl = 0.0;
  double d_hat = 0.0;  // d_rdl / (k_S + k_S'), in [0,1]
};

struct AssociationParams {
  int query_count = 75;  // C
  double lambda = 0.65;  // normalized-distance gate
  EditCosts costs;
  MatchTolerances tol;
  int k_s = 0;  // neighborhood size; <= 0 means full view
  double downsample_voxel = 0.0;  // query-side voxel downsampling; 0 = all patches
  bool mutual_filter = false;
  int threads = 0;
};

struct AssociationSet {
  std::vector<Association> pairs;
  AssociationParams params;
  int k_s = 0;
  int k_s_prime = 0;
};

/// One view, fully preprocessed for association.
struct ViewData {
  Decomposition dec;
  std::vector<FeatureSet> sets;
  std::vector<FeatureSequence> sequences;
  int k_s = 0;  // effective neighborhood cardinality
};

inline ViewData build_view(Decomposition dec, int k_s, double e_r, double e_theta,
                           int threads = 0) {
  ViewData view;
  view.dec = std::move(dec);
  if (view.dec.size() < 2) throw std::invalid_argument("build_view: need at least two patches");
  view.sets = view_feature_sets(view.dec, k_s, e_theta, threads);
  view.sequences.resize(view.sets.size());
  parallel_for(
      0, static_cast<int>(view.sets.size()),
      [&](int lo, int hi) {
        for (int i = lo; i < hi; ++i) view.sequences[i] = order_sequence(view.sets[i], e_r, e_theta);
      },
      threads);
  view.k_s = static_cast<int>(view.sets.front().features.size());
  return view;
}

/// Exact k-NN index over the normalized feature-set means of a view.
inline KdTree<7> build_mean_index(const std::vector<FeatureSet>& view) {
  if (view.empty()) throw std::invalid_argument("build_mean_index: empty view");
  std::vector<Eigen::Matrix<double, 7, 1>> means;
  means.reserve(view.size());
  for (const auto& fs : view) means.push_back(fs.normalized_mean);
  return KdTree<7>(std::move(means));
}

namespace detail {

/// One representative patch id per occupied voxel (lowest id wins).
inline std::vector<int> voxel_downsample_queries(const Decomposition& dec, double voxel) {
  if (voxel <= 0) {
    std::vector<int> all(dec.size());
    std::iota(all.begin(), all.end(), 0);
    return all;
  }
  std::map<std::tuple<int64_t, int64_t, int64_t>, int> cells;
  for (const auto& sp : dec.superpixels) {
    const auto key = std::make_tuple(static_cast<int64_t>(std::floor(sp.centroid.x() / voxel)),
                                     static_cast<int64_t>(std::floor(sp.centroid.y() / voxel)),
                                     static_cast<int64_t>(std::floor(sp.centroid.z() / voxel)));
    auto [it, fresh] = cells.try_emplace(key, sp.id);
    if (!fresh) it->second = std::min(it->second, sp.id);
  }
  std::vector<int> out;
  out.reserve(cells.size());
  for (const auto& [_, id] : cells) out.push_back(id);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

/// Gated one-directional association S -> S'. Candidates for each query
/// come from the mean index (C nearest normalized means); each candidate is
/// scored by budgeted RDL and the argmin is emitted iff its normalized
/// distance clears the gate.
inline AssociationSet associate(const ViewData& S, const ViewData& S_prime,
                                const AssociationParams& par) {
  if (par.query_count < 1) throw std::invalid_argument("associate: C must be >= 1");
  if (par.lambda < 0 || par.lambda > 1) throw std::invalid_argument("associate: lambda in [0,1]");

  AssociationSet out;
  out.params = par;
  out.k_s = S.k_s;
  out.k_s_prime = S_prime.k_s;
  const double denom = static_cast<double>(S.k_s + S_prime.k_s);
  const double budget = par.lambda * denom;

  const KdTree<7> index = build_mean_index(S_prime.sets);
  const std::vector<int> queries = detail::voxel_downsample_queries(S.dec, par.downsample_voxel);

  std::vector<std::optional<Association>> results(queries.size());
  parallel_for(
      0, static_cast<int>(queries.size()),
      [&](int lo, int hi) {
        for (int qi = lo; qi < hi; ++qi) {
          const int mu = queries[qi];
          const auto candidates = index.nearest(S.sets[mu].normalized_mean, par.query_count);
          double best_d = std::numeric_limits<double>::infinity();
          int best_cand = -1;
          for (const int cand : candidates) {
            const double d =
                compare_rdl(S.sequences[mu], S_prime.sequences[cand], par.costs, par.tol, budget);
            if (d < best_d) {
              best_d = d;
              best_cand = cand;
            }
          }
          if (best_cand < 0) continue;
          const double d_hat = best_d / denom;
          if (d_hat <= par.lambda) results[qi] = Association{mu, best_cand, best_d, d_hat};
        }
      },
      par.threads);
  for (auto& r : results)
    if (r) out.pairs.push_back(*r);

  if (par.mutual_filter) {
    AssociationParams rev = par;
    rev.mutual_filter = false;
    rev.downsample_voxel = 0.0;
    const AssociationSet back = associate(S_prime, S, rev);
    std::vector<int> best_back(S_prime.dec.size(), -1);
    for (const auto& a : back.pairs) best_back[a.mu] = a.mu_prime;
    std::vector<Association> kept;
    for (const auto& a : out.pairs)
      if (best_back[a.mu_prime] == a.mu) kept.push_back(a);
    out.pairs = std::move(kept);
  }
  return out;
}

/// Least-squares rigid alignment of corresponded points (minimizes
/// sum ||T p - p'||^2) via cross-covariance SVD with reflection correction.
inline RigidTransform kabsch(const std::vector<std::pair<Vec3, Vec3>>& pairs) {
  if (pairs.size() < 3) throw std::invalid_argument("kabsch: need at least 3 correspondences");
  Vec3 mean_a = Vec3::Zero(), mean_b = Vec3::Zero();
  for (const auto& [a, b] : pairs) {
    mean_a += a;
    mean_b += b;
  }
  mean_a /= static_cast<double>(pairs.size());
  mean_b /= static_cast<double>(pairs.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& [a, b] : pairs) cov += (b - mean_b) * (a - mean_a).transpose();
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv[1] < 1e-12 * std::max(1.0, sv[0]))
    throw std::invalid_argument("kabsch: degenerate (collinear) configuration");
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) d(2, 2) = -1.0;
  RigidTransform t;
  t.rotation = svd.matrixU() * d * svd.matrixV().transpose();
  t.translation = mean_b - t.rotation * mean_a;
  return t;
}

struct RansacParams {
  double inlier_thresh = 0.05;  // meters
  int iterations = 500;
  uint64_t seed = 0;
  int min_inliers_floor = 6;
  double min_inlier_fraction = 0.10;
};

struct RansacResult {
  RigidTransform transform;
  std::vector<int> inliers;  // indices into the association list
  bool failure = true;
};

/// 3-sample RANSAC over associated centroid pairs, final model refit on all
/// inliers. Deterministic for a fixed seed.
inline RansacResult estimate_transform_ransac(const AssociationSet& assoc,
                                              const Decomposition& dec_a,
                                              const Decomposition& dec_b,
                                              const RansacParams& par) {
  RansacResult res;
  const int n = static_cast<int>(assoc.pairs.size());
  if (n < 3) return res;

  std::vector<std::pair<Vec3, Vec3>> pts;
  pts.reserve(n);
  for (const auto& a : assoc.pairs)
    pts.emplace_back(dec_a.superpixels[a.mu].centroid, dec_b.superpixels[a.mu_prime].centroid);

  std::mt19937_64 rng(par.seed);
  std::uniform_int_distribution<int> pick(0, n - 1);
  int best_count = 0;
  double best_residual = std::numeric_limits<double>::infinity();
  std::vector<int> best_inliers;

  for (int it = 0; it < par.iterations; ++it) {
    int i0 = pick(rng), i1 = pick(rng), i2 = pick(rng);
    if (i0 == i1 || i1 == i2 || i0 == i2) continue;
    RigidTransform model;
    try {
      model = kabsch({pts[i0], pts[i1], pts[i2]});
    } catch (const std::invalid_argument&) {
      continue;
    }
    std::vector<int> inliers;
    double residual = 0.0;
    for (int i = 0; i < n; ++i) {
      const double err = (model.apply(pts[i].first) - pts[i].second).norm();
      if (err < par.inlier_thresh) {
        inliers.push_back(i);
        residual += err * err;
      }
    }
    const int count = static_cast<int>(inliers.size());
    if (count > best_count || (count == best_count && residual < best_residual)) {
      best_count = count;
      best_residual = residual;
      best_inliers = std::move(inliers);
    }
  }

  const int required = std::max(par.min_inliers_floor,
                                static_cast<int>(std::ceil(par.min_inlier_fraction * n)));
  if (best_count < std::max(3, required)) return res;

  std::vector<std::pair<Vec3, Vec3>> inlier_pts;
  inlier_pts.reserve(best_inliers.size());
  for (int i : best_inliers) inlier_pts.push_back(pts[i]);
  try {
    res.transform = kabsch(inlier_pts);
  } catch (const std::invalid_argument&) {
    return res;
  }
  res.inliers = std::move(best_inliers);
  res.failure = false;
  return res;
}

struct PairEval {
  double translation_error = 0.0;  // meters
  double rotation_error = 0.0;     // degrees
  bool failure = false;
  double association_precision = -1.0;  // vs surface-id ground truth, -1 if unknown
  int association_count = 0;
};

inline PairEval evaluate(const RigidTransform& estimate, const RigidTransform& truth) {
  PairEval e;
  std::tie(e.rotation_error, e.translation_error) = pose_error(estimate, truth);
  return e;
}

/// Fraction of associations whose patches carry the same ground-truth
/// surface id. -1 when either view lacks ground truth.
inline double association_precision(const AssociationSet& assoc, const Decomposition& dec_a,
                                    const Decomposition& dec_b) {
  if (assoc.pairs.empty()) return -1.0;
  int known = 0, correct = 0;
  for (const auto& a : assoc.pairs) {
    const int sa = dec_a.superpixels[a.mu].majority_surface_id;
    const int sb = dec_b.superpixels[a.mu_prime].majority_surface_id;
    if (sa < 0 || sb < 0) continue;
    ++known;
    if (sa == sb) ++correct;
  }
  return known > 0 ? static_cast<double>(correct) / known : -1.0;
}

}  // namespace spa
