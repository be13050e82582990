#pragma once

#include "spa/rangeio.hpp"

#include <numeric>
#include <queue>
#include <unordered_map>

namespace spa {

struct SegmentParams {
  double angle_thresh = deg2rad(20.0);  // adjacency normal angle
  double depth_gap = 0.03;              // meters at 1 m, scaled by depth
  double curvature_thresh = 0.05;
  int min_points = 40;
  double target_area = 0.035;  // m^2 per patch
  int kmeans_max_iters = 15;
  double kmeans_converge = 1e-4;  // centroid shift, meters
  int attach_passes = 12;
  uint64_t seed = 0;
  int threads = 0;
};

struct Superpixel {
  int id = -1;
  std::vector<int> pixels;  // linear indices into the image grid
  Vec3 centroid = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  double area = 0.0;
  int component_id = -1;
  int majority_surface_id = -1;

  int pixel_count() const { return static_cast<int>(pixels.size()); }
};

struct Decomposition {
  std::vector<Superpixel> superpixels;
  Grid<int> labels;  // pixel -> superpixel id, -1 where unlabeled
  uint64_t seed = 0;

  int size() const { return static_cast<int>(superpixels.size()); }
};

namespace detail {

/// Approximate metric footprint of one pixel on the surface it observes.
inline double pixel_area(const Vec3& p, const Vec3& n, const CameraIntrinsics& K) {
  const double z = p.z();
  const double cos_view = std::max(std::abs(n.dot(p.normalized())), 0.25);
  return z * z / (K.fx * K.fy * cos_view);
}

inline bool smooth_edge(const OrganizedCloud& cloud, int ua, int va, int ub, int vb,
                        const SegmentParams& par) {
  const Vec3& pa = cloud.points(ua, va);
  const Vec3& pb = cloud.points(ub, vb);
  const double gap = par.depth_gap * std::max(1.0, pa.z());
  if ((pa - pb).norm() >= gap) return false;
  return safe_acos(cloud.normals(ua, va).dot(cloud.normals(ub, vb))) < par.angle_thresh;
}

}  // namespace detail

/// Connected components over valid, low-curvature pixels: two 4-adjacent
/// pixels share a component iff their normal angle, point distance and
/// curvatures are within thresholds. Returns a label grid (-1 elsewhere).
inline Grid<int> split_components(const OrganizedCloud& cloud, const SegmentParams& par) {
  const int W = cloud.width(), H = cloud.height();
  Grid<int> comp(W, H, -1);
  int next = 0;
  std::vector<int> stack;
  for (int v0 = 0; v0 < H; ++v0) {
    for (int u0 = 0; u0 < W; ++u0) {
      if (comp(u0, v0) != -1 || !cloud.is_valid(u0, v0) ||
          cloud.curvature(u0, v0) > par.curvature_thresh)
        continue;
      const int id = next++;
      comp(u0, v0) = id;
      stack.push_back(v0 * W + u0);
      while (!stack.empty()) {
        const int idx = stack.back();
        stack.pop_back();
        const int u = idx % W, v = idx / W;
        constexpr int du[4] = {1, -1, 0, 0};
        constexpr int dv[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int uu = u + du[k], vv = v + dv[k];
          if (!comp.in_bounds(uu, vv) || comp(uu, vv) != -1) continue;
          if (!cloud.is_valid(uu, vv) || cloud.curvature(uu, vv) > par.curvature_thresh) continue;
          if (!detail::smooth_edge(cloud, u, v, uu, vv, par)) continue;
          comp(uu, vv) = id;
          stack.push_back(vv * W + uu);
        }
      }
    }
  }
  return comp;
}

namespace detail {

/// K-means over the 3D points of one component, farthest-point seeded.
/// Returns per-point cluster assignment in [0, k).
inline std::vector<int> kmeans_component(const std::vector<Vec3>& pts, int k, uint64_t seed,
                                         int max_iters, double converge) {
  const int n = static_cast<int>(pts.size());
  std::vector<int> assign(n, 0);
  if (k <= 1) return assign;
  k = std::min(k, n);

  // farthest-point seeding, first seed drawn from the rng
  std::mt19937_64 rng(seed);
  std::vector<Vec3> centers;
  centers.reserve(k);
  centers.push_back(pts[std::uniform_int_distribution<int>(0, n - 1)(rng)]);
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  for (int c = 1; c < k; ++c) {
    int far_idx = 0;
    double far_d2 = -1.0;
    for (int i = 0; i < n; ++i) {
      min_d2[i] = std::min(min_d2[i], (pts[i] - centers.back()).squaredNorm());
      if (min_d2[i] > far_d2) {
        far_d2 = min_d2[i];
        far_idx = i;
      }
    }
    centers.push_back(pts[far_idx]);
  }

  // Lloyd iterations on a decimated subset when the component is large
  const int stride = std::max(1, n / 20000);
  std::vector<Vec3> sums(k);
  std::vector<int> counts(k);
  for (int iter = 0; iter < max_iters; ++iter) {
    std::fill(sums.begin(), sums.end(), Vec3::Zero());
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; i += stride) {
      int best = 0;
      double best_d2 = (pts[i] - centers[0]).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d2 = (pts[i] - centers[c]).squaredNorm();
        if (d2 < best_d2) {
          best_d2 = d2;
          best = c;
        }
      }
      sums[best] += pts[i];
      counts[best] += 1;
    }
    double shift = 0.0;
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its center
      const Vec3 nc = sums[c] / counts[c];
      shift = std::max(shift, (nc - centers[c]).norm());
      centers[c] = nc;
    }
    if (shift < converge) break;
  }

  // full-resolution final assignment
  for (int i = 0; i < n; ++i) {
    int best = 0;
    double best_d2 = (pts[i] - centers[0]).squaredNorm();
    for (int c = 1; c < k; ++c) {
      const double d2 = (pts[i] - centers[c]).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = c;
      }
    }
    assign[i] = best;
  }
  return assign;
}

/// Splits every label-grid patch into its 4-connected parts, assigning
/// fresh ids to all but the largest part. Returns the new id count.
inline int enforce_contiguity(Grid<int>& labels, int id_count) {
  const int W = labels.width(), H = labels.height();
  Grid<int> part(W, H, -1);
  struct Part {
    int label;
    std::vector<int> pixels;
  };
  std::vector<std::vector<int>> parts_of(id_count);  // part indices per label
  std::vector<Part> parts;
  std::vector<int> stack;
  for (int v0 = 0; v0 < H; ++v0) {
    for (int u0 = 0; u0 < W; ++u0) {
      const int lab = labels(u0, v0);
      if (lab < 0 || part(u0, v0) != -1) continue;
      const int pid = static_cast<int>(parts.size());
      parts.push_back({lab, {}});
      parts_of[lab].push_back(pid);
      part(u0, v0) = pid;
      stack.push_back(v0 * W + u0);
      while (!stack.empty()) {
        const int idx = stack.back();
        stack.pop_back();
        parts[pid].pixels.push_back(idx);
        const int u = idx % W, v = idx / W;
        constexpr int du[4] = {1, -1, 0, 0};
        constexpr int dv[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int uu = u + du[k], vv = v + dv[k];
          if (part.in_bounds(uu, vv) && part(uu, vv) == -1 && labels(uu, vv) == lab) {
            part(uu, vv) = pid;
            stack.push_back(vv * W + uu);
          }
        }
      }
    }
  }
  int next = id_count;
  for (int lab = 0; lab < id_count; ++lab) {
    auto& pl = parts_of[lab];
    if (pl.size() <= 1) continue;
    // largest part keeps the label
    std::sort(pl.begin(), pl.end(), [&](int a, int b) {
      return parts[a].pixels.size() > parts[b].pixels.size();
    });
    for (size_t i = 1; i < pl.size(); ++i) {
      const int fresh = next++;
      for (int idx : parts[pl[i]].pixels) labels.at_index(idx) = fresh;
    }
  }
  return next;
}

}  // namespace detail

/// Area-regularized decomposition of a component labeling into surface
/// patches: per-component K-means with farthest-point seeding, contiguity
/// splitting, agglomeration of undersized patches, and attachment of the
/// initially ignored edge pixels.
inline Decomposition decompose(const OrganizedCloud& cloud, const Grid<int>& components,
                               const CameraIntrinsics& K, const SegmentParams& par,
                               const Grid<int>* surface_ids = nullptr) {
  const int W = cloud.width(), H = cloud.height();
  Decomposition dec;
  dec.seed = par.seed;
  dec.labels = Grid<int>(W, H, -1);

  // gather component pixel lists
  std::unordered_map<int, std::vector<int>> comp_pixels;
  for (int v = 0; v < H; ++v)
    for (int u = 0; u < W; ++u) {
      const int c = components(u, v);
      if (c >= 0) comp_pixels[c].push_back(v * W + u);
    }

  std::vector<int> comp_of_label;
  int next_label = 0;
  std::vector<int> ordered_comps;
  ordered_comps.reserve(comp_pixels.size());
  for (const auto& [c, _] : comp_pixels) ordered_comps.push_back(c);
  std::sort(ordered_comps.begin(), ordered_comps.end());

  for (const int c : ordered_comps) {
    const auto& idxs = comp_pixels[c];
    if (static_cast<int>(idxs.size()) < par.min_points) continue;  // deferred to attachment
    std::vector<Vec3> pts;
    pts.reserve(idxs.size());
    double comp_area = 0.0;
    for (int idx : idxs) {
      const int u = idx % W, v = idx / W;
      pts.push_back(cloud.points(u, v));
      comp_area += detail::pixel_area(cloud.points(u, v), cloud.normals(u, v), K);
    }
    const int k = std::max(1, static_cast<int>(std::ceil(comp_area / par.target_area)));
    const auto assign = detail::kmeans_component(pts, k, par.seed ^ detail::hash_mix(c),
                                                 par.kmeans_max_iters, par.kmeans_converge);
    const int base = next_label;
    int k_used = 0;
    for (int a : assign) k_used = std::max(k_used, a + 1);
    next_label += k_used;
    comp_of_label.resize(next_label, c);
    for (size_t i = 0; i < idxs.size(); ++i) dec.labels.at_index(idxs[i]) = base + assign[i];
  }

  next_label = detail::enforce_contiguity(dec.labels, next_label);
  comp_of_label.resize(next_label, -1);
  // contiguity splitting keeps the component id of the parent label
  for (int v = 0; v < H; ++v)
    for (int u = 0; u < W; ++u) {
      const int lab = dec.labels(u, v);
      if (lab >= 0 && comp_of_label[lab] < 0 && components(u, v) >= 0)
        comp_of_label[lab] = components(u, v);
    }

  // union-find over labels for agglomeration by edge contraction
  std::vector<int> parent(next_label);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };

  auto recompute = [&](std::vector<Vec3>& cents, std::vector<Vec3>& norms,
                       std::vector<int>& counts) {
    cents.assign(next_label, Vec3::Zero());
    norms.assign(next_label, Vec3::Zero());
    counts.assign(next_label, 0);
    for (int v = 0; v < H; ++v)
      for (int u = 0; u < W; ++u) {
        const int lab = dec.labels(u, v);
        if (lab < 0) continue;
        const int r = find(lab);
        cents[r] += cloud.points(u, v);
        norms[r] += cloud.normals(u, v);
        counts[r] += 1;
      }
    for (int i = 0; i < next_label; ++i)
      if (counts[i] > 0) cents[i] /= counts[i];
  };

  std::vector<Vec3> cents, norms;
  std::vector<int> counts;
  for (int round = 0; round < 8; ++round) {
    recompute(cents, norms, counts);
    struct Merge {
      int small, big;
      double dist;
    };
    std::unordered_map<int, Merge> best;  // per small root
    for (int v = 0; v < H; ++v)
      for (int u = 0; u < W; ++u) {
        const int la = dec.labels(u, v);
        if (la < 0) continue;
        for (const auto& [uu, vv] : {std::pair{u + 1, v}, std::pair{u, v + 1}}) {
          if (!dec.labels.in_bounds(uu, vv)) continue;
          const int lb = dec.labels(uu, vv);
          if (lb < 0) continue;
          int ra = find(la), rb = find(lb);
          if (ra == rb) continue;
          for (int swap = 0; swap < 2; ++swap) {
            const int s = swap ? rb : ra, b = swap ? ra : rb;
            if (counts[s] >= par.min_points || counts[b] < par.min_points) continue;
            const Vec3 ns = norms[s].normalized(), nb = norms[b].normalized();
            if (safe_acos(ns.dot(nb)) >= par.angle_thresh) continue;
            const double d = (cents[s] - cents[b]).norm();
            auto it = best.find(s);
            if (it == best.end() || d < it->second.dist) best[s] = {s, b, d};
          }
        }
      }
    if (best.empty()) break;
    for (const auto& [s, m] : best) parent[find(m.small)] = find(m.big);
  }
  recompute(cents, norms, counts);

  // drop undersized leftovers that found no compatible neighbor
  for (int v = 0; v < H; ++v)
    for (int u = 0; u < W; ++u) {
      const int lab = dec.labels(u, v);
      if (lab < 0) continue;
      const int r = find(lab);
      dec.labels(u, v) = counts[r] >= par.min_points ? r : -1;
    }

  // attach ignored edge pixels / small-component pixels to adjacent patches
  for (int pass = 0; pass < par.attach_passes; ++pass) {
    std::vector<std::pair<int, int>> grabs;  // pixel index -> label
    for (int v = 0; v < H; ++v)
      for (int u = 0; u < W; ++u) {
        if (dec.labels(u, v) >= 0 || !cloud.is_valid(u, v)) continue;
        int best_lab = -1;
        double best_d = std::numeric_limits<double>::infinity();
        constexpr int du[4] = {1, -1, 0, 0};
        constexpr int dv[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int uu = u + du[k], vv = v + dv[k];
          if (!dec.labels.in_bounds(uu, vv)) continue;
          const int lab = dec.labels(uu, vv);
          if (lab < 0) continue;
          const double gap = par.depth_gap * std::max(1.0, cloud.points(u, v).z());
          const double d = (cloud.points(u, v) - cloud.points(uu, vv)).norm();
          if (d >= gap) continue;
          const Vec3 pn = norms[lab].normalized();
          if (safe_acos(cloud.normals(u, v).dot(pn)) >= par.angle_thresh) continue;
          if (d < best_d) {
            best_d = d;
            best_lab = lab;
          }
        }
        if (best_lab >= 0) grabs.emplace_back(v * W + u, best_lab);
      }
    if (grabs.empty()) break;
    for (const auto& [idx, lab] : grabs) dec.labels.at_index(idx) = lab;
  }

  // final stats + dense remap
  std::unordered_map<int, int> remap;
  for (int v = 0; v < H; ++v)
    for (int u = 0; u < W; ++u) {
      int& lab = dec.labels(u, v);
      if (lab < 0) continue;
      auto [it, fresh] = remap.try_emplace(lab, static_cast<int>(dec.superpixels.size()));
      if (fresh) {
        Superpixel sp;
        sp.id = it->second;
        sp.component_id = comp_of_label[lab] >= 0 ? comp_of_label[lab] : -1;
        dec.superpixels.push_back(std::move(sp));
      }
      const int id = it->second;
      lab = -2 - id;  // mark remapped (negative, disjoint from raw labels)
    }
  for (int v = 0; v < H; ++v)
    for (int u = 0; u < W; ++u) {
      int& lab = dec.labels(u, v);
      if (lab <= -2) lab = -2 - lab;
      else if (lab >= 0) lab = -1;
    }

  std::vector<std::unordered_map<int, int>> votes(dec.superpixels.size());
  for (int v = 0; v < H; ++v)
    for (int u = 0; u < W; ++u) {
      const int id = dec.labels(u, v);
      if (id < 0) continue;
      Superpixel& sp = dec.superpixels[id];
      sp.pixels.push_back(v * W + u);
      sp.centroid += cloud.points(u, v);
      sp.normal += cloud.normals(u, v);
      sp.area += detail::pixel_area(cloud.points(u, v), cloud.normals(u, v), K);
      if (surface_ids && !surface_ids->empty()) votes[id][(*surface_ids)(u, v)] += 1;
    }
  std::vector<Superpixel> kept;
  Grid<int> relabel(W, H, -1);
  for (auto& sp : dec.superpixels) {
    if (sp.pixel_count() < par.min_points) continue;  // safety net
    sp.centroid /= sp.pixel_count();
    const double nn = sp.normal.norm();
    if (nn < 1e-9) continue;
    sp.normal /= nn;
    if (!votes[sp.id].empty()) {
      int best_id = -1, best_n = -1;
      for (const auto& [sid, n] : votes[sp.id])
        if (n > best_n || (n == best_n && sid < best_id)) {
          best_n = n;
          best_id = sid;
        }
      sp.majority_surface_id = best_id;
    }
    const int new_id = static_cast<int>(kept.size());
    for (int idx : sp.pixels) relabel.at_index(idx) = new_id;
    sp.id = new_id;
    kept.push_back(std::move(sp));
  }
  dec.superpixels = std::move(kept);
  dec.labels = std::move(relabel);
  return dec;
}

/// Full segmentation: component split followed by decomposition.
inline Decomposition segment_cloud(const OrganizedCloud& cloud, const CameraIntrinsics& K,
                                   const SegmentParams& par,
                                   const Grid<int>* surface_ids = nullptr) {
  const Grid<int> comps = split_components(cloud, par);
  return decompose(cloud, comps, K, par, surface_ids);
}

}  // namespace spa
