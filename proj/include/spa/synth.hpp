#pragma once

#include "spa/rangeio.hpp"
#include "spa/transform.hpp"

#include <optional>
#include <variant>

namespace spa {

/// Finite rectangle in the local xy-plane, facing local +z.
struct PlanePrim {
  double half_x = 1.0;
  double half_y = 1.0;
};

/// Axis-aligned box in the local frame. Faces get ids id+0..id+5 in the
/// order -x,+x,-y,+y,-z,+z.
struct BoxPrim {
  Vec3 half_extents = Vec3(0.5, 0.5, 0.5);
};

/// Local z axis; lateral surface id+0, bottom cap id+1, top cap id+2.
struct CylinderPrim {
  double radius = 0.5;
  double half_height = 0.5;
};

struct SpherePrim {
  double radius = 0.5;
};

struct Primitive {
  std::variant<PlanePrim, BoxPrim, CylinderPrim, SpherePrim> shape;
  Pose pose;           // local -> world
  int surface_id = 0;  // base id; faces offset from it

  int face_count() const {
    if (std::holds_alternative<BoxPrim>(shape)) return 6;
    if (std::holds_alternative<CylinderPrim>(shape)) return 3;
    return 1;
  }
};

struct SceneSpec {
  std::vector<Primitive> primitives;
  std::optional<std::pair<Vec3, Vec3>> clip_volume;  // world-space AABB

  void validate() const {
    if (primitives.empty()) throw std::invalid_argument("scene has no primitives");
    std::vector<int> ids;
    for (const auto& p : primitives)
      for (int f = 0; f < p.face_count(); ++f) ids.push_back(p.surface_id + f);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
      throw std::invalid_argument("scene surface ids are not unique");
  }
};

struct NoiseModel {
  double depth_sigma_at_1m = 0.0;  // meters
  bool quadratic_growth = true;
  double dropout_rate = 0.0;
  uint64_t seed = 0;

  void validate() const {
    if (depth_sigma_at_1m < 0 || dropout_rate < 0 || dropout_rate > 1)
      throw std::invalid_argument("invalid noise model parameters");
  }
};

namespace detail {

struct RayHit {
  double t;  // camera-frame depth (z), since rays use unnormalized z=1 dirs
  int face_id;
};

inline constexpr double kRayEps = 1e-9;

inline std::optional<RayHit> intersect(const PlanePrim& pl, const Vec3& o, const Vec3& d,
                                             int base_id) {
  if (std::abs(d.z()) < kRayEps) return std::nullopt;
  const double t = -o.z() / d.z();
  if (t <= kRayEps) return std::nullopt;
  const Vec3 p = o + t * d;
  if (std::abs(p.x()) > pl.half_x || std::abs(p.y()) > pl.half_y) return std::nullopt;
  return RayHit{t, base_id};
}

inline std::optional<RayHit> intersect(const BoxPrim& b, const Vec3& o, const Vec3& d,
                                           int base_id) {
  // slab test, tracking which slab bounds the entry point
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  int near_axis = -1, near_sign = 0;
  for (int a = 0; a < 3; ++a) {
    const double h = b.half_extents[a];
    if (std::abs(d[a]) < kRayEps) {
      if (std::abs(o[a]) > h) return std::nullopt;
      continue;
    }
    double t0 = (-h - o[a]) / d[a];
    double t1 = (h - o[a]) / d[a];
    int sign0 = -1;
    if (t0 > t1) {
      std::swap(t0, t1);
      sign0 = 1;
    }
    if (t0 > t_near) {
      t_near = t0;
      near_axis = a;
      near_sign = sign0;
    }
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return std::nullopt;
  }
  if (t_near <= kRayEps || near_axis < 0) return std::nullopt;  // inside or behind
  const int face = near_axis * 2 + (near_sign > 0 ? 1 : 0);
  return RayHit{t_near, base_id + face};
}

inline std::optional<RayHit> intersect(const CylinderPrim& c, const Vec3& o,
                                                const Vec3& d, int base_id) {
  std::optional<RayHit> best;
  auto consider = [&](double t, int face) {
    if (t > kRayEps && (!best || t < best->t)) best = RayHit{t, base_id + face};
  };
  // lateral surface
  const double a = d.x() * d.x() + d.y() * d.y();
  if (a > kRayEps) {
    const double bq = 2.0 * (o.x() * d.x() + o.y() * d.y());
    const double cq = o.x() * o.x() + o.y() * o.y() - c.radius * c.radius;
    const double disc = bq * bq - 4 * a * cq;
    if (disc >= 0) {
      const double sq = std::sqrt(disc);
      for (const double t : {(-bq - sq) / (2 * a), (-bq + sq) / (2 * a)}) {
        const double z = o.z() + t * d.z();
        if (std::abs(z) <= c.half_height) consider(t, 0);
      }
    }
  }
  // caps
  if (std::abs(d.z()) > kRayEps) {
    for (int cap = 0; cap < 2; ++cap) {
      const double zc = cap == 0 ? -c.half_height : c.half_height;
      const double t = (zc - o.z()) / d.z();
      const Vec3 p = o + t * d;
      if (p.x() * p.x() + p.y() * p.y() <= c.radius * c.radius) consider(t, 1 + cap);
    }
  }
  return best;
}

inline std::optional<RayHit> intersect(const SpherePrim& s, const Vec3& o, const Vec3& d,
                                              int base_id) {
  const double a = d.squaredNorm();
  const double bq = 2.0 * o.dot(d);
  const double cq = o.squaredNorm() - s.radius * s.radius;
  const double disc = bq * bq - 4 * a * cq;
  if (disc < 0) return std::nullopt;
  const double sq = std::sqrt(disc);
  double t = (-bq - sq) / (2 * a);
  if (t <= kRayEps) t = (-bq + sq) / (2 * a);
  if (t <= kRayEps) return std::nullopt;
  return RayHit{t, base_id};
}

}  // namespace detail

/// Casts one ray per pixel from `pose` (camera-to-world); depth is the
/// camera-frame z of the nearest hit. Noise is applied after visibility,
/// dropout invalidates pixels. Deterministic given noise.seed.
inline RangeImage render_depth(const SceneSpec& scene, const CameraIntrinsics& K, const Pose& pose,
                               const NoiseModel& noise = {}, int threads = 0) {
  scene.validate();
  noise.validate();
  if (!pose.is_valid(1e-9)) throw std::invalid_argument("render_depth: invalid pose");

  RangeImage img;
  img.depth = Grid<double>(K.width, K.height, 0.0);
  img.surface_id = Grid<int>(K.width, K.height, -1);

  // primitive-local ray origins are pose independent of the pixel
  struct LocalRay {
    Vec3 origin;
    Mat3 rot;  // world dir -> local dir
  };
  std::vector<LocalRay> locals;
  locals.reserve(scene.primitives.size());
  for (const auto& prim : scene.primitives) {
    const Pose inv = prim.pose.inverse();
    locals.push_back({inv.apply(pose.translation), inv.rotation});
  }

  parallel_for(
      0, K.height,
      [&](int v_lo, int v_hi) {
        for (int v = v_lo; v < v_hi; ++v) {
          for (int u = 0; u < K.width; ++u) {
            const Vec3 dir_cam((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0);
            const Vec3 dir_world = pose.rotation * dir_cam;
            double best_t = std::numeric_limits<double>::infinity();
            int best_id = -1;
            for (size_t i = 0; i < scene.primitives.size(); ++i) {
              const auto& prim = scene.primitives[i];
              const Vec3 o = locals[i].origin;
              const Vec3 d = locals[i].rot * dir_world;
              const auto hit = std::visit(
                  [&](const auto& shape) { return detail::intersect(shape, o, d, prim.surface_id); },
                  prim.shape);
              if (hit && hit->t < best_t) {
                if (scene.clip_volume) {
                  const Vec3 pw = pose.translation + hit->t * dir_world;
                  const auto& [lo, hi] = *scene.clip_volume;
                  if ((pw.array() < lo.array()).any() || (pw.array() > hi.array()).any()) continue;
                }
                best_t = hit->t;
                best_id = hit->face_id;
              }
            }
            if (best_id < 0) continue;
            double depth = best_t;
            if (noise.depth_sigma_at_1m > 0 || noise.dropout_rate > 0) {
              std::mt19937_64 rng(detail::hash_mix(
                  noise.seed ^ (static_cast<uint64_t>(v) * K.width + u) * 0x9e3779b97f4a7c15ULL));
              if (noise.dropout_rate > 0 &&
                  std::uniform_real_distribution<double>(0.0, 1.0)(rng) < noise.dropout_rate)
                continue;
              if (noise.depth_sigma_at_1m > 0) {
                const double sigma = noise.quadratic_growth
                                         ? noise.depth_sigma_at_1m * depth * depth
                                         : noise.depth_sigma_at_1m;
                depth += std::normal_distribution<double>(0.0, sigma)(rng);
                if (depth <= 0) continue;
              }
            }
            img.depth(u, v) = depth;
            img.surface_id(u, v) = best_id;
          }
        }
      },
      threads);
  return img;
}

}  // namespace spa
