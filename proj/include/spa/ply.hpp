#pragma once

#include "spa/segment.hpp"
#include "spa/transform.hpp"

#include <fstream>
#include <unordered_set>

namespace spa {

namespace detail {

/// Stable, reasonably spread color per patch id.
inline std::array<uint8_t, 3> patch_color(int id) {
  const uint64_t h = hash_mix(static_cast<uint64_t>(id) + 1);
  return {static_cast<uint8_t>(64 + (h & 0xBF)), static_cast<uint8_t>(64 + ((h >> 8) & 0xBF)),
          static_cast<uint8_t>(64 + ((h >> 16) & 0xBF))};
}

inline void write_ply_header(std::ofstream& out, size_t count) {
  out << "ply\nformat ascii 1.0\nelement vertex " << count
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
}

}  // namespace detail

/// Colored cloud of one decomposed view: one stable color per patch,
/// grey for patches not in `associated` (pass nullptr to color everything).
inline void write_decomposition_ply(const std::string& path, const OrganizedCloud& cloud,
                                    const Decomposition& dec,
                                    const std::unordered_set<int>* associated = nullptr,
                                    const RigidTransform& transform = RigidTransform::identity()) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write PLY: " + path);
  size_t count = 0;
  for (const auto& sp : dec.superpixels) count += sp.pixels.size();
  detail::write_ply_header(out, count);
  for (const auto& sp : dec.superpixels) {
    std::array<uint8_t, 3> c = detail::patch_color(sp.id);
    if (associated && !associated->count(sp.id)) c = {128, 128, 128};
    for (int idx : sp.pixels) {
      const Vec3 p = transform.apply(cloud.points.at_index(static_cast<size_t>(idx)));
      out << static_cast<float>(p.x()) << ' ' << static_cast<float>(p.y()) << ' '
          << static_cast<float>(p.z()) << ' ' << int(c[0]) << ' ' << int(c[1]) << ' '
          << int(c[2]) << '\n';
    }
  }
}

/// Both views in one cloud, view A mapped through the estimated transform.
inline void write_merged_ply(const std::string& path, const OrganizedCloud& cloud_a,
                             const Decomposition& dec_a, const RigidTransform& a_to_b,
                             const OrganizedCloud& cloud_b, const Decomposition& dec_b) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write PLY: " + path);
  size_t count = 0;
  for (const auto& sp : dec_a.superpixels) count += sp.pixels.size();
  for (const auto& sp : dec_b.superpixels) count += sp.pixels.size();
  detail::write_ply_header(out, count);
  auto emit = [&](const OrganizedCloud& cloud, const Decomposition& dec,
                  const RigidTransform& t, std::array<uint8_t, 3> tint) {
    for (const auto& sp : dec.superpixels)
      for (int idx : sp.pixels) {
        const Vec3 p = t.apply(cloud.points.at_index(static_cast<size_t>(idx)));
        out << static_cast<float>(p.x()) << ' ' << static_cast<float>(p.y()) << ' '
            << static_cast<float>(p.z()) << ' ' << int(tint[0]) << ' ' << int(tint[1]) << ' '
            << int(tint[2]) << '\n';
      }
  };
  emit(cloud_a, dec_a, a_to_b, {230, 120, 60});
  emit(cloud_b, dec_b, RigidTransform::identity(), {60, 140, 230});
}

}  // namespace spa
