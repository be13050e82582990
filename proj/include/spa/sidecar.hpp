#pragma once

#include "spa/geometry.hpp"

#include <fstream>

namespace spa {

namespace detail {

inline constexpr uint32_t kSidecarMagic = 0x43505352;  // "RSPC"

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated sidecar");
  return v;
}

}  // namespace detail

/// Compact binary sidecar: label grid plus per-patch records, optionally
/// followed by the per-patch feature sets.
inline void save_decomposition(const std::string& path, const Decomposition& dec,
                               const std::vector<FeatureSet>* sets = nullptr) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write sidecar: " + path);
  detail::put(out, detail::kSidecarMagic);
  detail::put<int32_t>(out, dec.labels.width());
  detail::put<int32_t>(out, dec.labels.height());
  detail::put<uint64_t>(out, dec.seed);
  detail::put<int32_t>(out, dec.size());
  out.write(reinterpret_cast<const char*>(dec.labels.data().data()),
            static_cast<std::streamsize>(dec.labels.size() * sizeof(int)));
  for (const auto& sp : dec.superpixels) {
    detail::put<int32_t>(out, sp.id);
    detail::put<int32_t>(out, sp.component_id);
    detail::put<int32_t>(out, sp.majority_surface_id);
    detail::put<int32_t>(out, sp.pixel_count());
    for (int i = 0; i < 3; ++i) detail::put<double>(out, sp.centroid[i]);
    for (int i = 0; i < 3; ++i) detail::put<double>(out, sp.normal[i]);
    detail::put<double>(out, sp.area);
  }
  detail::put<int32_t>(out, sets ? static_cast<int32_t>(sets->size()) : 0);
  if (sets) {
    for (const auto& fs : *sets) {
      detail::put<int32_t>(out, fs.owner);
      detail::put<int32_t>(out, static_cast<int32_t>(fs.features.size()));
      for (int i = 0; i < 7; ++i) detail::put<double>(out, fs.mean[i]);
      for (int i = 0; i < 7; ++i) detail::put<double>(out, fs.normalized_mean[i]);
      for (const auto& f : fs.features) {
        detail::put<int32_t>(out, f.alpha_id);
        for (int i = 0; i < 7; ++i) detail::put<double>(out, f.q[i]);
      }
    }
  }
}

inline Decomposition load_decomposition(const std::string& path,
                                        std::vector<FeatureSet>* sets = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open sidecar: " + path);
  if (detail::get<uint32_t>(in) != detail::kSidecarMagic)
    throw std::runtime_error("bad sidecar header: " + path);
  const int w = detail::get<int32_t>(in);
  const int h = detail::get<int32_t>(in);
  Decomposition dec;
  dec.seed = detail::get<uint64_t>(in);
  const int n = detail::get<int32_t>(in);
  dec.labels = Grid<int>(w, h, -1);
  in.read(reinterpret_cast<char*>(dec.labels.data().data()),
          static_cast<std::streamsize>(dec.labels.size() * sizeof(int)));
  dec.superpixels.resize(n);
  for (auto& sp : dec.superpixels) {
    sp.id = detail::get<int32_t>(in);
    sp.component_id = detail::get<int32_t>(in);
    sp.majority_surface_id = detail::get<int32_t>(in);
    const int count = detail::get<int32_t>(in);
    sp.pixels.reserve(count);
    for (int i = 0; i < 3; ++i) sp.centroid[i] = detail::get<double>(in);
    for (int i = 0; i < 3; ++i) sp.normal[i] = detail::get<double>(in);
    sp.area = detail::get<double>(in);
  }
  for (size_t i = 0; i < dec.labels.size(); ++i) {
    const int id = dec.labels.at_index(i);
    if (id >= 0 && id < n) dec.superpixels[id].pixels.push_back(static_cast<int>(i));
  }
  const int set_count = detail::get<int32_t>(in);
  if (sets) {
    sets->clear();
    sets->resize(set_count);
    for (auto& fs : *sets) {
      fs.owner = detail::get<int32_t>(in);
      const int fc = detail::get<int32_t>(in);
      for (int i = 0; i < 7; ++i) fs.mean[i] = detail::get<double>(in);
      for (int i = 0; i < 7; ++i) fs.normalized_mean[i] = detail::get<double>(in);
      fs.features.resize(fc);
      for (auto& f : fs.features) {
        f.alpha_id = detail::get<int32_t>(in);
        for (int i = 0; i < 7; ++i) f.q[i] = detail::get<double>(in);
      }
    }
  }
  return dec;
}

}  // namespace spa
