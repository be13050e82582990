#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

namespace spa {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// acos with the argument clamped to [-1,1]; dot products of unit vectors
/// can drift past 1 by a few ulps.
inline double safe_acos(double x) {
  return std::acos(std::clamp(x, -1.0, 1.0));
}

/// Dense H×W grid stored row-major. The workhorse container for range
/// images, organized clouds and label maps.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, const T& fill = T{})
      : width_(width), height_(height), data_(static_cast<size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  size_t size() const { return data_.size(); }

  T& operator()(int u, int v) { return data_[static_cast<size_t>(v) * width_ + u]; }
  const T& operator()(int u, int v) const { return data_[static_cast<size_t>(v) * width_ + u]; }
  T& at_index(size_t i) { return data_[i]; }
  const T& at_index(size_t i) const { return data_[i]; }

  bool in_bounds(int u, int v) const { return u >= 0 && u < width_ && v >= 0 && v < height_; }

  const std::vector<T>& data() const { return data_; }
  std::vector<T>& data() { return data_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

namespace detail {

/// splitmix64 finalizer; used to derive independent deterministic streams.
inline uint64_t hash_mix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e9b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Runs fn(begin..end) split into contiguous chunks across worker threads.
/// thread_count <= 1 runs inline.
inline void parallel_for(int begin, int end, const std::function<void(int, int)>& fn,
                         int thread_count = 0) {
  if (end <= begin) return;
  if (thread_count <= 0) thread_count = static_cast<int>(std::thread::hardware_concurrency());
  thread_count = std::max(1, std::min(thread_count, end - begin));
  if (thread_count == 1) {
    fn(begin, end);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(thread_count);
  const int total = end - begin;
  const int chunk = (total + thread_count - 1) / thread_count;
  for (int t = 0; t < thread_count; ++t) {
    const int lo = begin + t * chunk;
    const int hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    workers.emplace_back(fn, lo, hi);
  }
  for (auto& w : workers) w.join();
}

}  // namespace spa
