#pragma once

#include "spa/common.hpp"

#include <png.h>

#include <Eigen/Eigenvalues>

#include <cstdio>
#include <cstring>
#include <limits>
#include <memory>
#include <string>

namespace spa {

struct CameraIntrinsics {
  double fx = 525.0;
  double fy = 525.0;
  double cx = 319.5;
  double cy = 239.5;
  int width = 640;
  int height = 480;
  double depth_scale = 5000.0;  // stored units per meter

  void validate() const {
    if (fx <= 0 || fy <= 0) throw std::invalid_argument("intrinsics: focal lengths must be > 0");
    if (cx <= 0 || cx >= width || cy <= 0 || cy >= height)
      throw std::invalid_argument("intrinsics: principal point outside image");
    if (depth_scale <= 0) throw std::invalid_argument("intrinsics: depth_scale must be > 0");
  }
};

/// Depth in meters; 0 or NaN marks an invalid pixel. surface_id carries
/// synthetic ground-truth labels (-1 where absent).
struct RangeImage {
  Grid<double> depth;
  Grid<int> surface_id;

  int width() const { return depth.width(); }
  int height() const { return depth.height(); }
  bool has_surface_ids() const { return !surface_id.empty(); }

  static bool depth_valid(double d) { return std::isfinite(d) && d > 0.0; }
};

struct OrganizedCloud {
  Grid<Vec3> points;
  Grid<Vec3> normals;
  Grid<double> curvature;
  Grid<uint8_t> valid;

  int width() const { return points.width(); }
  int height() const { return points.height(); }
  bool is_valid(int u, int v) const { return valid(u, v) != 0; }
};

enum class RangeFormat { Png16, Pgm, RawF32 };

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline constexpr uint32_t kRawMagic = 0x44505352;  // "RSPD"

}  // namespace detail

/// 16-bit grayscale PNG, value/depth_scale meters, 0 = invalid.
inline RangeImage load_png16(const std::string& path, double depth_scale) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open depth image: " + path);

  png_byte header[8];
  if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8))
    throw std::runtime_error("not a PNG file: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("PNG decode failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (bit_depth != 16 || color_type != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("expected 16-bit grayscale PNG: " + path);
  }
  png_set_swap(png);  // PNG is big-endian on the wire
  png_read_update_info(png, info);

  std::vector<uint16_t> row(width);
  RangeImage img;
  img.depth = Grid<double>(width, height, 0.0);
  for (int v = 0; v < height; ++v) {
    png_read_row(png, reinterpret_cast<png_bytep>(row.data()), nullptr);
    for (int u = 0; u < width; ++u)
      img.depth(u, v) = row[u] == 0 ? 0.0 : static_cast<double>(row[u]) / depth_scale;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

inline void save_png16(const std::string& path, const RangeImage& img, double depth_scale) {
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot write depth image: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("PNG encode failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width(), img.height(), 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_set_swap(png);

  std::vector<uint16_t> row(img.width());
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) {
      const double d = img.depth(u, v);
      double stored = RangeImage::depth_valid(d) ? std::round(d * depth_scale) : 0.0;
      row[u] = static_cast<uint16_t>(std::clamp(stored, 0.0, 65535.0));
    }
    png_write_row(png, reinterpret_cast<png_bytep>(row.data()));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// Binary P5 PGM with 16-bit samples, same conventions as png16.
inline RangeImage load_pgm(const std::string& path, double depth_scale) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open depth image: " + path);
  char magic[3] = {};
  int width = 0, height = 0, maxval = 0;
  if (std::fscanf(fp.get(), "%2s %d %d %d", magic, &width, &height, &maxval) != 4 ||
      std::strcmp(magic, "P5") != 0 || width <= 0 || height <= 0)
    throw std::runtime_error("not a binary PGM: " + path);
  std::fgetc(fp.get());  // single whitespace after maxval
  const bool wide = maxval > 255;
  RangeImage img;
  img.depth = Grid<double>(width, height, 0.0);
  std::vector<uint8_t> row(static_cast<size_t>(width) * (wide ? 2 : 1));
  for (int v = 0; v < height; ++v) {
    if (std::fread(row.data(), 1, row.size(), fp.get()) != row.size())
      throw std::runtime_error("truncated PGM: " + path);
    for (int u = 0; u < width; ++u) {
      const uint32_t raw = wide ? (static_cast<uint32_t>(row[2 * u]) << 8) | row[2 * u + 1]
                                : row[u];  // PGM stores big-endian
      img.depth(u, v) = raw == 0 ? 0.0 : static_cast<double>(raw) / depth_scale;
    }
  }
  return img;
}

/// Raw float32 exchange format: 12-byte header (u32 magic, u32 width,
/// u32 height) then row-major float depths in meters. An optional second
/// plane of int32 surface ids may follow.
inline void save_raw(const std::string& path, const RangeImage& img) {
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot write raw depth: " + path);
  const uint32_t header[3] = {detail::kRawMagic, static_cast<uint32_t>(img.width()),
                              static_cast<uint32_t>(img.height())};
  std::fwrite(header, sizeof(uint32_t), 3, fp.get());
  std::vector<float> plane(img.depth.size());
  for (size_t i = 0; i < plane.size(); ++i) plane[i] = static_cast<float>(img.depth.at_index(i));
  std::fwrite(plane.data(), sizeof(float), plane.size(), fp.get());
  if (img.has_surface_ids())
    std::fwrite(img.surface_id.data().data(), sizeof(int32_t), img.surface_id.size(), fp.get());
}

inline RangeImage load_raw(const std::string& path, double depth_scale = 1.0) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open raw depth: " + path);
  uint32_t header[3];
  if (std::fread(header, sizeof(uint32_t), 3, fp.get()) != 3 || header[0] != detail::kRawMagic)
    throw std::runtime_error("bad raw depth header: " + path);
  const int width = static_cast<int>(header[1]);
  const int height = static_cast<int>(header[2]);
  if (width <= 0 || height <= 0 || width > 1 << 16 || height > 1 << 16)
    throw std::runtime_error("implausible raw depth dimensions: " + path);
  RangeImage img;
  img.depth = Grid<double>(width, height, 0.0);
  std::vector<float> plane(img.depth.size());
  if (std::fread(plane.data(), sizeof(float), plane.size(), fp.get()) != plane.size())
    throw std::runtime_error("truncated raw depth: " + path);
  for (size_t i = 0; i < plane.size(); ++i) {
    const float d = plane[i];
    img.depth.at_index(i) = (std::isfinite(d) && d > 0.f) ? d / depth_scale : 0.0;
  }
  // trailing surface-id plane is optional
  std::vector<int32_t> ids(img.depth.size());
  if (std::fread(ids.data(), sizeof(int32_t), ids.size(), fp.get()) == ids.size()) {
    img.surface_id = Grid<int>(width, height, -1);
    for (size_t i = 0; i < ids.size(); ++i) img.surface_id.at_index(i) = ids[i];
  }
  return img;
}

inline RangeImage load_range_image(const std::string& path, RangeFormat format,
                                   double depth_scale) {
  switch (format) {
    case RangeFormat::Png16:
      return load_png16(path, depth_scale);
    case RangeFormat::Pgm:
      return load_pgm(path, depth_scale);
    case RangeFormat::RawF32:
      // raw float32 depth is already in meters; the scale only applies to
      // the 16-bit integer encodings
      return load_raw(path);
  }
  throw std::invalid_argument("unknown range image format");
}

/// Edge-preserving noise reduction: each valid pixel is replaced by the
/// median of the valid depths in its (2r+1)^2 window that lie within
/// max_depth_gap of the center value, so measurements across a depth seam
/// never mix. Invalid pixels stay invalid.
inline RangeImage median_filter_depth(const RangeImage& img, int radius_px,
                                      double max_depth_gap = 0.15, int threads = 0) {
  if (radius_px < 1) throw std::invalid_argument("median_filter_depth: radius must be >= 1");
  RangeImage out = img;
  const int W = img.width(), H = img.height();
  parallel_for(
      0, H,
      [&](int v_begin, int v_end) {
        std::vector<double> window;
        window.reserve(static_cast<size_t>(2 * radius_px + 1) * (2 * radius_px + 1));
        for (int v = v_begin; v < v_end; ++v) {
          for (int u = 0; u < W; ++u) {
            const double center = img.depth(u, v);
            if (!RangeImage::depth_valid(center)) continue;
            window.clear();
            for (int dv = -radius_px; dv <= radius_px; ++dv) {
              for (int du = -radius_px; du <= radius_px; ++du) {
                const int uu = u + du, vv = v + dv;
                if (!img.depth.in_bounds(uu, vv)) continue;
                const double d = img.depth(uu, vv);
                if (RangeImage::depth_valid(d) && std::abs(d - center) <= max_depth_gap)
                  window.push_back(d);
              }
            }
            if (window.size() < 3) continue;
            const auto mid = window.begin() + window.size() / 2;
            std::nth_element(window.begin(), mid, window.end());
            out.depth(u, v) = *mid;
          }
        }
      },
      threads);
  return out;
}

/// Pinhole back-projection. Fills points + valid only; normals/curvature
/// come from estimate_normals.
inline OrganizedCloud backproject(const RangeImage& img, const CameraIntrinsics& K,
                                  double z_min = 0.3, double z_max = 8.0) {
  if (img.width() != K.width || img.height() != K.height)
    throw std::invalid_argument("backproject: image dimensions do not match intrinsics");
  OrganizedCloud cloud;
  cloud.points = Grid<Vec3>(K.width, K.height, Vec3::Zero());
  cloud.normals = Grid<Vec3>(K.width, K.height, Vec3::Zero());
  cloud.curvature = Grid<double>(K.width, K.height, 0.0);
  cloud.valid = Grid<uint8_t>(K.width, K.height, 0);
  for (int v = 0; v < K.height; ++v) {
    for (int u = 0; u < K.width; ++u) {
      const double d = img.depth(u, v);
      if (!RangeImage::depth_valid(d) || d < z_min || d > z_max) continue;
      cloud.points(u, v) = Vec3(d * (u - K.cx) / K.fx, d * (v - K.cy) / K.fy, d);
      cloud.valid(u, v) = 1;
    }
  }
  return cloud;
}

/// Projects a 3D point back to pixel coordinates (u, v) and depth.
inline Vec3 project(const Vec3& p, const CameraIntrinsics& K) {
  return Vec3(K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy, p.z());
}

/// Windowed PCA plane fit per pixel. Neighbors within radius_px whose depth
/// differs from the center by less than max_depth_gap contribute; pixels with
/// fewer than 5 usable neighbors become invalid. Curvature is the surface
/// variation lambda0 / (lambda0 + lambda1 + lambda2). Normals point at the
/// sensor (n . p < 0).
inline OrganizedCloud estimate_normals(const OrganizedCloud& cloud, int radius_px,
                                       double max_depth_gap, int threads = 0) {
  OrganizedCloud out = cloud;
  const int W = cloud.width(), H = cloud.height();
  parallel_for(
      0, H,
      [&](int v_lo, int v_hi) {
        for (int v = v_lo; v < v_hi; ++v) {
          for (int u = 0; u < W; ++u) {
            if (!cloud.is_valid(u, v)) continue;
            const double z0 = cloud.points(u, v).z();
            Vec3 sum = Vec3::Zero();
            Eigen::Matrix3d outer = Eigen::Matrix3d::Zero();
            int n = 0;
            for (int dv = -radius_px; dv <= radius_px; ++dv) {
              const int vv = v + dv;
              if (vv < 0 || vv >= H) continue;
              for (int du = -radius_px; du <= radius_px; ++du) {
                const int uu = u + du;
                if (uu < 0 || uu >= W || !cloud.is_valid(uu, vv)) continue;
                const Vec3& p = cloud.points(uu, vv);
                if (std::abs(p.z() - z0) >= max_depth_gap) continue;
                sum += p;
                outer += p * p.transpose();
                ++n;
              }
            }
            if (n < 5) {
              out.valid(u, v) = 0;
              continue;
            }
            const Vec3 mean = sum / n;
            Mat3 cov = outer / n - mean * mean.transpose();
            Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
            const Vec3 evals = eig.eigenvalues().cwiseMax(0.0);  // ascending
            const double total = evals.sum();
            Vec3 normal = eig.eigenvectors().col(0);
            if (normal.dot(cloud.points(u, v)) > 0) normal = -normal;
            out.normals(u, v) = normal.normalized();
            out.curvature(u, v) = total > 0 ? evals[0] / total : 0.0;
          }
        }
      },
      threads);
  return out;
}

}  // namespace spa
