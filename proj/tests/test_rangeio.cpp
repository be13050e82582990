#include "spa/rangeio.hpp"
#include "spa/synth.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

#include <filesystem>

using namespace spa;

namespace {

RangeImage make_test_image(int w = 64, int h = 48) {
  RangeImage img;
  img.depth = Grid<double>(w, h, 0.0);
  img.surface_id = Grid<int>(w, h, -1);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      img.depth(u, v) = 0.5 + 0.0002 * (v * w + u);  // distinct, in range
      img.surface_id(u, v) = (u < w / 2) ? 3 : 9;
    }
  img.depth(5, 5) = 0.0;  // one invalid pixel
  return img;
}

CameraIntrinsics small_intrinsics(int w = 64, int h = 48) {
  CameraIntrinsics K;
  K.width = w;
  K.height = h;
  K.cx = w / 2.0 - 0.5;
  K.cy = h / 2.0 - 0.5;
  K.fx = K.fy = 60.0;
  return K;
}

}  // namespace

TEST_CASE("intrinsics validation rejects nonsense") {
  CameraIntrinsics K;
  REQUIRE_NOTHROW(K.validate());
  K.fx = 0;
  REQUIRE_THROWS_AS(K.validate(), std::invalid_argument);
  K = CameraIntrinsics{};
  K.cx = 1000;
  REQUIRE_THROWS_AS(K.validate(), std::invalid_argument);
  K = CameraIntrinsics{};
  K.depth_scale = -1;
  REQUIRE_THROWS_AS(K.validate(), std::invalid_argument);
}

TEST_CASE("16-bit png round trip preserves quantized depth") {
  const RangeImage img = make_test_image();
  const double scale = 5000.0;
  const auto path = std::filesystem::temp_directory_path() / "spa_test_depth.png";
  save_png16(path.string(), img, scale);
  const RangeImage back = load_png16(path.string(), scale);
  REQUIRE(back.width() == img.width());
  REQUIRE(back.height() == img.height());
  for (int v = 0; v < img.height(); ++v)
    for (int u = 0; u < img.width(); ++u) {
      if (!RangeImage::depth_valid(img.depth(u, v))) {
        REQUIRE_FALSE(RangeImage::depth_valid(back.depth(u, v)));
      } else {
        // exact up to the 1/scale quantization step
        REQUIRE(std::abs(back.depth(u, v) - img.depth(u, v)) <= 0.5 / scale + 1e-12);
      }
    }
  std::filesystem::remove(path);
}

TEST_CASE("raw round trip is lossless and keeps surface ids") {
  const RangeImage img = make_test_image();
  const auto path = std::filesystem::temp_directory_path() / "spa_test_depth.raw";
  save_raw(path.string(), img);
  const RangeImage back = load_raw(path.string());
  REQUIRE(back.has_surface_ids());
  for (int v = 0; v < img.height(); ++v)
    for (int u = 0; u < img.width(); ++u) {
      if (RangeImage::depth_valid(img.depth(u, v)))
        REQUIRE(back.depth(u, v) == Catch::Approx(img.depth(u, v)).epsilon(1e-6));
      REQUIRE(back.surface_id(u, v) == img.surface_id(u, v));
    }
  std::filesystem::remove(path);
}

TEST_CASE("loading a missing file throws") {
  REQUIRE_THROWS(load_png16("/nonexistent/depth.png", 5000.0));
  REQUIRE_THROWS(load_raw("/nonexistent/depth.raw"));
  REQUIRE_THROWS(load_pgm("/nonexistent/depth.pgm", 5000.0));
}

TEST_CASE("backprojection puts pixels on the pinhole rays") {
  const RangeImage img = make_test_image();
  const CameraIntrinsics K = small_intrinsics();
  const OrganizedCloud cloud = backproject(img, K, 0.1, 8.0);
  REQUIRE_FALSE(cloud.is_valid(5, 5));
  for (int v = 0; v < K.height; v += 7)
    for (int u = 0; u < K.width; u += 7) {
      if (!cloud.is_valid(u, v)) continue;
      const Vec3 p = cloud.points(u, v);
      REQUIRE(p.z() == Catch::Approx(img.depth(u, v)));
      const Vec3 px = project(p, K);
      REQUIRE(px.x() == Catch::Approx(static_cast<double>(u)).margin(1e-9));
      REQUIRE(px.y() == Catch::Approx(static_cast<double>(v)).margin(1e-9));
    }
}

TEST_CASE("backprojection respects the depth validity window") {
  RangeImage img = make_test_image();
  img.depth(0, 0) = 0.05;   // below z_min
  img.depth(1, 0) = 9.5;    // above z_max
  const CameraIntrinsics K = small_intrinsics();
  const OrganizedCloud cloud = backproject(img, K, 0.3, 8.0);
  REQUIRE_FALSE(cloud.is_valid(0, 0));
  REQUIRE_FALSE(cloud.is_valid(1, 0));
}

TEST_CASE("backprojection rejects mismatched dimensions") {
  const RangeImage img = make_test_image();
  CameraIntrinsics K = small_intrinsics(128, 96);
  REQUIRE_THROWS_AS(backproject(img, K), std::invalid_argument);
}

TEST_CASE("normal estimation on a rendered plane recovers the plane normal") {
  // plane 2 m ahead, facing the camera
  SceneSpec scene;
  scene.primitives.push_back({PlanePrim{4.0, 4.0},
                              Pose::from_quaternion(Quat::Identity(), Vec3(0, 0, 2.0)), 1});
  CameraIntrinsics K;
  NoiseModel quiet;
  const RangeImage img = render_depth(scene, K, Pose{}, quiet, 1);
  OrganizedCloud cloud = backproject(img, K);
  cloud = estimate_normals(cloud, 4, 0.08, 1);

  int checked = 0;
  for (int v = 40; v < K.height - 40; v += 20)
    for (int u = 40; u < K.width - 40; u += 20) {
      REQUIRE(cloud.is_valid(u, v));
      // plane normal is +z; sensor-facing convention flips it to -z
      REQUIRE(cloud.normals(u, v).dot(Vec3(0, 0, -1)) > 0.9999);
      REQUIRE(cloud.normals(u, v).norm() == Catch::Approx(1.0));
      REQUIRE(cloud.curvature(u, v) < 1e-6);
      REQUIRE(cloud.normals(u, v).dot(cloud.points(u, v)) < 0.0);
      ++checked;
    }
  REQUIRE(checked > 50);
}

TEST_CASE("normal estimation invalidates isolated pixels") {
  RangeImage img;
  img.depth = Grid<double>(64, 48, 0.0);
  img.depth(30, 20) = 1.0;  // a single lonely return
  const CameraIntrinsics K = small_intrinsics();
  OrganizedCloud cloud = backproject(img, K, 0.1, 8.0);
  cloud = estimate_normals(cloud, 4, 0.08, 1);
  REQUIRE_FALSE(cloud.is_valid(30, 20));
}

TEST_CASE("normal estimation does not smooth across depth discontinuities") {
  // two fronto-parallel planes with a large depth gap between image halves
  RangeImage img;
  const CameraIntrinsics K = small_intrinsics();
  img.depth = Grid<double>(K.width, K.height, 0.0);
  for (int v = 0; v < K.height; ++v)
    for (int u = 0; u < K.width; ++u) img.depth(u, v) = u < K.width / 2 ? 1.0 : 2.0;
  OrganizedCloud cloud = backproject(img, K, 0.1, 8.0);
  cloud = estimate_normals(cloud, 4, 0.08, 1);
  // right at the seam the far side must not bend the near-side normal
  const int seam = K.width / 2 - 1;
  REQUIRE(cloud.is_valid(seam, 24));
  REQUIRE(cloud.normals(seam, 24).dot(Vec3(0, 0, -1)) > 0.999);
}

TEST_CASE("median filter removes spikes, keeps seams and invalid pixels") {
  RangeImage img;
  const CameraIntrinsics K = small_intrinsics();
  img.depth = Grid<double>(K.width, K.height, 0.0);
  for (int v = 0; v < K.height; ++v)
    for (int u = 0; u < K.width; ++u) img.depth(u, v) = u < K.width / 2 ? 1.0 : 2.0;
  img.depth(10, 10) = 1.04;  // small spike within the gap window
  img.depth(20, 20) = 0.0;   // dropout
  const RangeImage out = median_filter_depth(img, 2, 0.15, 1);
  REQUIRE(out.depth(10, 10) == 1.0);            // spike replaced by the local median
  REQUIRE(out.depth(20, 20) == 0.0);            // invalid stays invalid
  const int seam = K.width / 2 - 1;
  REQUIRE(out.depth(seam, 24) == 1.0);          // seam edge untouched
  REQUIRE(out.depth(seam + 1, 24) == 2.0);      // far side untouched too
  REQUIRE_THROWS_AS(median_filter_depth(img, 0), std::invalid_argument);
}

TEST_CASE("median filter shrinks gaussian depth noise") {
  // fronto-parallel noisy plane: the windowed median should cut the standard
  // deviation roughly in half or better
  std::mt19937_64 rng(4242);
  std::normal_distribution<double> gauss(0.0, 0.02);
  RangeImage img;
  const CameraIntrinsics K = small_intrinsics();
  img.depth = Grid<double>(K.width, K.height, 0.0);
  for (int v = 0; v < K.height; ++v)
    for (int u = 0; u < K.width; ++u) img.depth(u, v) = 2.0 + gauss(rng);
  const RangeImage out = median_filter_depth(img, 2, 0.5, 1);
  double ss = 0.0;
  int n = 0;
  for (int v = 4; v < K.height - 4; ++v)
    for (int u = 4; u < K.width - 4; ++u) {
      const double e = out.depth(u, v) - 2.0;
      ss += e * e;
      ++n;
    }
  const double sigma = std::sqrt(ss / n);
  REQUIRE(sigma < 0.01);
}
