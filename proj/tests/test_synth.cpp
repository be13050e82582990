#include "spa/synth.hpp"
#include "test_helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace spa;

namespace {

SceneSpec plane_scene(double z = 2.0, double half = 4.0) {
  SceneSpec scene;
  scene.primitives.push_back(
      {PlanePrim{half, half}, Pose::from_quaternion(Quat::Identity(), Vec3(0, 0, z)), 1});
  return scene;
}

}  // namespace

TEST_CASE("scene validation enforces unique surface ids") {
  SceneSpec scene;
  scene.primitives.push_back({BoxPrim{}, Pose{}, 0});   // occupies ids 0..5
  scene.primitives.push_back({PlanePrim{}, Pose{}, 5});  // collides with face +z
  REQUIRE_THROWS_AS(scene.validate(), std::invalid_argument);
  scene.primitives[1].surface_id = 6;
  REQUIRE_NOTHROW(scene.validate());
  SceneSpec empty;
  REQUIRE_THROWS_AS(empty.validate(), std::invalid_argument);
}

TEST_CASE("fronto-parallel plane renders its exact camera depth") {
  CameraIntrinsics K;
  const RangeImage img = render_depth(plane_scene(2.0), K, Pose{}, NoiseModel{}, 1);
  // every pixel hits the plane at z = 2 regardless of the ray direction,
  // because depth is the camera-frame z of the hit
  const int cu = static_cast<int>(K.cx), cv = static_cast<int>(K.cy);
  REQUIRE(img.depth(cu, cv) == Catch::Approx(2.0).margin(1e-12));
  REQUIRE(img.depth(0, 0) == Catch::Approx(2.0).margin(1e-12));
  REQUIRE(img.surface_id(0, 0) == 1);
}

TEST_CASE("oblique plane depth matches the closed form") {
  // plane rotated 30 degrees about y, centered 2 m ahead; the central ray
  // travels straight down z and hits at z = 2 exactly
  SceneSpec scene;
  scene.primitives.push_back(
      {PlanePrim{5.0, 5.0},
       RigidTransform::from_axis_angle(Vec3(0, 1, 0), deg2rad(30.0), Vec3(0, 0, 2.0)), 1});
  CameraIntrinsics K;
  const RangeImage img = render_depth(scene, K, Pose{}, NoiseModel{}, 1);
  const int cu = static_cast<int>(std::round(K.cx));
  const int cv = static_cast<int>(std::round(K.cy));
  // plane equation in world: n . (p - c) = 0 with n = R*(0,0,1)
  const Vec3 n = Eigen::AngleAxisd(deg2rad(30.0), Vec3::UnitY()).toRotationMatrix() * Vec3(0, 0, 1);
  const Vec3 d((cu - K.cx) / K.fx, (cv - K.cy) / K.fy, 1.0);
  const double expected = n.dot(Vec3(0, 0, 2.0)) / n.dot(d);
  REQUIRE(img.depth(cu, cv) == Catch::Approx(expected).margin(1e-9));
}

TEST_CASE("box faces get stable per-face surface ids") {
  // unit box 3 m ahead; camera sees the -z face (id base+4)
  SceneSpec scene;
  scene.primitives.push_back(
      {BoxPrim{Vec3(0.5, 0.5, 0.5)}, Pose::from_quaternion(Quat::Identity(), Vec3(0, 0, 3.0)),
       10});
  CameraIntrinsics K;
  const RangeImage img = render_depth(scene, K, Pose{}, NoiseModel{}, 1);
  const int cu = static_cast<int>(K.cx), cv = static_cast<int>(K.cy);
  REQUIRE(img.depth(cu, cv) == Catch::Approx(2.5).margin(1e-9));
  REQUIRE(img.surface_id(cu, cv) == 14);  // -z face is index 4
}

TEST_CASE("sphere central depth is distance minus radius") {
  SceneSpec scene;
  scene.primitives.push_back(
      {SpherePrim{0.5}, Pose::from_quaternion(Quat::Identity(), Vec3(0, 0, 3.0)), 2});
  CameraIntrinsics K;
  const RangeImage img = render_depth(scene, K, Pose{}, NoiseModel{}, 1);
  const int cu = static_cast<int>(K.cx), cv = static_cast<int>(K.cy);
  REQUIRE(img.depth(cu, cv) == Catch::Approx(2.5).margin(1e-9));
}

TEST_CASE("cylinder seen side-on: lateral depth and cap ids") {
  // cylinder axis along camera x: rotate local z onto world x
  SceneSpec scene;
  scene.primitives.push_back(
      {CylinderPrim{0.4, 1.0},
       RigidTransform::from_axis_angle(Vec3(0, 1, 0), deg2rad(90.0), Vec3(0, 0, 3.0)), 5});
  CameraIntrinsics K;
  const RangeImage img = render_depth(scene, K, Pose{}, NoiseModel{}, 1);
  const int cu = static_cast<int>(K.cx), cv = static_cast<int>(K.cy);
  REQUIRE(img.depth(cu, cv) == Catch::Approx(2.6).margin(1e-9));
  REQUIRE(img.surface_id(cu, cv) == 5);  // lateral surface
}

TEST_CASE("nearer primitive occludes the farther one") {
  SceneSpec scene = plane_scene(3.0, 5.0);
  scene.primitives.push_back(
      {SpherePrim{0.3}, Pose::from_quaternion(Quat::Identity(), Vec3(0, 0, 1.5)), 7});
  CameraIntrinsics K;
  const RangeImage img = render_depth(scene, K, Pose{}, NoiseModel{}, 1);
  const int cu = static_cast<int>(K.cx), cv = static_cast<int>(K.cy);
  REQUIRE(img.surface_id(cu, cv) == 7);
  REQUIRE(img.depth(cu, cv) == Catch::Approx(1.2).margin(1e-9));
  REQUIRE(img.surface_id(10, 10) == 1);  // corner still sees the plane
}

TEST_CASE("clip volume removes hits outside the box") {
  SceneSpec scene = plane_scene(2.0, 10.0);
  scene.clip_volume = {{Vec3(-0.5, -0.5, 0.0), Vec3(0.5, 0.5, 5.0)}};
  CameraIntrinsics K;
  const RangeImage img = render_depth(scene, K, Pose{}, NoiseModel{}, 1);
  const int cu = static_cast<int>(K.cx), cv = static_cast<int>(K.cy);
  REQUIRE(RangeImage::depth_valid(img.depth(cu, cv)));
  REQUIRE_FALSE(RangeImage::depth_valid(img.depth(5, 5)));  // far corner clipped
}

TEST_CASE("renders are deterministic for a fixed noise seed") {
  CameraIntrinsics K;
  NoiseModel noise;
  noise.depth_sigma_at_1m = 0.005;
  noise.dropout_rate = 0.05;
  noise.seed = 42;
  const RangeImage a = render_depth(plane_scene(), K, Pose{}, noise, 1);
  const RangeImage b = render_depth(plane_scene(), K, Pose{}, noise, 1);
  REQUIRE(a.depth.data() == b.depth.data());
  noise.seed = 43;
  const RangeImage c = render_depth(plane_scene(), K, Pose{}, noise, 1);
  REQUIRE(a.depth.data() != c.depth.data());
}

TEST_CASE("noise statistics match the model") {
  CameraIntrinsics K;
  NoiseModel noise;
  noise.depth_sigma_at_1m = 0.005;
  noise.seed = 1;
  const RangeImage img = render_depth(plane_scene(2.0), K, Pose{}, noise, 1);
  // sigma at depth 2 with quadratic growth = 0.005 * 4 = 0.02
  double sum = 0, sum2 = 0;
  int n = 0;
  for (int v = 0; v < K.height; ++v)
    for (int u = 0; u < K.width; ++u) {
      const double e = img.depth(u, v) - 2.0;
      // small cosine effect is absent: depth is camera z, plane is fronto-parallel
      sum += e;
      sum2 += e * e;
      ++n;
    }
  const double mean = sum / n;
  const double stddev = std::sqrt(sum2 / n - mean * mean);
  REQUIRE(std::abs(mean) < 0.001);
  REQUIRE(stddev == Catch::Approx(0.02).epsilon(0.05));
}

TEST_CASE("dropout removes roughly the configured fraction") {
  CameraIntrinsics K;
  NoiseModel noise;
  noise.dropout_rate = 0.25;
  noise.seed = 2;
  const RangeImage img = render_depth(plane_scene(), K, Pose{}, noise, 1);
  int dropped = 0;
  for (size_t i = 0; i < img.depth.size(); ++i)
    if (!RangeImage::depth_valid(img.depth.at_index(i))) ++dropped;
  const double rate = static_cast<double>(dropped) / img.depth.size();
  REQUIRE(rate == Catch::Approx(0.25).margin(0.01));
}

TEST_CASE("invalid noise model is rejected") {
  NoiseModel bad;
  bad.dropout_rate = 1.5;
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = NoiseModel{};
  bad.depth_sigma_at_1m = -0.1;
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
}
