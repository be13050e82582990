#include "spa/common.hpp"
#include "spa/kdtree.hpp"
#include "spa/transform.hpp"
#include "test_helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <atomic>

using namespace spa;

TEST_CASE("grid stores row-major and reports bounds") {
  Grid<int> g(4, 3, -1);
  REQUIRE(g.width() == 4);
  REQUIRE(g.height() == 3);
  REQUIRE(g.size() == 12);
  g(2, 1) = 7;
  REQUIRE(g.at_index(1 * 4 + 2) == 7);
  REQUIRE(g.in_bounds(3, 2));
  REQUIRE_FALSE(g.in_bounds(4, 0));
  REQUIRE_FALSE(g.in_bounds(0, -1));
}

TEST_CASE("safe_acos clamps drifted unit dot products") {
  REQUIRE(safe_acos(1.0 + 1e-15) == 0.0);
  REQUIRE(safe_acos(-1.0 - 1e-15) == Catch::Approx(kPi));
  REQUIRE(safe_acos(0.0) == Catch::Approx(kPi / 2));
}

TEST_CASE("parallel_for covers the range exactly once") {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(0, 1000, [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) hits[i] += 1;
  }, 4);
  for (const auto& h : hits) REQUIRE(h.load() == 1);
  // empty and single-thread ranges
  parallel_for(5, 5, [](int, int) { FAIL("must not run"); }, 4);
}

TEST_CASE("rigid transform round trips through its inverse") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    const RigidTransform t = spa_test::random_rigid(rng);
    REQUIRE(t.is_valid());
    const Vec3 p = spa_test::random_unit(rng) * 3.0;
    REQUIRE((t.inverse().apply(t.apply(p)) - p).norm() < 1e-12);
    // composition is application order
    const RigidTransform s = spa_test::random_rigid(rng);
    REQUIRE(((s * t).apply(p) - s.apply(t.apply(p))).norm() < 1e-12);
  }
}

TEST_CASE("rotation angle of an axis-angle construction") {
  for (double deg : {0.5, 10.0, 90.0, 179.0}) {
    const RigidTransform t = RigidTransform::from_axis_angle(Vec3(0, 0, 1), deg2rad(deg));
    REQUIRE(rad2deg(t.rotation_angle()) == Catch::Approx(deg).margin(1e-9));
  }
}

TEST_CASE("relative transform maps frame a into frame b") {
  std::mt19937_64 rng(11);
  const Pose pose_a = spa_test::random_rigid(rng);
  const Pose pose_b = spa_test::random_rigid(rng);
  const Vec3 p_cam_a(0.4, -0.2, 1.5);
  const Vec3 p_world = pose_a.apply(p_cam_a);
  const Vec3 p_cam_b = pose_b.inverse().apply(p_world);
  const RigidTransform rel = relative_transform(pose_a, pose_b);
  REQUIRE((rel.apply(p_cam_a) - p_cam_b).norm() < 1e-12);
}

TEST_CASE("pose error of an exact estimate is zero; of a 1 degree roll is 1 degree") {
  std::mt19937_64 rng(13);
  const RigidTransform truth = spa_test::random_rigid(rng);
  auto [rot0, trans0] = pose_error(truth, truth);
  REQUIRE(rot0 == Catch::Approx(0.0).margin(1e-9));
  REQUIRE(trans0 == Catch::Approx(0.0).margin(1e-12));
  const RigidTransform off = truth * RigidTransform::from_axis_angle(Vec3(0, 0, 1), deg2rad(1.0));
  auto [rot1, trans1] = pose_error(off, truth);
  REQUIRE(rot1 == Catch::Approx(1.0).margin(1e-9));
  REQUIRE(trans1 == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("kd-tree matches brute force on random point sets") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  using P = Eigen::Matrix<double, 7, 1>;
  std::vector<P> pts(300);
  for (auto& p : pts)
    for (int i = 0; i < 7; ++i) p[i] = uni(rng);
  const KdTree<7> tree{std::vector<P>(pts)};

  for (int trial = 0; trial < 50; ++trial) {
    P q;
    for (int i = 0; i < 7; ++i) q[i] = uni(rng);
    const int k = 1 + trial % 20;
    const std::vector<int> got = tree.nearest(q, k);
    std::vector<int> want(pts.size());
    std::iota(want.begin(), want.end(), 0);
    std::sort(want.begin(), want.end(), [&](int a, int b) {
      const double da = (pts[a] - q).squaredNorm(), db = (pts[b] - q).squaredNorm();
      return da < db || (da == db && a < b);
    });
    want.resize(k);
    REQUIRE(got == want);
  }
}

TEST_CASE("kd-tree query at an indexed point returns that point first") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  using P = Eigen::Matrix<double, 7, 1>;
  std::vector<P> pts(64);
  for (auto& p : pts)
    for (int i = 0; i < 7; ++i) p[i] = uni(rng);
  const KdTree<7> tree{std::vector<P>(pts)};
  for (size_t i = 0; i < pts.size(); ++i) REQUIRE(tree.nearest(pts[i], 1).front() == static_cast<int>(i));
}

TEST_CASE("kd-tree k larger than size returns everything") {
  using P = Eigen::Matrix<double, 7, 1>;
  std::vector<P> pts(5, P::Zero());
  for (int i = 0; i < 5; ++i) pts[i][0] = i;
  const KdTree<7> tree{std::move(pts)};
  P q = P::Zero();
  q[0] = 2.1;
  REQUIRE(tree.nearest(q, 50).size() == 5);
}
