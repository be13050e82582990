#pragma once

#include "spa/assoc.hpp"
#include "spa/ply.hpp"
#include "spa/sidecar.hpp"
#include "spa/synth.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <unordered_set>

namespace spa {

using json = nlohmann::json;

/// Pipeline failure tagged with the stage that raised it.
struct StageError : std::runtime_error {
  StageError(const std::string& stage, const std::string& msg)
      : std::runtime_error("[" + stage + "] " + msg), stage_name(stage) {}
  std::string stage_name;
};

struct RunConfig {
  // input mode: "dataset" (two depth images) or "synthetic" (scene + poses)
  std::string mode = "dataset";
  std::string depth_a;
  std::string depth_b;
  std::string format = "png16";  // png16 | pgm | raw-f32

  SceneSpec scene;
  Pose pose_a;
  Pose pose_b;
  NoiseModel noise;

  CameraIntrinsics intrinsics;
  double z_min = 0.3;
  double z_max = 8.0;
  int median_radius_px = 0;  // 0 disables depth median filtering
  int normal_radius_px = 4;
  double normal_max_depth_gap = 0.08;

  SegmentParams seg;

  double e_r = 0.02;             // ordering distance tolerance, meters
  double e_theta = deg2rad(5.0);  // ordering/signum angular tolerance

  EditCosts costs;
  MatchTolerances tol;
  int query_count = 75;   // C
  double lambda = 0.65;   // gate
  int k_s = 0;            // neighborhood size, 0 = full view
  double downsample_voxel = 0.0;
  bool mutual_filter = false;

  RansacParams ransac;

  uint64_t seed = 0;
  int threads = 0;
  std::string out_dir = "out";

  // optional externally supplied ground truth (benchmark mode fills this)
  bool has_truth = false;
  RigidTransform truth;

  AssociationParams association_params() const {
    AssociationParams par;
    par.query_count = query_count;
    par.lambda = lambda;
    par.costs = costs;
    par.tol = tol;
    par.k_s = k_s;
    par.downsample_voxel = downsample_voxel;
    par.mutual_filter = mutual_filter;
    par.threads = threads;
    return par;
  }
};

namespace detail {

inline Vec3 parse_vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected 3-element array");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

/// Pose from {"position":[..], "quaternion":[qx,qy,qz,qw]} or
/// {"position":[..], "rpy":[deg,deg,deg]} or
/// {"position":[..], "look_at":[..], "roll": deg}.
inline Pose parse_pose(const json& j) {
  Pose pose;
  const Vec3 pos = j.contains("position") ? parse_vec3(j["position"]) : Vec3::Zero();
  pose.translation = pos;
  if (j.contains("quaternion")) {
    const auto& q = j["quaternion"];
    pose.rotation = Quat(q[3].get<double>(), q[0].get<double>(), q[1].get<double>(),
                         q[2].get<double>()).normalized().toRotationMatrix();
  } else if (j.contains("rpy")) {
    const Vec3 rpy = parse_vec3(j["rpy"]) * kPi / 180.0;
    pose.rotation = (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) *
                     Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
                     Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
                        .toRotationMatrix();
  } else if (j.contains("look_at")) {
    const Vec3 target = parse_vec3(j["look_at"]);
    const double roll = deg2rad(j.value("roll", 0.0));
    const Vec3 fwd = (target - pos).normalized();
    Vec3 down(0, 0, -1);
    if (std::abs(fwd.dot(down)) > 0.98) down = Vec3(0, -1, 0);
    const Vec3 x = down.cross(fwd).normalized();
    const Vec3 y = fwd.cross(x);
    Mat3 base;
    base.col(0) = x;
    base.col(1) = y;
    base.col(2) = fwd;
    pose.rotation = base * Eigen::AngleAxisd(roll, Vec3::UnitZ()).toRotationMatrix();
  }
  return pose;
}

inline json pose_json(const Pose& p) {
  const Quat q(p.rotation);
  return {{"position", vec3_json(p.translation)},
          {"quaternion", json::array({q.x(), q.y(), q.z(), q.w()})}};
}

inline Primitive parse_primitive(const json& j) {
  Primitive prim;
  const std::string type = j.at("type").get<std::string>();
  if (type == "plane")
    prim.shape = PlanePrim{j.value("half_x", 1.0), j.value("half_y", 1.0)};
  else if (type == "box")
    prim.shape = BoxPrim{j.contains("half_extents") ? parse_vec3(j["half_extents"])
                                                    : Vec3(0.5, 0.5, 0.5)};
  else if (type == "cylinder")
    prim.shape = CylinderPrim{j.value("radius", 0.5), j.value("half_height", 0.5)};
  else if (type == "sphere")
    prim.shape = SpherePrim{j.value("radius", 0.5)};
  else
    throw std::invalid_argument("unknown primitive type: " + type);
  prim.pose = parse_pose(j);
  prim.surface_id = j.at("surface_id").get<int>();
  return prim;
}

inline SceneSpec parse_scene(const json& j) {
  SceneSpec scene;
  for (const auto& pj : j.at("primitives")) scene.primitives.push_back(parse_primitive(pj));
  if (j.contains("clip"))
    scene.clip_volume = {parse_vec3(j["clip"][0]), parse_vec3(j["clip"][1])};
  scene.validate();
  return scene;
}

inline RangeFormat parse_format(const std::string& s) {
  if (s == "png16") return RangeFormat::Png16;
  if (s == "pgm") return RangeFormat::Pgm;
  if (s == "raw-f32") return RangeFormat::RawF32;
  throw std::invalid_argument("unknown depth format: " + s);
}

}  // namespace detail

inline RunConfig config_from_json(const json& j) {
  RunConfig c;
  c.mode = j.value("mode", c.mode);
  c.depth_a = j.value("depth_a", c.depth_a);
  c.depth_b = j.value("depth_b", c.depth_b);
  c.format = j.value("format", c.format);
  if (j.contains("scene")) c.scene = detail::parse_scene(j["scene"]);
  if (j.contains("pose_a")) c.pose_a = detail::parse_pose(j["pose_a"]);
  if (j.contains("pose_b")) c.pose_b = detail::parse_pose(j["pose_b"]);
  if (j.contains("noise")) {
    const auto& n = j["noise"];
    c.noise.depth_sigma_at_1m = n.value("depth_sigma_at_1m", 0.0);
    c.noise.quadratic_growth = n.value("quadratic_growth", true);
    c.noise.dropout_rate = n.value("dropout_rate", 0.0);
  }
  if (j.contains("intrinsics")) {
    const auto& k = j["intrinsics"];
    c.intrinsics.fx = k.value("fx", c.intrinsics.fx);
    c.intrinsics.fy = k.value("fy", c.intrinsics.fy);
    c.intrinsics.cx = k.value("cx", c.intrinsics.cx);
    c.intrinsics.cy = k.value("cy", c.intrinsics.cy);
    c.intrinsics.width = k.value("width", c.intrinsics.width);
    c.intrinsics.height = k.value("height", c.intrinsics.height);
    c.intrinsics.depth_scale = k.value("depth_scale", c.intrinsics.depth_scale);
  }
  c.z_min = j.value("z_min", c.z_min);
  c.z_max = j.value("z_max", c.z_max);
  c.median_radius_px = j.value("median_radius_px", c.median_radius_px);
  c.normal_radius_px = j.value("normal_radius_px", c.normal_radius_px);
  c.normal_max_depth_gap = j.value("normal_max_depth_gap", c.normal_max_depth_gap);

  c.seg.angle_thresh = deg2rad(j.value("angle_thresh_deg", rad2deg(c.seg.angle_thresh)));
  c.seg.depth_gap = j.value("depth_gap", c.seg.depth_gap);
  c.seg.curvature_thresh = j.value("curvature_thresh", c.seg.curvature_thresh);
  c.seg.min_points = j.value("min_points", c.seg.min_points);
  c.seg.target_area = j.value("target_area", c.seg.target_area);

  c.e_r = j.value("e_r", c.e_r);
  c.e_theta = deg2rad(j.value("e_theta_deg", rad2deg(c.e_theta)));
  c.costs.insert = j.value("cost_insert", c.costs.insert);
  c.costs.del = j.value("cost_delete", c.costs.del);
  if (j.contains("cost_replace") && !j["cost_replace"].is_null())
    c.costs.replace = j["cost_replace"].get<double>();
  c.costs.transpose = j.value("cost_transpose", c.costs.transpose);
  c.tol.r_dev = j.value("r_dev", c.tol.r_dev);
  c.tol.theta_dev = deg2rad(j.value("theta_dev_deg", rad2deg(c.tol.theta_dev)));
  c.tol.legacy_noise_layout = j.value("legacy_noise_layout", c.tol.legacy_noise_layout);
  c.query_count = j.value("query_count", c.query_count);
  c.lambda = j.value("lambda", c.lambda);
  c.k_s = j.value("k_s", c.k_s);
  c.downsample_voxel = j.value("downsample_voxel", c.downsample_voxel);
  c.mutual_filter = j.value("mutual_filter", c.mutual_filter);

  c.ransac.inlier_thresh = j.value("ransac_inlier_thresh", c.ransac.inlier_thresh);
  c.ransac.iterations = j.value("ransac_iterations", c.ransac.iterations);

  c.seed = j.value("seed", c.seed);
  c.seg.seed = c.seed;
  c.noise.seed = c.seed;
  c.ransac.seed = c.seed;
  c.threads = j.value("threads", c.threads);
  c.seg.threads = c.threads;
  c.out_dir = j.value("out_dir", c.out_dir);
  return c;
}

/// The effective configuration, echoed verbatim into every run report.
inline json config_to_json(const RunConfig& c) {
  json j;
  j["mode"] = c.mode;
  j["depth_a"] = c.depth_a;
  j["depth_b"] = c.depth_b;
  j["format"] = c.format;
  if (c.mode == "synthetic") {
    j["pose_a"] = detail::pose_json(c.pose_a);
    j["pose_b"] = detail::pose_json(c.pose_b);
    j["noise"] = {{"depth_sigma_at_1m", c.noise.depth_sigma_at_1m},
                  {"quadratic_growth", c.noise.quadratic_growth},
                  {"dropout_rate", c.noise.dropout_rate}};
    j["scene_primitives"] = static_cast<int>(c.scene.primitives.size());
  }
  j["intrinsics"] = {{"fx", c.intrinsics.fx}, {"fy", c.intrinsics.fy}, {"cx", c.intrinsics.cx},
                     {"cy", c.intrinsics.cy}, {"width", c.intrinsics.width},
                     {"height", c.intrinsics.height}, {"depth_scale", c.intrinsics.depth_scale}};
  j["z_min"] = c.z_min;
  j["z_max"] = c.z_max;
  j["median_radius_px"] = c.median_radius_px;
  j["normal_radius_px"] = c.normal_radius_px;
  j["normal_max_depth_gap"] = c.normal_max_depth_gap;
  j["angle_thresh_deg"] = rad2deg(c.seg.angle_thresh);
  j["depth_gap"] = c.seg.depth_gap;
  j["curvature_thresh"] = c.seg.curvature_thresh;
  j["min_points"] = c.seg.min_points;
  j["target_area"] = c.seg.target_area;
  j["e_r"] = c.e_r;
  j["e_theta_deg"] = rad2deg(c.e_theta);
  j["cost_insert"] = c.costs.insert;
  j["cost_delete"] = c.costs.del;
  j["cost_replace"] = std::isfinite(c.costs.replace) ? json(c.costs.replace) : json();
  j["cost_transpose"] = c.costs.transpose;
  j["r_dev"] = c.tol.r_dev;
  j["theta_dev_deg"] = rad2deg(c.tol.theta_dev);
  j["legacy_noise_layout"] = c.tol.legacy_noise_layout;
  j["query_count"] = c.query_count;
  j["lambda"] = c.lambda;
  j["k_s"] = c.k_s;
  j["downsample_voxel"] = c.downsample_voxel;
  j["mutual_filter"] = c.mutual_filter;
  j["ransac_inlier_thresh"] = c.ransac.inlier_thresh;
  j["ransac_iterations"] = c.ransac.iterations;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["out_dir"] = c.out_dir;
  return j;
}

struct PairResult {
  OrganizedCloud cloud_a;
  OrganizedCloud cloud_b;
  ViewData view_a;
  ViewData view_b;
  AssociationSet assoc;
  RansacResult ransac;
  PairEval eval;
  bool has_truth = false;
  RigidTransform truth;
  json report;
};

namespace detail {

inline ViewData preprocess_view(const RangeImage& img, const RunConfig& cfg) {
  OrganizedCloud cloud;
  try {
    const RangeImage* src = &img;
    RangeImage filtered;
    if (cfg.median_radius_px > 0) {
      filtered = median_filter_depth(img, cfg.median_radius_px, 0.15, cfg.threads);
      src = &filtered;
    }
    cloud = backproject(*src, cfg.intrinsics, cfg.z_min, cfg.z_max);
    cloud = estimate_normals(cloud, cfg.normal_radius_px, cfg.normal_max_depth_gap, cfg.threads);
  } catch (const std::exception& e) {
    throw StageError("rangeio", e.what());
  }
  Decomposition dec;
  try {
    // same seed for both views: an identical input image must decompose
    // identically, so a self-pair associates with zero distance
    SegmentParams seg = cfg.seg;
    seg.seed = cfg.seed;
    dec = segment_cloud(cloud, cfg.intrinsics, seg,
                        img.has_surface_ids() ? &img.surface_id : nullptr);
  } catch (const std::exception& e) {
    throw StageError("segment", e.what());
  }
  try {
    ViewData view = build_view(std::move(dec), cfg.k_s, cfg.e_r, cfg.e_theta, cfg.threads);
    return view;
  } catch (const std::exception& e) {
    throw StageError("geometry", e.what());
  }
}

inline json histogram_json(const std::vector<Association>& pairs) {
  std::array<int, 20> hist{};
  for (const auto& a : pairs)
    hist[std::min<size_t>(19, static_cast<size_t>(a.d_hat * 20.0))] += 1;
  return json(hist);
}

inline double median_d_hat(std::vector<Association> pairs) {
  if (pairs.empty()) return -1.0;
  std::sort(pairs.begin(), pairs.end(),
            [](const Association& a, const Association& b) { return a.d_hat < b.d_hat; });
  return pairs[pairs.size() / 2].d_hat;
}

inline json transform_json(const RigidTransform& t) {
  json m = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m.push_back(t.rotation(r, c));
  // row-major 4x4: interleave translation
  json full = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) full.push_back(t.rotation(r, c));
    full.push_back(t.translation[r]);
  }
  for (int c = 0; c < 3; ++c) full.push_back(0.0);
  full.push_back(1.0);
  return full;
}

inline std::string trajectory_line(double timestamp, const RigidTransform& t) {
  const Quat q(t.rotation);
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.6f %.9f %.9f %.9f %.9f %.9f %.9f %.9f", timestamp,
                t.translation.x(), t.translation.y(), t.translation.z(), q.x(), q.y(), q.z(),
                q.w());
  return buf;
}

}  // namespace detail

/// Core of one pair run, operating on in-memory range images. Fills
/// everything except file artifacts.
inline PairResult compute_pair(const RangeImage& img_a, const RangeImage& img_b,
                               const RunConfig& cfg) {
  PairResult res;
  const auto t0 = std::chrono::steady_clock::now();

  res.view_a = detail::preprocess_view(img_a, cfg);
  res.view_b = detail::preprocess_view(img_b, cfg);
  try {
    res.cloud_a = backproject(img_a, cfg.intrinsics, cfg.z_min, cfg.z_max);
    res.cloud_b = backproject(img_b, cfg.intrinsics, cfg.z_min, cfg.z_max);
  } catch (const std::exception& e) {
    throw StageError("rangeio", e.what());
  }
  const auto t1 = std::chrono::steady_clock::now();

  try {
    res.assoc = associate(res.view_a, res.view_b, cfg.association_params());
  } catch (const std::exception& e) {
    throw StageError("assoc", e.what());
  }
  const auto t2 = std::chrono::steady_clock::now();

  res.ransac = estimate_transform_ransac(res.assoc, res.view_a.dec, res.view_b.dec, cfg.ransac);
  const auto t3 = std::chrono::steady_clock::now();

  res.has_truth = cfg.has_truth || cfg.mode == "synthetic";
  if (res.has_truth)
    res.truth = cfg.has_truth ? cfg.truth : relative_transform(cfg.pose_a, cfg.pose_b);

  res.eval.failure = res.ransac.failure;
  res.eval.association_count = static_cast<int>(res.assoc.pairs.size());
  res.eval.association_precision =
      association_precision(res.assoc, res.view_a.dec, res.view_b.dec);
  if (res.has_truth && !res.ransac.failure) {
    const PairEval err = evaluate(res.ransac.transform, res.truth);
    res.eval.translation_error = err.translation_error;
    res.eval.rotation_error = err.rotation_error;
  }

  json& rep = res.report;
  rep["config"] = config_to_json(cfg);
  rep["views"] = {{"a", {{"patches", res.view_a.dec.size()}, {"k_s", res.view_a.k_s}}},
                  {"b", {{"patches", res.view_b.dec.size()}, {"k_s", res.view_b.k_s}}}};
  rep["associations"] = {{"count", res.eval.association_count},
                         {"d_hat_median", detail::median_d_hat(res.assoc.pairs)},
                         {"d_hat_histogram", detail::histogram_json(res.assoc.pairs)},
                         {"precision_vs_surface_ids", res.eval.association_precision}};
  rep["transform"] = {{"failure", res.ransac.failure},
                      {"matrix_4x4_row_major", detail::transform_json(res.ransac.transform)},
                      {"inliers", static_cast<int>(res.ransac.inliers.size())}};
  if (res.has_truth) {
    rep["truth"] = {{"matrix_4x4_row_major", detail::transform_json(res.truth)}};
    if (!res.ransac.failure) {
      rep["truth"]["rotation_error_deg"] = res.eval.rotation_error;
      rep["truth"]["translation_error_m"] = res.eval.translation_error;
    }
  }
  auto ms = [](auto a, auto b) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(b - a).count();
  };
  rep["timings_ms"] = {{"preprocess", ms(t0, t1)}, {"associate", ms(t1, t2)},
                       {"estimate", ms(t2, t3)}};
  return res;
}

/// Full pair run with file artifacts: report.json, assoc.txt, viewA.ply,
/// viewB.ply, merged.ply, traj.txt under cfg.out_dir. Partial artifacts are
/// removed on failure.
inline PairResult run_pair(const RunConfig& cfg) {
  RangeImage img_a, img_b;
  if (cfg.mode == "synthetic") {
    try {
      NoiseModel na = cfg.noise, nb = cfg.noise;
      na.seed = cfg.seed;
      nb.seed = cfg.seed + 1;
      img_a = render_depth(cfg.scene, cfg.intrinsics, cfg.pose_a, na, cfg.threads);
      img_b = render_depth(cfg.scene, cfg.intrinsics, cfg.pose_b, nb, cfg.threads);
    } catch (const std::exception& e) {
      throw StageError("synth", e.what());
    }
  } else {
    try {
      const RangeFormat fmt = detail::parse_format(cfg.format);
      img_a = load_range_image(cfg.depth_a, fmt, cfg.intrinsics.depth_scale);
      img_b = load_range_image(cfg.depth_b, fmt, cfg.intrinsics.depth_scale);
    } catch (const std::exception& e) {
      throw StageError("rangeio", e.what());
    }
  }

  PairResult res = compute_pair(img_a, img_b, cfg);

  namespace fs = std::filesystem;
  std::vector<fs::path> written;
  try {
    fs::create_directories(cfg.out_dir);
    auto out_path = [&](const char* name) {
      fs::path p = fs::path(cfg.out_dir) / name;
      written.push_back(p);
      return p.string();
    };
    {
      std::ofstream rep(out_path("report.json"));
      rep << res.report.dump(2) << '\n';
    }
    {
      std::ofstream assoc_out(out_path("assoc.txt"));
      for (const auto& a : res.assoc.pairs)
        assoc_out << a.mu << ' ' << a.mu_prime << ' ' << a.d_rdl << ' ' << a.d_hat << '\n';
    }
    std::unordered_set<int> assoc_a, assoc_b;
    for (const auto& a : res.assoc.pairs) {
      assoc_a.insert(a.mu);
      assoc_b.insert(a.mu_prime);
    }
    write_decomposition_ply(out_path("viewA.ply"), res.cloud_a, res.view_a.dec, &assoc_a);
    write_decomposition_ply(out_path("viewB.ply"), res.cloud_b, res.view_b.dec, &assoc_b);
    write_merged_ply(out_path("merged.ply"), res.cloud_a, res.view_a.dec,
                     res.ransac.failure ? RigidTransform::identity() : res.ransac.transform,
                     res.cloud_b, res.view_b.dec);
    {
      std::ofstream traj(out_path("traj.txt"));
      traj << detail::trajectory_line(0.0, RigidTransform::identity()) << '\n';
      traj << detail::trajectory_line(1.0, res.ransac.transform) << '\n';
    }
  } catch (const std::exception& e) {
    for (const auto& p : written) {
      std::error_code ec;
      fs::remove(p, ec);
    }
    throw StageError("output", e.what());
  }
  return res;
}

struct BenchmarkReport {
  double translation_rmse = 0.0;
  double rotation_rmse = 0.0;
  double fail_rate = 0.0;
  int pairs = 0;
  int failures = 0;
  bool has_truth = false;
  json report;
};

namespace detail {

struct TrajectoryEntry {
  double timestamp;
  Pose pose;
};

inline std::vector<TrajectoryEntry> load_trajectory(const std::string& path) {
  std::ifstream in(path);
  std::vector<TrajectoryEntry> out;
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    double ts, tx, ty, tz, qx, qy, qz, qw;
    if (std::sscanf(line.c_str(), "%lf %lf %lf %lf %lf %lf %lf %lf", &ts, &tx, &ty, &tz, &qx,
                    &qy, &qz, &qw) != 8)
      continue;
    out.push_back({ts, Pose::from_quaternion(Quat(qw, qx, qy, qz), Vec3(tx, ty, tz))});
  }
  return out;
}

inline std::optional<Pose> pose_at(const std::vector<TrajectoryEntry>& traj, double t,
                                   double max_gap = 0.02) {
  const TrajectoryEntry* best = nullptr;
  double best_gap = max_gap;
  for (const auto& e : traj) {
    const double gap = std::abs(e.timestamp - t);
    if (gap <= best_gap) {
      best_gap = gap;
      best = &e;
    }
  }
  if (!best) return std::nullopt;
  return best->pose;
}

}  // namespace detail

/// Benchmark over a sequence directory containing depth.txt
/// ("timestamp filename" lines) and optionally groundtruth.txt in the
/// timestamped trajectory format. Pairs are (i, i+skip) with i stepping by
/// skip; skip < 1 is treated as 1.
inline BenchmarkReport run_benchmark(RunConfig cfg, const std::string& sequence_dir, int skip) {
  namespace fs = std::filesystem;
  const int step = std::max(1, skip);

  std::vector<std::pair<double, std::string>> frames;
  {
    std::ifstream in(sequence_dir + "/depth.txt");
    if (!in) throw StageError("benchmark", "missing depth.txt in " + sequence_dir);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      char name[512];
      double ts;
      if (std::sscanf(line.c_str(), "%lf %511s", &ts, name) == 2)
        frames.emplace_back(ts, (fs::path(sequence_dir) / name).string());
    }
  }
  if (frames.size() < 2) throw StageError("benchmark", "fewer than two depth frames");

  const auto traj = detail::load_trajectory(sequence_dir + "/groundtruth.txt");

  BenchmarkReport bench;
  bench.has_truth = !traj.empty();
  double trans_sq = 0.0, rot_sq = 0.0;
  int evaluated = 0;
  json pair_reports = json::array();

  for (size_t i = 0; i + step < frames.size(); i += step) {
    const auto& [ts_a, path_a] = frames[i];
    const auto& [ts_b, path_b] = frames[i + step];
    RunConfig pair_cfg = cfg;
    pair_cfg.mode = "dataset";
    pair_cfg.depth_a = path_a;
    pair_cfg.depth_b = path_b;
    pair_cfg.has_truth = false;
    if (bench.has_truth) {
      const auto pa = detail::pose_at(traj, ts_a);
      const auto pb = detail::pose_at(traj, ts_b);
      if (pa && pb) {
        pair_cfg.has_truth = true;
        pair_cfg.truth = relative_transform(*pa, *pb);
      }
    }
    const RangeFormat fmt = detail::parse_format(cfg.format);
    const RangeImage img_a = load_range_image(path_a, fmt, cfg.intrinsics.depth_scale);
    const RangeImage img_b = load_range_image(path_b, fmt, cfg.intrinsics.depth_scale);
    PairResult res = compute_pair(img_a, img_b, pair_cfg);

    bench.pairs += 1;
    json entry = {{"frame_a", path_a}, {"frame_b", path_b},
                  {"failure", res.ransac.failure},
                  {"associations", res.eval.association_count}};
    if (res.ransac.failure) {
      bench.failures += 1;  // failed pairs are excluded from RMSE
    } else if (pair_cfg.has_truth) {
      trans_sq += res.eval.translation_error * res.eval.translation_error;
      rot_sq += res.eval.rotation_error * res.eval.rotation_error;
      evaluated += 1;
      entry["translation_error_m"] = res.eval.translation_error;
      entry["rotation_error_deg"] = res.eval.rotation_error;
    }
    pair_reports.push_back(std::move(entry));
  }

  if (evaluated > 0) {
    bench.translation_rmse = std::sqrt(trans_sq / evaluated);
    bench.rotation_rmse = std::sqrt(rot_sq / evaluated);
  }
  bench.fail_rate = bench.pairs > 0 ? static_cast<double>(bench.failures) / bench.pairs : 0.0;

  bench.report = {{"config", config_to_json(cfg)},
                  {"skip", skip},
                  {"pairs", bench.pairs},
                  {"failures", bench.failures},
                  {"fail_rate", bench.fail_rate},
                  {"has_truth", bench.has_truth},
                  {"translation_rmse_m", bench.translation_rmse},
                  {"rotation_rmse_deg", bench.rotation_rmse},
                  {"per_pair", std::move(pair_reports)}};

  fs::create_directories(cfg.out_dir);
  std::ofstream rep(fs::path(cfg.out_dir) / "report.json");
  rep << bench.report.dump(2) << '\n';
  return bench;
}

}  // namespace spa
