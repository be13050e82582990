// Command-line front end: pair association, sequence benchmarks, synthetic
// scene rendering, and built-in self tests.

#include "spa/spa.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitEstimationFailure = 2;

spa::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  return spa::json::parse(in);
}

// Every config key is mirrored by a flag of the same name; flag values
// override file values.
void add_override_flags(CLI::App& app, spa::json& overrides) {
  static const std::vector<std::string> string_keys = {"mode", "depth_a", "depth_b", "format",
                                                        "out_dir"};
  static const std::vector<std::string> double_keys = {
      "z_min", "z_max", "normal_max_depth_gap", "angle_thresh_deg", "depth_gap",
      "curvature_thresh", "target_area", "e_r", "e_theta_deg", "cost_insert", "cost_delete",
      "cost_replace", "cost_transpose", "r_dev", "theta_dev_deg", "lambda", "downsample_voxel",
      "ransac_inlier_thresh"};
  static const std::vector<std::string> int_keys = {"median_radius_px", "normal_radius_px",
                                                    "min_points",
                                                    "query_count", "k_s", "ransac_iterations",
                                                    "threads"};
  static const std::vector<std::string> bool_keys = {"legacy_noise_layout", "mutual_filter"};
  for (const auto& key : string_keys)
    app.add_option_function<std::string>(
        "--" + key, [&overrides, key](const std::string& v) { overrides[key] = v; });
  for (const auto& key : double_keys)
    app.add_option_function<double>("--" + key,
                                    [&overrides, key](double v) { overrides[key] = v; });
  for (const auto& key : int_keys)
    app.add_option_function<int>("--" + key, [&overrides, key](int v) { overrides[key] = v; });
  for (const auto& key : bool_keys)
    app.add_flag_function("--" + key,
                          [&overrides, key](int64_t) { overrides[key] = true; });
  app.add_option_function<uint64_t>("--seed",
                                    [&overrides](uint64_t v) { overrides["seed"] = v; });
}

spa::RunConfig make_config(const std::string& config_path, const spa::json& overrides) {
  spa::json merged = config_path.empty() ? spa::json::object() : load_json_file(config_path);
  merged.update(overrides);
  return spa::config_from_json(merged);
}

int run_associate(const std::string& config_path, const spa::json& overrides) {
  const spa::RunConfig cfg = make_config(config_path, overrides);
  const spa::PairResult res = spa::run_pair(cfg);
  std::cout << "patches: " << res.view_a.dec.size() << " / " << res.view_b.dec.size()
            << "\nassociations: " << res.assoc.pairs.size();
  if (res.ransac.failure) {
    std::cout << "\ntransform: FAILED (insufficient consensus)\n";
    return kExitEstimationFailure;
  }
  std::cout << "\ninliers: " << res.ransac.inliers.size();
  if (res.has_truth)
    std::cout << "\nrotation error: " << res.eval.rotation_error
              << " deg\ntranslation error: " << res.eval.translation_error << " m";
  std::cout << "\nartifacts: " << cfg.out_dir << "/\n";
  return kExitOk;
}

int run_benchmark_cmd(const std::string& config_path, const spa::json& overrides,
                      const std::string& sequence_dir, int skip) {
  spa::RunConfig cfg = make_config(config_path, overrides);
  const spa::BenchmarkReport rep = spa::run_benchmark(cfg, sequence_dir, skip);
  std::printf("pairs: %d  failures: %d  fail rate: %.3f\n", rep.pairs, rep.failures,
              rep.fail_rate);
  if (rep.has_truth)
    std::printf("trans RMSE: %.4f m  rot RMSE: %.3f deg\n", rep.translation_rmse,
                rep.rotation_rmse);
  else
    std::printf("no ground-truth trajectory: association-only mode\n");
  std::printf("report: %s/report.json\n", cfg.out_dir.c_str());
  return kExitOk;
}

int run_synth(const std::string& config_path, const spa::json& overrides,
              const std::string& out_path) {
  spa::json merged = load_json_file(config_path);
  merged.update(overrides);
  const spa::RunConfig cfg = spa::config_from_json(merged);
  spa::NoiseModel noise = cfg.noise;
  noise.seed = cfg.seed;
  const spa::RangeImage img =
      spa::render_depth(cfg.scene, cfg.intrinsics, cfg.pose_a, noise, cfg.threads);
  spa::save_raw(out_path, img);
  std::cout << "wrote " << out_path << " (" << img.depth.width() << "x" << img.depth.height()
            << ", with surface ids)\n";
  return kExitOk;
}

int run_selftest() {
  int failures = 0;
  auto check = [&](const char* name, bool ok) {
    std::printf("%-40s %s\n", name, ok ? "ok" : "FAIL");
    if (!ok) ++failures;
  };

  // edit-distance sanity on symbol strings
  spa::EditCosts costs;
  auto seq = [](const char* s) { return std::vector<char>(s, s + std::strlen(s)); };
  check("edit distance: identical is zero",
        spa::compare_rdl_symbols(seq("abcd"), seq("abcd"), costs) == 0.0);
  check("edit distance: free adjacent swap",
        spa::compare_rdl_symbols(seq("abcd"), seq("bacd"), costs) == 0.0);
  check("edit distance: insert costs one",
        spa::compare_rdl_symbols(seq("abc"), seq("abcd"), costs) == 1.0);

  // rigid transform round trip
  const spa::RigidTransform t =
      spa::RigidTransform::from_axis_angle(spa::Vec3(0, 0, 1), spa::kPi / 3, spa::Vec3(1, 2, 3));
  const spa::Vec3 p(0.3, -0.7, 1.1);
  check("rigid transform: inverse round trip",
        (t.inverse().apply(t.apply(p)) - p).norm() < 1e-12);

  // synthetic render + segmentation smoke test
  spa::SceneSpec scene;
  scene.primitives.push_back(
      {spa::PlanePrim{3.0, 3.0},
       spa::Pose::from_quaternion(spa::Quat::Identity(), spa::Vec3(0, 0, 2.0)), 1});
  spa::CameraIntrinsics K;
  spa::NoiseModel quiet;
  const spa::RangeImage img = spa::render_depth(scene, K, spa::Pose{}, quiet, 1);
  spa::OrganizedCloud cloud = spa::backproject(img, K);
  cloud = spa::estimate_normals(cloud, 4, 0.08, 1);
  spa::SegmentParams seg;
  const spa::Decomposition dec = spa::segment_cloud(cloud, K, seg, &img.surface_id);
  check("synthetic plane: decomposes into patches", dec.size() >= 4);

  std::printf("%d failure(s)\n", failures);
  return failures == 0 ? kExitOk : kExitConfigError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"range-image patch association and rigid transform estimation"};
  app.require_subcommand(1);

  std::string config_path, sequence_dir, synth_out = "scene.raw";
  int skip = 1;
  spa::json overrides = spa::json::object();

  CLI::App* assoc_cmd = app.add_subcommand("associate", "associate a pair of views");
  assoc_cmd->add_option("-c,--config", config_path, "JSON config file");
  add_override_flags(*assoc_cmd, overrides);

  CLI::App* bench_cmd = app.add_subcommand("benchmark", "run over a depth sequence");
  bench_cmd->add_option("-c,--config", config_path, "JSON config file");
  bench_cmd->add_option("--sequence", sequence_dir, "sequence directory with depth.txt")
      ->required();
  bench_cmd->add_option("--skip", skip, "frame skip between pair members");
  add_override_flags(*bench_cmd, overrides);

  CLI::App* synth_cmd = app.add_subcommand("synth", "render a synthetic scene to a raw file");
  synth_cmd->add_option("-c,--config", config_path, "JSON config with a scene block")
      ->required();
  synth_cmd->add_option("-o,--output", synth_out, "output raw file");
  add_override_flags(*synth_cmd, overrides);

  CLI::App* selftest_cmd = app.add_subcommand("selftest", "run built-in sanity checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (assoc_cmd->parsed()) return run_associate(config_path, overrides);
    if (bench_cmd->parsed()) return run_benchmark_cmd(config_path, overrides, sequence_dir, skip);
    if (synth_cmd->parsed()) return run_synth(config_path, overrides, synth_out);
    if (selftest_cmd->parsed()) return run_selftest();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
  return kExitConfigError;
}
