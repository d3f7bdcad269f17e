#include <csignal>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "voxsel/io.hpp"
#include "voxsel/pipeline.hpp"
#include "voxsel/service.hpp"

using namespace voxsel;

namespace {

void print_summary(const PipelineResult& r, const std::filesystem::path& out) {
  std::cout << format_table(r.metrics);
  std::cout << "artifacts: " << out.string() << "\n";
}

PipelineConfig config_with_overrides(const std::string& path, const std::string& output, int workers,
                                     bool skip_post) {
  PipelineConfig cfg;
  try {
    cfg = load_config(path);
  } catch (const Error& e) {
    throw Error(e.code(), std::string("[config] ") + e.what());
  }
  if (!output.empty()) cfg.output_dir = output;
  if (workers > 0) cfg.workers = workers;
  if (skip_post) cfg.skip_postprocess = true;
  return cfg;
}

SceneData scene_from(const std::string& scene_dir, const std::string& spec_path) {
  if (!scene_dir.empty()) return load_scene_dir(scene_dir);
  const auto bytes = read_file(spec_path);
  return scene_data_from_synthetic(make_scene(scene_spec_from_json(std::string(bytes.begin(), bytes.end()))));
}

int cmd_synth(std::uint64_t seed, const std::string& spec_path, const std::string& out, int fg, int bg,
              std::uint64_t scribble_seed, int brush) {
  const SceneSpec spec = spec_path.empty() ? default_scene_spec(seed) : [&] {
    const auto bytes = read_file(spec_path);
    return scene_spec_from_json(std::string(bytes.begin(), bytes.end()));
  }();
  const SyntheticScene scene = make_scene(spec);
  std::optional<ScribbleSet> scribbles;
  if (fg > 0 && bg > 0) scribbles = auto_scribbles(scene, fg, bg, scribble_seed, brush);
  save_scene_dir(scene, scribbles, out);
  std::cout << "scene written to " << out << " (" << scene.cameras.size() << " views, "
            << spec.width << "x" << spec.height << "x" << spec.planes << ")\n";
  return 0;
}

int cmd_render(const std::string& scene_dir, const std::string& spec_path, const std::string& labels_path,
               const std::vector<std::string>& poses, int frames, const std::string& out) {
  const SceneData scene = scene_from(scene_dir, spec_path);
  std::vector<std::uint8_t> labels;
  if (!labels_path.empty()) {
    labels = load_labels(labels_path, scene.volume.width(), scene.volume.height(), scene.volume.depth());
  }
  std::vector<Camera> cams;
  for (const auto& p : poses) cams.push_back(parse_pose(p, scene.cameras));
  if (cams.empty()) {
    const int n = static_cast<int>(scene.cameras.size()) - 1;
    for (int f = 0; f < frames; ++f) {
      const double s = frames == 1 ? 0.0 : static_cast<double>(f) / (frames - 1) * (n);
      const int a = std::min(static_cast<int>(s), n - 1);
      cams.push_back(interpolate_cameras(scene.cameras[a], scene.cameras[a + 1], s - a));
    }
  }
  std::filesystem::create_directories(out);
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const RenderedView rv = labels.empty() ? render_view(scene.volume, cams[i])
                                           : render_view(scene.volume, cams[i], labels);
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%03zu.png", i);
    write_png(std::filesystem::path(out) / name, rv.rgb);
  }
  std::cout << cams.size() << " frames written to " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& run_dir, const std::string& scene_dir, const std::string& spec_path,
             bool check) {
  const std::filesystem::path run(run_dir);
  const auto manifest_bytes = read_file(run / "manifest.json");
  const auto manifest = nlohmann::json::parse(std::string(manifest_bytes.begin(), manifest_bytes.end()));
  const std::string name = manifest.value("scene", "scene");
  const SceneData scene = scene_from(scene_dir, spec_path);
  if (!scene.gt_mask_validation) fail(ErrorCode::NotFound, "[eval] scene has no ground truth");
  const Mask mask = gray_to_mask(read_png_u8(run / "val_mask.png"));
  const Image fg = read_png(run / "val_fg.png");
  auto records = validation_metrics(scene, name, "", mask, &fg);
  if (std::filesystem::exists(run / "raw_val_mask.png")) {
    const Mask raw = gray_to_mask(read_png_u8(run / "raw_val_mask.png"));
    for (auto& r : validation_metrics(scene, name, "raw_", raw, nullptr)) records.push_back(r);
  }
  const std::string text = format_records(records);
  std::cout << text;
  if (check) {
    const auto stored = read_file(run / "metrics.tsv");
    if (std::string(stored.begin(), stored.end()) != text) {
      std::cerr << "[eval] recomputed metrics differ from " << (run / "metrics.tsv").string() << "\n";
      return 1;
    }
    std::cerr << "metrics match " << (run / "metrics.tsv").string() << "\n";
  }
  return 0;
}

Service* g_service = nullptr;

extern "C" void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Voxel selection in plane-sampled radiance volumes from 2D scribbles"};
  app.require_subcommand(1);

  std::uint64_t seed = 1, scribble_seed = 5;
  std::string spec_path, out = "scene", scene_dir, labels_path, run_dir, config, output, method;
  std::string host = "127.0.0.1", static_dir, cache_dir;
  int fg_strokes = 2, bg_strokes = 4, brush = kDefaultBrushRadius, frames = 8, workers = 0, port = 8080;
  bool skip_post = false, check = false;
  std::vector<std::string> poses;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene directory");
  synth->add_option("--seed", seed, "Scene seed")->capture_default_str();
  synth->add_option("--spec", spec_path, "Scene spec JSON (overrides --seed)")->check(CLI::ExistingFile);
  synth->add_option("--out", out, "Output scene directory")->capture_default_str();
  synth->add_option("--fg-strokes", fg_strokes, "Automatic fg strokes (0 disables scribbles)")->capture_default_str();
  synth->add_option("--bg-strokes", bg_strokes, "Automatic bg strokes (0 disables scribbles)")->capture_default_str();
  synth->add_option("--scribble-seed", scribble_seed, "Seed for automatic strokes")->capture_default_str();
  synth->add_option("--brush", brush, "Brush radius in pixels")->capture_default_str();

  auto* seg = app.add_subcommand("segment", "Run the full pipeline from a config file");
  seg->add_option("--config,-c", config, "Pipeline config JSON")->required()->check(CLI::ExistingFile);
  seg->add_option("--output,-o", output, "Override output_dir");
  seg->add_option("--workers,-j", workers, "Override worker thread count");
  seg->add_flag("--skip-postprocess", skip_post, "Report the thresholded classifier output only");

  auto* base = app.add_subcommand("baseline", "Run a baseline from a config file");
  base->add_option("--config,-c", config, "Pipeline config JSON")->required()->check(CLI::ExistingFile);
  base->add_option("--method,-m", method, "graphcut3d | graphcut2d")
      ->required()
      ->check(CLI::IsMember({"graphcut3d", "graphcut2d"}));
  base->add_option("--output,-o", output, "Override output_dir");
  base->add_option("--workers,-j", workers, "Override worker thread count");

  auto* render = app.add_subcommand("render", "Render novel views of a scene or a selection");
  auto* r_scene = render->add_option("--scene", scene_dir, "Scene directory")->check(CLI::ExistingDirectory);
  auto* r_spec = render->add_option("--spec", spec_path, "Scene spec JSON")->check(CLI::ExistingFile);
  r_scene->excludes(r_spec);
  render->add_option("--labels", labels_path, "Selection (.plbl); omit to render the whole volume")
      ->check(CLI::ExistingFile);
  render->add_option("--pose", poses, "view:K, interp:A,B,S or 12 numbers (repeatable)");
  render->add_option("--frames", frames, "Frames along the rig path when no --pose is given")
      ->capture_default_str()
      ->check(CLI::Range(1, 1000));
  render->add_option("--out", out, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Recompute metrics from the artifacts of a run");
  eval->add_option("--run", run_dir, "Output directory of segment/baseline")->required()->check(CLI::ExistingDirectory);
  auto* e_scene = eval->add_option("--scene", scene_dir, "Scene directory with ground truth")->check(CLI::ExistingDirectory);
  auto* e_spec = eval->add_option("--spec", spec_path, "Scene spec JSON")->check(CLI::ExistingFile);
  e_scene->excludes(e_spec);
  eval->add_flag("--check", check, "Fail unless the result equals the run's metrics.tsv byte for byte");

  auto* serve = app.add_subcommand("serve", "Start the HTTP service (no authentication)");
  serve->add_option("--host", host, "Bind address")->capture_default_str();
  serve->add_option("--port", port, "Port (0 picks a free one)")->capture_default_str();
  serve->add_option("--static", static_dir, "Directory served at /")->check(CLI::ExistingDirectory);
  serve->add_option("--cache-dir", cache_dir, "Feature cache directory");
  serve->add_option("--workers,-j", workers, "Worker thread count");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth(seed, spec_path, out, fg_strokes, bg_strokes, scribble_seed, brush);
    if (*seg) {
      const PipelineConfig cfg = config_with_overrides(config, output, workers, skip_post);
      print_summary(run_pipeline(cfg), cfg.output_dir);
      return 0;
    }
    if (*base) {
      PipelineConfig cfg = config_with_overrides(config, output, workers, false);
      cfg.method = method_from_name(method);
      print_summary(run_pipeline(cfg), cfg.output_dir);
      return 0;
    }
    if (*render) {
      if (scene_dir.empty() && spec_path.empty()) fail(ErrorCode::InvalidArgument, "render needs --scene or --spec");
      return cmd_render(scene_dir, spec_path, labels_path, poses, frames, out);
    }
    if (*eval) {
      if (scene_dir.empty() && spec_path.empty()) fail(ErrorCode::InvalidArgument, "eval needs --scene or --spec");
      return cmd_eval(run_dir, scene_dir, spec_path, check);
    }
    if (*serve) {
      ServiceOptions opts;
      opts.static_dir = static_dir;
      opts.cache_dir = cache_dir;
      opts.workers = workers > 0 ? workers : 1;
      Service service(opts);
      const int bound = service.bind(host, port);
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "listening on http://" << host << ":" << bound << "\n" << std::flush;
      service.listen();
      g_service = nullptr;
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
