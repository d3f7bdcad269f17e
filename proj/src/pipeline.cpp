#include "voxsel/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include <json.hpp>

#include "voxsel/io.hpp"

namespace voxsel {

using nlohmann::json;

const char* method_name(Method m) {
  switch (m) {
    case Method::Ours: return "ours";
    case Method::Graphcut3d: return "graphcut3d";
    case Method::Graphcut2d: return "graphcut2d";
  }
  return "?";
}

Method method_from_name(const std::string& s) {
  if (s == "ours") return Method::Ours;
  if (s == "graphcut3d") return Method::Graphcut3d;
  if (s == "graphcut2d") return Method::Graphcut2d;
  fail(ErrorCode::InvalidArgument, "unknown method '" + s + "' (ours | graphcut3d | graphcut2d)");
}

void PipelineConfig::validate() const {
  if (scene_dir.empty() == scene_spec.empty()) {
    fail(ErrorCode::InvalidArgument, "exactly one of scene_dir or scene_spec must be set");
  }
  if (!scene_dir.empty() && !std::filesystem::is_directory(scene_dir)) {
    fail(ErrorCode::NotFound, "scene_dir does not exist: " + scene_dir.string());
  }
  if (!scene_spec.empty() && !std::filesystem::is_regular_file(scene_spec)) {
    fail(ErrorCode::NotFound, "scene_spec does not exist: " + scene_spec.string());
  }
  if (!scribbles.empty() && !std::filesystem::is_regular_file(scribbles)) {
    fail(ErrorCode::NotFound, "scribbles file does not exist: " + scribbles.string());
  }
  if (!(gamma > 0.0 && gamma < 1.0)) fail(ErrorCode::InvalidArgument, "gamma must be in (0, 1)");
  if (brush_radius < 0 || brush_radius > 64) fail(ErrorCode::InvalidArgument, "brush_radius must be in [0, 64]");
  if (workers < 1 || workers > 256) fail(ErrorCode::InvalidArgument, "workers must be in [1, 256]");
  if (output_dir.empty()) fail(ErrorCode::InvalidArgument, "output_dir must be set");
  if (!features.mvs && !features.ibr && !features.xyz) {
    fail(ErrorCode::InvalidArgument, "at least one feature segment must be enabled");
  }
  voxsel::validate(train);
  graphcut.validate();
}

namespace {

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; })) {
      fail(ErrorCode::Parse, "unknown config key '" + where + it.key() + "'");
    }
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

PipelineConfig config_from_json(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("config: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::Parse, "config must be a JSON object");
  PipelineConfig c;
  try {
    reject_unknown(j, {"scene_dir", "scene_spec", "scribbles", "auto_scribbles", "output_dir",
                       "cache_dir", "gamma", "brush_radius", "train", "graphcut", "graphcut2d",
                       "features", "seed", "skip_postprocess", "method", "workers", "scene_name"},
                   "");
    std::string s;
    if (j.contains("scene_dir")) c.scene_dir = resolve(base_dir, j["scene_dir"].get<std::string>());
    if (j.contains("scene_spec")) c.scene_spec = resolve(base_dir, j["scene_spec"].get<std::string>());
    if (j.contains("scribbles")) c.scribbles = resolve(base_dir, j["scribbles"].get<std::string>());
    if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j["output_dir"].get<std::string>());
    if (j.contains("cache_dir")) c.cache_dir = resolve(base_dir, j["cache_dir"].get<std::string>());
    take(j, "gamma", c.gamma);
    take(j, "brush_radius", c.brush_radius);
    take(j, "seed", c.seed);
    c.train.seed = c.seed;
    take(j, "skip_postprocess", c.skip_postprocess);
    take(j, "workers", c.workers);
    take(j, "scene_name", c.scene_name);
    if (j.contains("method")) c.method = method_from_name(j["method"].get<std::string>());
    if (j.contains("auto_scribbles")) {
      const json& a = j["auto_scribbles"];
      reject_unknown(a, {"enabled", "fg_strokes", "bg_strokes", "seed"}, "auto_scribbles.");
      c.auto_scribbles.enabled = true;
      take(a, "enabled", c.auto_scribbles.enabled);
      take(a, "fg_strokes", c.auto_scribbles.fg_strokes);
      take(a, "bg_strokes", c.auto_scribbles.bg_strokes);
      take(a, "seed", c.auto_scribbles.seed);
    }
    if (j.contains("train")) {
      const json& t = j["train"];
      reject_unknown(t, {"learning_rate", "beta1", "beta2", "epsilon", "max_epochs", "batch_size",
                         "validation_fraction", "patience", "min_delta", "standardize", "seed"},
                     "train.");
      take(t, "learning_rate", c.train.learning_rate);
      take(t, "beta1", c.train.beta1);
      take(t, "beta2", c.train.beta2);
      take(t, "epsilon", c.train.epsilon);
      take(t, "max_epochs", c.train.max_epochs);
      take(t, "batch_size", c.train.batch_size);
      take(t, "validation_fraction", c.train.validation_fraction);
      take(t, "patience", c.train.patience);
      take(t, "min_delta", c.train.min_delta);
      take(t, "standardize", c.train.standardize);
      take(t, "seed", c.train.seed);
    }
    if (j.contains("graphcut")) {
      const json& g = j["graphcut"];
      reject_unknown(g, {"w1", "w2", "alpha", "sigma", "downsample_xy", "max_planes", "fg_threshold"},
                     "graphcut.");
      take(g, "w1", c.graphcut.w1);
      take(g, "w2", c.graphcut.w2);
      take(g, "alpha", c.graphcut.alpha);
      take(g, "sigma", c.graphcut.sigma);
      take(g, "downsample_xy", c.graphcut.downsample_xy);
      take(g, "max_planes", c.graphcut.max_planes);
      take(g, "fg_threshold", c.graphcut.fg_threshold);
    }
    if (j.contains("graphcut2d")) {
      const json& g = j["graphcut2d"];
      reject_unknown(g, {"clusters", "restarts", "sigma", "color_scale", "seed"}, "graphcut2d.");
      take(g, "clusters", c.graphcut2d.clusters);
      take(g, "restarts", c.graphcut2d.restarts);
      take(g, "sigma", c.graphcut2d.sigma);
      take(g, "color_scale", c.graphcut2d.color_scale);
      take(g, "seed", c.graphcut2d.seed);
    }
    if (j.contains("features")) {
      const json& f = j["features"];
      reject_unknown(f, {"mvs", "ibr", "xyz", "mvs_seed"}, "features.");
      take(f, "mvs", c.features.mvs);
      take(f, "ibr", c.features.ibr);
      take(f, "xyz", c.features.xyz);
      take(f, "mvs_seed", c.features.mvs_seed);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("config: ") + e.what());
  }
  return c;
}

std::string config_to_json(const PipelineConfig& c) {
  json j;
  if (!c.scene_dir.empty()) j["scene_dir"] = c.scene_dir.string();
  if (!c.scene_spec.empty()) j["scene_spec"] = c.scene_spec.string();
  if (!c.scribbles.empty()) j["scribbles"] = c.scribbles.string();
  j["auto_scribbles"] = {{"enabled", c.auto_scribbles.enabled},
                         {"fg_strokes", c.auto_scribbles.fg_strokes},
                         {"bg_strokes", c.auto_scribbles.bg_strokes},
                         {"seed", c.auto_scribbles.seed}};
  j["output_dir"] = c.output_dir.string();
  if (!c.cache_dir.empty()) j["cache_dir"] = c.cache_dir.string();
  j["gamma"] = c.gamma;
  j["brush_radius"] = c.brush_radius;
  j["seed"] = c.seed;
  j["skip_postprocess"] = c.skip_postprocess;
  j["method"] = method_name(c.method);
  j["workers"] = c.workers;
  j["scene_name"] = c.scene_name;
  const TrainConfig& t = c.train;
  j["train"] = {{"learning_rate", t.learning_rate}, {"beta1", t.beta1},
                {"beta2", t.beta2}, {"epsilon", t.epsilon},
                {"max_epochs", t.max_epochs}, {"batch_size", t.batch_size},
                {"validation_fraction", t.validation_fraction}, {"patience", t.patience},
                {"min_delta", t.min_delta}, {"standardize", t.standardize},
                {"seed", t.seed}};
  const GraphCutParams& g = c.graphcut;
  j["graphcut"] = {{"w1", g.w1}, {"w2", g.w2}, {"alpha", g.alpha}, {"sigma", g.sigma},
                   {"downsample_xy", g.downsample_xy}, {"max_planes", g.max_planes},
                   {"fg_threshold", g.fg_threshold}};
  const Graphcut2dParams& g2 = c.graphcut2d;
  j["graphcut2d"] = {{"clusters", g2.clusters}, {"restarts", g2.restarts}, {"sigma", g2.sigma},
                     {"color_scale", g2.color_scale}, {"seed", g2.seed}};
  j["features"] = {{"mvs", c.features.mvs}, {"ibr", c.features.ibr}, {"xyz", c.features.xyz},
                   {"mvs_seed", c.features.mvs_seed}};
  return j.dump(2);
}

PipelineConfig load_config(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return config_from_json(std::string(bytes.begin(), bytes.end()), path.parent_path());
}

// ---- scene data ----

std::vector<View> SceneData::input_views() const {
  std::vector<View> views;
  for (int i = 0; i < validation_view(); ++i) views.push_back({images[i], cameras[i], i});
  return views;
}

std::string SceneData::content_hash() const {
  std::string acc = sha256_hex(std::span<const std::uint8_t>(encode_volume(volume)));
  acc += sha256_hex(format_cameras(cameras));
  for (const auto& img : images) acc += voxsel::content_hash(quantize(img).data);
  return sha256_hex(acc);
}

SceneData scene_data_from_synthetic(const SyntheticScene& scene) {
  SceneData d;
  d.volume = scene.volume;
  d.cameras = scene.cameras;
  for (const auto& img : scene.images) d.images.push_back(dequantize(quantize(img)));
  d.gt_labels = scene.gt_labels;
  d.gt_mask_validation = scene.gt_mask_validation;
  d.gt_fg_validation = dequantize(quantize(scene.gt_fg_validation));
  return d;
}

void save_scene_dir(const SyntheticScene& scene, const std::optional<ScribbleSet>& scribbles,
                    const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "scene.json", scene_spec_to_json(scene.spec));
  save_volume(scene.volume, dir / "volume.pvol");
  write_cameras(dir / "cameras.txt", scene.cameras);
  for (std::size_t i = 0; i < scene.images.size(); ++i) {
    write_png(dir / ("view_" + std::to_string(i) + ".png"), scene.images[i]);
  }
  save_labels(scene.gt_labels, scene.volume.width(), scene.volume.height(), scene.volume.depth(),
              dir / "gt_labels.plbl");
  write_png(dir / "gt_mask_val.png", mask_to_gray(scene.gt_mask_validation));
  write_png(dir / "gt_fg_val.png", scene.gt_fg_validation);
  if (scribbles) write_file(dir / "scribbles.txt", format_scribbles(*scribbles));
}

SceneData load_scene_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) fail(ErrorCode::NotFound, "scene directory not found: " + dir.string());
  SceneData d;
  d.volume = load_volume(dir / "volume.pvol");
  d.cameras = read_cameras(dir / "cameras.txt");
  if (d.cameras.size() < 3) fail(ErrorCode::Parse, "cameras.txt needs reference, sources and validation");
  const Camera& ref = d.cameras.front();
  if (!ref.K.isApprox(d.volume.ref_cam().K, 1e-12) || !ref.R.isApprox(d.volume.ref_cam().R, 1e-12) ||
      (ref.t - d.volume.ref_cam().t).norm() > 1e-12) {
    fail(ErrorCode::InvalidCamera, "first camera does not match the volume's reference camera");
  }
  for (std::size_t i = 0; i < d.cameras.size(); ++i) {
    const Image img = read_png(dir / ("view_" + std::to_string(i) + ".png"));
    if (img.width != d.cameras[i].width || img.height != d.cameras[i].height || img.channels != 3) {
      fail(ErrorCode::ShapeMismatch, "view_" + std::to_string(i) + ".png does not match its camera");
    }
    d.images.push_back(img);
  }
  if (std::filesystem::exists(dir / "gt_labels.plbl")) {
    d.gt_labels = load_labels(dir / "gt_labels.plbl", d.volume.width(), d.volume.height(), d.volume.depth());
  }
  if (std::filesystem::exists(dir / "gt_mask_val.png")) {
    d.gt_mask_validation = gray_to_mask(read_png_u8(dir / "gt_mask_val.png"));
  }
  if (std::filesystem::exists(dir / "gt_fg_val.png")) d.gt_fg_validation = read_png(dir / "gt_fg_val.png");
  if (std::filesystem::exists(dir / "scribbles.txt")) d.scribbles = read_scribbles(dir / "scribbles.txt");
  return d;
}

// ---- features ----

FeatureVolume compute_features(const SceneData& scene, const FeatureConfig& cfg) {
  const FeatureSegments seg{cfg.mvs, cfg.ibr, cfg.xyz};
  if (!cfg.mvs) return assemble_features(scene.volume, nullptr, seg);
  std::vector<View> sources;
  for (int i = 1; i < scene.validation_view(); ++i) sources.push_back({scene.images[i], scene.cameras[i], i});
  if (sources.size() < 2) fail(ErrorCode::InvalidArgument, "MVS features need at least 2 source views");
  const CostVolume cv = build_cost_volume(scene.cameras.front(), sources, scene.volume.planes());
  const MvsFeatures mvs = refine_cost_volume(cv, scene.volume, cfg.mvs_seed);
  return assemble_features(scene.volume, &mvs, seg);
}

namespace {

std::string feature_key(const SceneData& scene, const FeatureConfig& cfg) {
  std::ostringstream k;
  k << scene.content_hash() << ':' << cfg.mvs << cfg.ibr << cfg.xyz << ':' << cfg.mvs_seed;
  return sha256_hex(k.str());
}

}  // namespace

FeatureVolume cached_features(const SceneData& scene, const FeatureConfig& cfg,
                              const std::filesystem::path& cache_dir) {
  if (cache_dir.empty()) return compute_features(scene, cfg);
  const std::string key = feature_key(scene, cfg);
  const auto path = cache_dir / (key.substr(0, 16) + ".pfea");
  if (std::filesystem::exists(path)) {
    std::string stored;
    FeatureVolume fv = load_features(path, &stored);
    if (stored == key) return fv;
  }
  FeatureVolume fv = compute_features(scene, cfg);
  save_features(fv, key, path);
  return fv;
}

// ---- segmentation ----

namespace {

void check_cancel(const std::atomic<bool>* cancel, const char* stage) {
  if (cancel && cancel->load()) fail(ErrorCode::Canceled, std::string("canceled before ") + stage);
}

[[noreturn]] void rethrow_tagged(const char* stage, const Error& e) {
  const std::string what = e.what();
  if (what.rfind("[", 0) == 0) throw e;
  throw Error(e.code(), std::string("[") + stage + "] " + what);
}

template <typename F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    rethrow_tagged(name, e);
  }
}

}  // namespace

Segmentation segment(const SceneData& scene, const FeatureVolume& fv, const ScribbleSet& scribbles,
                     const SegmentParams& params, const std::atomic<bool>* cancel,
                     const ProgressFn& progress) {
  auto report = [&](const char* s, double f) {
    if (progress) progress(s, f);
  };
  if (scribbles.fg_strokes.empty() || scribbles.bg_strokes.empty()) {
    fail(ErrorCode::InvalidArgument, "[lift] scribbles need at least one fg and one bg stroke");
  }
  Segmentation seg;
  check_cancel(cancel, "lift");
  report("lift", 0.0);
  seg.lifted = stage("lift", [&] {
    return lift_scribbles(scene.volume, scribbles, params.gamma, params.brush_radius);
  });
  if (seg.lifted.count(1) == 0 || seg.lifted.count(0) == 0) {
    fail(ErrorCode::EmptyInput, "[lift] lifted scribbles lack one of the classes");
  }
  check_cancel(cancel, "train");
  report("train", 0.2);
  TrainResult tr = stage("train", [&] {
    std::vector<std::size_t> voxels;
    Eigen::VectorXd y(static_cast<Eigen::Index>(seg.lifted.entries.size()));
    for (std::size_t i = 0; i < seg.lifted.entries.size(); ++i) {
      voxels.push_back(seg.lifted.entries[i].voxel);
      y[static_cast<Eigen::Index>(i)] = seg.lifted.entries[i].label;
    }
    return train(gather_samples(fv, voxels), y, params.train);
  });
  seg.model = std::move(tr.model);
  seg.history = std::move(tr.history);
  check_cancel(cancel, "predict");
  report("predict", 0.6);
  seg.probabilities = stage("predict", [&] { return predict_volume(seg.model, fv); });
  seg.raw_labels.resize(seg.probabilities.size());
  for (std::size_t i = 0; i < seg.probabilities.size(); ++i) {
    seg.raw_labels[i] = seg.probabilities[i] > params.graphcut.fg_threshold ? 1 : 0;
  }
  if (params.skip_postprocess) {
    seg.labels = seg.raw_labels;
  } else {
    check_cancel(cancel, "postprocess");
    report("postprocess", 0.8);
    seg.refine = stage("postprocess", [&] {
      return postprocess(scene.volume, seg.probabilities, seg.lifted, fv, params.graphcut);
    });
    seg.labels = seg.refine->labels;
  }
  report("done", 1.0);
  return seg;
}

std::vector<MetricRecord> validation_metrics(const SceneData& scene, const std::string& scene_name,
                                             const std::string& prefix, const Mask& mask,
                                             const Image* fg_render) {
  std::vector<MetricRecord> out;
  if (!scene.gt_mask_validation) return out;
  const MaskMetrics mm = mask_metrics(mask, *scene.gt_mask_validation);
  out.push_back({scene_name, prefix + "acc", mm.accuracy});
  out.push_back({scene_name, prefix + "iou", mm.iou});
  if (fg_render && scene.gt_fg_validation) {
    const RenderMetrics rm = render_metrics(dequantize(quantize(*fg_render)), *scene.gt_fg_validation,
                                            *scene.gt_mask_validation);
    out.push_back({scene_name, prefix + "psnr", rm.psnr});
    out.push_back({scene_name, prefix + "ssim", rm.ssim});
  }
  return out;
}

namespace {

void write_artifact(PipelineResult& res, const std::filesystem::path& dir, const std::string& name,
                    std::span<const std::uint8_t> bytes) {
  write_file(dir / name, bytes);
  res.artifact_hashes[name] = sha256_hex(bytes);
}

void write_artifact(PipelineResult& res, const std::filesystem::path& dir, const std::string& name,
                    std::string_view text) {
  write_artifact(res, dir, name,
                 std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string lifted_to_text(const LabeledVoxels& lv) {
  std::ostringstream out;
  out << "# voxel label source_x source_y\n";
  for (const auto& e : lv.entries) {
    out << e.voxel << ' ' << int(e.label) << ' ' << e.source.x << ' ' << e.source.y << '\n';
  }
  out << "# dropped_no_surface " << lv.dropped_no_surface << " dropped_conflict " << lv.dropped_conflict << '\n';
  return out.str();
}

std::vector<std::uint8_t> file_bytes(const std::function<void(const std::filesystem::path&)>& writer,
                                     const std::filesystem::path& path) {
  writer(path);
  return read_file(path);
}

}  // namespace

PipelineResult run_pipeline_on(const PipelineConfig& cfg, const SceneData& scene,
                               const ScribbleSet& scribbles, const FeatureVolume* features) {
  set_worker_count(cfg.workers);
  PipelineResult res;
  res.method = cfg.method;
  const auto& dir = cfg.output_dir;
  std::filesystem::create_directories(dir);
  const int val = scene.validation_view();
  const Camera& val_cam = scene.cameras[static_cast<std::size_t>(val)];

  if (cfg.method == Method::Graphcut2d) {
    const LabeledVoxels lifted = stage("lift", [&] {
      return lift_scribbles(scene.volume, scribbles, cfg.gamma, cfg.brush_radius);
    });
    const ScribblePixels px = project_labeled_voxels(lifted, scene.volume, val_cam);
    res.validation_mask = stage("graphcut2d", [&] {
      return graphcut2d_baseline(scene.images[static_cast<std::size_t>(val)], px.fg, px.bg, cfg.graphcut2d);
    });
    res.validation_fg = Image(val_cam.width, val_cam.height, 3);
    const Image& src = scene.images[static_cast<std::size_t>(val)];
    for (std::size_t i = 0; i < res.validation_mask.data.size(); ++i) {
      if (!res.validation_mask.data[i]) continue;
      for (int c = 0; c < 3; ++c) res.validation_fg.data[i * 3 + c] = src.data[i * 3 + c];
    }
    res.metrics = validation_metrics(scene, cfg.scene_name, "", res.validation_mask, &res.validation_fg);
  } else {
    FeatureVolume computed;
    if (!features) {
      computed = stage("features", [&] { return cached_features(scene, cfg.features, cfg.cache_dir); });
      features = &computed;
    }
    res.feature_hash = content_hash(features->data);
    SegmentParams sp;
    sp.gamma = cfg.gamma;
    sp.brush_radius = cfg.brush_radius;
    sp.train = cfg.train;
    sp.graphcut = cfg.graphcut;
    sp.skip_postprocess = cfg.skip_postprocess;
    if (cfg.method == Method::Ours) {
      res.segmentation = segment(scene, *features, scribbles, sp);
      res.labels = res.segmentation->labels;
    } else {
      const LabeledVoxels lifted = stage("lift", [&] {
        return lift_scribbles(scene.volume, scribbles, cfg.gamma, cfg.brush_radius);
      });
      const RefineResult r = stage("graphcut3d", [&] {
        return graphcut3d_baseline(scene.volume, *features, lifted, cfg.graphcut);
      });
      res.labels = r.labels;
      write_artifact(res, dir, "lifted.txt", lifted_to_text(lifted));
    }
    const RenderedView rv = render_view(scene.volume, val_cam, res.labels);
    res.validation_fg = rv.rgb;
    res.validation_mask = Mask(rv.alpha.width, rv.alpha.height, 1);
    for (std::size_t i = 0; i < rv.alpha.data.size(); ++i) {
      res.validation_mask.data[i] = rv.alpha.data[i] > 0.5f ? 1 : 0;
    }
    res.metrics = validation_metrics(scene, cfg.scene_name, "", res.validation_mask, &res.validation_fg);
    if (res.segmentation) {
      const Segmentation& s = *res.segmentation;
      res.raw_validation_mask = selection_mask(scene.volume, val_cam, s.raw_labels);
      for (auto& r : validation_metrics(scene, cfg.scene_name, "raw_", *res.raw_validation_mask, nullptr)) {
        res.metrics.push_back(r);
      }
      write_artifact(res, dir, "raw_val_mask.png", encode_png(mask_to_gray(*res.raw_validation_mask)));
      write_artifact(res, dir, "lifted.txt", lifted_to_text(s.lifted));
      write_artifact(res, dir, "model.pmlp",
                     file_bytes([&](const auto& p) { save_model(s.model, p); }, dir / "model.pmlp"));
      const auto* pb = reinterpret_cast<const std::uint8_t*>(s.probabilities.data());
      write_artifact(res, dir, "probabilities.f32",
                     std::span<const std::uint8_t>(pb, s.probabilities.size() * sizeof(float)));
      std::ostringstream hist;
      hist << "# epoch train_loss\n";
      for (std::size_t e = 0; e < s.history.train_loss.size(); ++e) {
        char buf[64];
        const auto r = std::to_chars(buf, buf + sizeof(buf), s.history.train_loss[e]);
        hist << e + 1 << ' ' << std::string(buf, r.ptr) << '\n';
      }
      write_artifact(res, dir, "train_history.txt", hist.str());
    }
    write_artifact(res, dir, "labels.plbl", file_bytes([&](const auto& p) {
                     save_labels(res.labels, scene.volume.width(), scene.volume.height(),
                                 scene.volume.depth(), p);
                   }, dir / "labels.plbl"));
  }
  write_artifact(res, dir, "val_mask.png", encode_png(mask_to_gray(res.validation_mask)));
  write_artifact(res, dir, "val_fg.png", encode_png(quantize(res.validation_fg)));
  write_artifact(res, dir, "metrics.tsv", format_records(res.metrics));

  json manifest;
  manifest["method"] = method_name(cfg.method);
  manifest["scene"] = cfg.scene_name;
  manifest["scene_hash"] = scene.content_hash();
  if (!res.feature_hash.empty()) manifest["feature_hash"] = res.feature_hash;
  manifest["artifacts"] = res.artifact_hashes;
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  return res;
}

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  stage("config", [&] { cfg.validate(); });
  set_worker_count(cfg.workers);
  SceneData scene;
  std::optional<ScribbleSet> auto_s;
  if (!cfg.scene_dir.empty()) {
    scene = stage("load", [&] { return load_scene_dir(cfg.scene_dir); });
  } else {
    const auto bytes = read_file(cfg.scene_spec);
    const SceneSpec spec = stage("load", [&] { return scene_spec_from_json(std::string(bytes.begin(), bytes.end())); });
    const SyntheticScene syn = stage("synth", [&] { return make_scene(spec); });
    scene = scene_data_from_synthetic(syn);
    if (cfg.auto_scribbles.enabled) {
      auto_s = auto_scribbles(syn, cfg.auto_scribbles.fg_strokes, cfg.auto_scribbles.bg_strokes,
                              cfg.auto_scribbles.seed, cfg.brush_radius);
    }
  }
  ScribbleSet scribbles;
  if (!cfg.scribbles.empty()) {
    scribbles = stage("scribbles", [&] { return read_scribbles(cfg.scribbles); });
  } else if (auto_s) {
    scribbles = *auto_s;
  } else if (scene.scribbles) {
    scribbles = *scene.scribbles;
  } else {
    scribbles = stage("scribbles", [&]() -> ScribbleSet {
      fail(ErrorCode::InvalidArgument, "no scribbles: set 'scribbles' or 'auto_scribbles'");
    });
  }
  return run_pipeline_on(cfg, scene, scribbles);
}

}  // namespace voxsel
