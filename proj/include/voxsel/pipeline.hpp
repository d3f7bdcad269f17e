#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "voxsel/classifier.hpp"
#include "voxsel/eval.hpp"
#include "voxsel/features.hpp"
#include "voxsel/graphcut.hpp"
#include "voxsel/scribbles.hpp"
#include "voxsel/synth.hpp"
#include "voxsel/volume.hpp"

namespace voxsel {

enum class Method { Ours, Graphcut3d, Graphcut2d };
const char* method_name(Method m);
Method method_from_name(const std::string& s);

struct FeatureConfig {
  bool mvs = true;
  bool ibr = true;
  bool xyz = true;
  std::uint64_t mvs_seed = 3;
};

struct AutoScribbleConfig {
  bool enabled = false;
  int fg_strokes = 2;
  int bg_strokes = 4;
  std::uint64_t seed = 5;
};

struct PipelineConfig {
  std::filesystem::path scene_dir;   // volume.pvol, cameras.txt, view_*.png, optional gt
  std::filesystem::path scene_spec;  // alternative: generate the scene from a spec file
  std::filesystem::path scribbles;   // .txt, .pgm or .png; relative to the config file
  AutoScribbleConfig auto_scribbles;
  std::filesystem::path output_dir = "out";
  std::filesystem::path cache_dir;  // empty disables the feature cache
  double gamma = kDefaultGamma;
  int brush_radius = kDefaultBrushRadius;
  TrainConfig train;
  GraphCutParams graphcut;
  Graphcut2dParams graphcut2d;
  FeatureConfig features;
  std::uint64_t seed = 7;
  bool skip_postprocess = false;
  Method method = Method::Ours;
  int workers = 1;
  std::string scene_name = "scene";

  void validate() const;
};

// Relative paths resolve against `base_dir`. Unknown keys are rejected.
PipelineConfig config_from_json(const std::string& text, const std::filesystem::path& base_dir = {});
std::string config_to_json(const PipelineConfig& cfg);
PipelineConfig load_config(const std::filesystem::path& path);

// Everything the pipeline consumes. Camera order: reference, sources, validation.
struct SceneData {
  PlaneVolume volume;
  std::vector<Camera> cameras;
  std::vector<Image> images;  // 8-bit quantized values
  std::optional<std::vector<std::uint8_t>> gt_labels;
  std::optional<Mask> gt_mask_validation;
  std::optional<Image> gt_fg_validation;
  std::optional<ScribbleSet> scribbles;

  int validation_view() const { return static_cast<int>(cameras.size()) - 1; }
  std::vector<View> input_views() const;
  std::string content_hash() const;
};

SceneData scene_data_from_synthetic(const SyntheticScene& scene);
void save_scene_dir(const SyntheticScene& scene, const std::optional<ScribbleSet>& scribbles,
                    const std::filesystem::path& dir);
SceneData load_scene_dir(const std::filesystem::path& dir);

FeatureVolume compute_features(const SceneData& scene, const FeatureConfig& cfg);
// Loads from / stores to `cache_dir` keyed by the scene hash and feature config.
FeatureVolume cached_features(const SceneData& scene, const FeatureConfig& cfg,
                              const std::filesystem::path& cache_dir);

struct SegmentParams {
  double gamma = kDefaultGamma;
  int brush_radius = kDefaultBrushRadius;
  TrainConfig train;
  GraphCutParams graphcut;
  bool skip_postprocess = false;
};

using ProgressFn = std::function<void(const std::string& stage, double fraction)>;

struct Segmentation {
  LabeledVoxels lifted;
  MlpModel model;
  TrainHistory history;
  std::vector<float> probabilities;
  std::vector<std::uint8_t> raw_labels;  // thresholded classifier output
  std::vector<std::uint8_t> labels;      // final selection
  std::optional<RefineResult> refine;
};

// Lift, train, predict and (unless skipped) post-process. `cancel` is polled
// between stages and training epochs are not interrupted.
Segmentation segment(const SceneData& scene, const FeatureVolume& fv, const ScribbleSet& scribbles,
                     const SegmentParams& params, const std::atomic<bool>* cancel = nullptr,
                     const ProgressFn& progress = {});

struct PipelineResult {
  Method method = Method::Ours;
  std::vector<std::uint8_t> labels;  // empty for the 2D baseline
  std::optional<Segmentation> segmentation;
  Mask validation_mask;
  Image validation_fg;
  std::optional<Mask> raw_validation_mask;
  std::vector<MetricRecord> metrics;
  std::map<std::string, std::string> artifact_hashes;  // file name -> sha256
  std::string feature_hash;
};

PipelineResult run_pipeline(const PipelineConfig& cfg);
// Same as run_pipeline but with the scene and scribbles already in memory.
PipelineResult run_pipeline_on(const PipelineConfig& cfg, const SceneData& scene,
                               const ScribbleSet& scribbles, const FeatureVolume* features = nullptr);

// Mask and fg render metrics of a validation-view prediction against the scene gt.
std::vector<MetricRecord> validation_metrics(const SceneData& scene, const std::string& scene_name,
                                             const std::string& prefix, const Mask& mask,
                                             const Image* fg_render);

}  // namespace voxsel
