#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "voxsel/features.hpp"
#include "voxsel/geometry.hpp"
#include "voxsel/scribbles.hpp"
#include "voxsel/volume.hpp"

namespace voxsel {

enum class ShapeKind { Ellipsoid, Box };

// Smooth color field: base + amplitude * sin(freq . x + phase) per channel,
// plus optional stripes along `stripe_axis` with period `stripe_period`.
struct Texture {
  Eigen::Vector3d base{0.5, 0.5, 0.5};
  Eigen::Vector3d amplitude{0.1, 0.1, 0.1};
  Eigen::Vector3d frequency{2.0, 3.0, 1.0};
  Eigen::Vector3d phase{0.0, 1.0, 2.0};
  double stripe_amplitude = 0.0;
  double stripe_period = 0.25;
  int stripe_axis = 0;

  Eigen::Vector3d color(const Eigen::Vector3d& x) const;
};

struct SceneObject {
  std::string name;
  ShapeKind shape = ShapeKind::Ellipsoid;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d half_extent{0.5, 0.5, 0.5};  // radii or box half sizes (world axes)
  double opacity = 0.9;                        // xi inside the object
  bool foreground = false;
  Texture texture;

  bool contains(const Eigen::Vector3d& x) const;
};

struct RigSpec {
  double focal = 120.0;
  Eigen::Vector3d target{0.0, 0.0, 5.0};
  // Camera centers; index 0 is the reference, then the source views, the
  // validation view last. The reference center must be the origin looking down +z.
  std::vector<Eigen::Vector3d> centers;
};

struct SceneSpec {
  int width = 128;
  int height = 96;
  int planes = 32;
  double z_near = 2.0;
  double z_far = 10.0;
  PlaneSpacing spacing = PlaneSpacing::InverseDepth;
  BasisKind basis = BasisKind::Constant;
  RigSpec rig;
  std::vector<SceneObject> objects;  // earlier objects win where they overlap
  std::uint64_t seed = 1;

  int source_view_count() const { return static_cast<int>(rig.centers.size()) - 2; }
  void validate() const;
};

// Desk-scale scene: textured foreground ellipsoid, background wall, clutter
// boxes at other depths (one colored like the foreground). Layout jitter and
// colors depend on `seed`.
SceneSpec default_scene_spec(std::uint64_t seed);

struct SyntheticScene {
  SceneSpec spec;
  PlaneVolume volume;
  std::vector<std::uint8_t> gt_labels;  // per voxel, 1 = foreground
  std::vector<Camera> cameras;          // ref, sources..., validation
  std::vector<Image> images;            // rendered RGB per camera
  Mask gt_mask_validation;
  Image gt_fg_validation;  // render of the gt selection in the validation view

  int validation_view() const { return static_cast<int>(cameras.size()) - 1; }
  std::vector<View> input_views() const;  // reference + sources
};

SyntheticScene make_scene(const SceneSpec& spec);

// Pixels whose surface voxel (transmittance < gamma) carries the given gt label.
Mask visible_label_mask(const PlaneVolume& vol, const std::vector<std::uint8_t>& gt_labels,
                        std::uint8_t label, double gamma = kDefaultGamma);

Mask erode(const Mask& m, int radius);

// Random polylines inside the visible fg / bg regions of the reference view,
// eroded by 3 px plus the brush radius.
ScribbleSet auto_scribbles(const SyntheticScene& scene, int n_fg_strokes, int n_bg_strokes,
                           std::uint64_t seed, int brush_radius = kDefaultBrushRadius);

// Render the selection in `cam` and threshold alpha at 0.5.
Mask selection_mask(const PlaneVolume& vol, const Camera& cam,
                    const std::vector<std::uint8_t>& selection);

std::string scene_spec_to_json(const SceneSpec& spec);
SceneSpec scene_spec_from_json(const std::string& text);

}  // namespace voxsel
