#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "voxsel/common.hpp"
#include "voxsel/geometry.hpp"
#include "voxsel/volume.hpp"

namespace voxsel {

using Stroke = std::vector<Pixel>;  // polyline vertices in reference-view pixels

struct ScribbleSet {
  std::vector<Stroke> fg_strokes;
  std::vector<Stroke> bg_strokes;
  int reference_view = 0;
};

inline constexpr int kDefaultBrushRadius = 2;
inline constexpr double kDefaultGamma = 0.01;

struct ScribblePixels {
  std::vector<Pixel> fg;  // sorted, unique
  std::vector<Pixel> bg;
};

// Bresenham polylines dilated by a discrete disk (dx^2 + dy^2 <= r^2) and clipped
// to the image. Throws ErrorCode::Overlap (listing pixels) if a pixel lands in
// both classes, ErrorCode::OutOfImage for vertices outside the image.
ScribblePixels rasterize_scribbles(const ScribbleSet& s, int width, int height,
                                   int brush_radius = kDefaultBrushRadius);

// Bresenham line including both endpoints.
std::vector<Pixel> bresenham_line(Pixel a, Pixel b);

struct LabeledVoxel {
  std::size_t voxel = 0;
  std::uint8_t label = 0;  // 1 = foreground
  Pixel source;
};

struct LabeledVoxels {
  std::vector<LabeledVoxel> entries;  // sorted by voxel index, unique
  std::size_t dropped_no_surface = 0;
  std::size_t dropped_conflict = 0;

  std::vector<std::size_t> voxels_with_label(std::uint8_t label) const;
  std::size_t count(std::uint8_t label) const;
};

// Lifts each scribble pixel to the first voxel on its reference ray whose
// accumulated transmittance drops below gamma.
LabeledVoxels lift_pixels(const PlaneVolume& vol, const ScribblePixels& pixels,
                          double gamma = kDefaultGamma);
LabeledVoxels lift_scribbles(const PlaneVolume& vol, const ScribbleSet& s,
                             double gamma = kDefaultGamma, int brush_radius = kDefaultBrushRadius);

// Projects lifted voxels into another view (no occlusion test). Pixels are the
// rounded projections inside the frame; sorted and unique per class.
ScribblePixels project_labeled_voxels(const LabeledVoxels& lv, const PlaneVolume& vol,
                                      const Camera& target);

// World-space diagonal of the bounding box of all voxel centers.
double scene_diagonal(const PlaneVolume& vol);

// Minimum world distance from each query voxel to the set, divided by scene_diagonal.
std::vector<double> distance_field(const PlaneVolume& vol, std::span<const std::size_t> set,
                                   std::span<const std::size_t> queries);
std::vector<double> distance_field(const PlaneVolume& vol, std::span<const std::size_t> set);

// Minimum Euclidean distance from each query point to the point set, divided by `scale`.
std::vector<double> distance_to_points(std::span<const Eigen::Vector3d> set,
                                       std::span<const Eigen::Vector3d> queries, double scale);

}  // namespace voxsel
