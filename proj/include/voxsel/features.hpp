#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "voxsel/common.hpp"
#include "voxsel/geometry.hpp"
#include "voxsel/volume.hpp"

namespace voxsel {

using FeatureMap2D = Image;

inline constexpr int kImageFeatureChannels = 32;
inline constexpr int kImageFeatureStride = 4;
inline constexpr int kMvsChannels = 8;
inline constexpr int kXyFrequencies = 10;  // 2 axes x 10 (sin, cos) pairs = 40
inline constexpr int kZFrequencies = 8;    // 8 (sin, cos) pairs = 16
inline constexpr int kPositionalWidth = 4 * kXyFrequencies + 2 * kZFrequencies;

// Deterministic stride-4, 32-channel image descriptor. Per 4x4 cell:
//   0-2    mean RGB
//   3-5    RGB standard deviation
//   6-13   luminance gradient magnitude in 8 orientation bins (bin k centered at k*45 deg)
//   14-16  mean RGB over the 3x3-cell neighborhood
//   17-19  mean RGB over the 5x5-cell neighborhood
//   20     mean squared luminance Laplacian
//   21-24  luminance difference to the right/down/left/up cell
//   25-28  RGB distance to the right/down/left/up cell
//   29     red-green opponent of the cell mean
//   30     yellow-blue opponent of the cell mean
//   31     cell luminance minus the 5x5-cell surround luminance
// Neighbor cells clamp at the border, so border contrasts against themselves are 0.
FeatureMap2D extract_2d_features(const Image& image);

struct View {
  Image image;
  Camera camera;
  int id = -1;
};

// Feature map paired with the camera at feature resolution.
struct FeatureView {
  FeatureMap2D features;
  Camera camera;
  int id = -1;
};

struct CostVolume {
  Camera ref_cam;  // at cost-volume resolution
  DepthPlaneSet planes;
  double scale = 1.0;  // cost-volume pixels per reference pixel
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<int> source_views;
  std::vector<float> data;  // (d, y, x, c)

  int depth() const { return static_cast<int>(planes.size()); }
  std::size_t offset(int x, int y, int d) const {
    return ((static_cast<std::size_t>(d) * height + y) * width + x) * channels;
  }
};

// Sweeps the reference planes, warps every view's features into the reference
// frame and records the per-channel population variance across views.
CostVolume build_cost_volume(const Camera& ref_cam, std::span<const View> views,
                             const DepthPlaneSet& planes);
CostVolume build_cost_volume_from_features(const Camera& ref_feature_cam,
                                           std::span<const FeatureView> views,
                                           const DepthPlaneSet& planes, double scale);

struct MvsFeatures {
  int width = 0;
  int height = 0;
  int depth = 0;
  int channels = kMvsChannels;
  std::vector<float> data;  // (d, y, x, c), on the PlaneVolume grid
};

// Seeded 8 x C projection used by refine_cost_volume.
std::vector<float> mvs_projection(int in_channels, std::uint64_t seed);

// Mean of three cascaded clamp-normalized 3D box filters (radii 1, 2, 4).
std::vector<float> box_pyramid(std::span<const float> field, int width, int height, int depth,
                               int channels);

// Projection to 8 channels, multi-scale smoothing, then resampling onto `target`'s grid.
MvsFeatures refine_cost_volume(const CostVolume& cv, const PlaneVolume& target,
                               std::uint64_t seed);

std::vector<float> ibr_feature(const PlaneVolume& vol, const VoxelIndex& p);
std::array<float, kPositionalWidth> positional_feature(const PlaneVolume& vol,
                                                       const VoxelIndex& p);

struct FeatureLayout {
  int mvs_offset = 0;
  int mvs_width = 0;
  int ibr_offset = 0;
  int ibr_width = 0;
  int xyz_offset = 0;
  int xyz_width = 0;

  int total() const { return mvs_width + ibr_width + xyz_width; }
  bool operator==(const FeatureLayout&) const = default;
};

struct FeatureVolume {
  FeatureLayout layout;
  int width = 0;
  int height = 0;
  int depth = 0;
  std::vector<float> data;  // voxel-major, layout.total() values per voxel

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(width) * height * depth;
  }
  int channels() const { return layout.total(); }
  std::span<const float> at(std::size_t voxel) const {
    const auto c = static_cast<std::size_t>(channels());
    return {data.data() + voxel * c, c};
  }
};

struct FeatureSegments {
  bool mvs = true;
  bool ibr = true;
  bool xyz = true;
};

// v_p = [mvs; ibr; xyz]; disabled segments get zero width.
FeatureVolume assemble_features(const PlaneVolume& vol, const MvsFeatures* mvs,
                                FeatureSegments segments = {});

// Appearance part ([mvs; ibr]) of every voxel, contiguous.
std::vector<float> appearance_features(const FeatureVolume& fv);

}  // namespace voxsel
