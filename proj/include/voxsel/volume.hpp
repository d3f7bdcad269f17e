#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

#include "voxsel/common.hpp"
#include "voxsel/geometry.hpp"

namespace voxsel {

// Color basis used by the voxel coefficients. Constant has one RGB triple;
// ShDegree1 adds the three degree-1 real spherical harmonics.
enum class BasisKind { Constant = 0, ShDegree1 = 1 };

int basis_size(BasisKind kind);

struct VoxelIndex {
  int x = 0;
  int y = 0;
  int d = 0;
  auto operator<=>(const VoxelIndex&) const = default;
};

// Reference-camera-aligned grid of W x H x D voxels (W, H = reference image size).
// Each voxel stores its transparency xi followed by N RGB coefficient triples.
class PlaneVolume {
 public:
  PlaneVolume() = default;
  PlaneVolume(Camera ref_cam, DepthPlaneSet planes, BasisKind basis);

  const Camera& ref_cam() const { return ref_cam_; }
  const DepthPlaneSet& planes() const { return planes_; }
  BasisKind basis() const { return basis_; }
  int basis_count() const { return basis_size(basis_); }
  int stride() const { return 1 + 3 * basis_count(); }

  int width() const { return ref_cam_.width; }
  int height() const { return ref_cam_.height; }
  int depth() const { return static_cast<int>(planes_.size()); }
  std::size_t voxel_count() const {
    return static_cast<std::size_t>(width()) * height() * depth();
  }

  std::size_t index(int x, int y, int d) const {
    return (static_cast<std::size_t>(d) * height() + y) * width() + x;
  }
  std::size_t index(const VoxelIndex& v) const { return index(v.x, v.y, v.d); }
  VoxelIndex unravel(std::size_t i) const;
  bool contains(int x, int y, int d) const {
    return x >= 0 && y >= 0 && d >= 0 && x < width() && y < height() && d < depth();
  }

  std::span<float> voxel(std::size_t i) {
    return {data_.data() + i * static_cast<std::size_t>(stride()),
            static_cast<std::size_t>(stride())};
  }
  std::span<const float> voxel(std::size_t i) const {
    return {data_.data() + i * static_cast<std::size_t>(stride()),
            static_cast<std::size_t>(stride())};
  }
  float xi(std::size_t i) const { return data_[i * static_cast<std::size_t>(stride())]; }

  // World position of the voxel center: reference pixel center at plane depth.
  Eigen::Vector3d position(int x, int y, int d) const;
  Eigen::Vector3d position(const VoxelIndex& v) const { return position(v.x, v.y, v.d); }

  std::vector<float>& raw() { return data_; }
  const std::vector<float>& raw() const { return data_; }

  void validate() const;

 private:
  Camera ref_cam_;
  DepthPlaneSet planes_;
  BasisKind basis_ = BasisKind::Constant;
  std::vector<float> data_;
};

// c(d) = sum_l k^l H^l(d) without clamping; `coeffs` holds N RGB triples.
Eigen::Vector3d evaluate_basis(std::span<const float> coeffs, BasisKind kind,
                               const Eigen::Vector3d& dir);
// Clamped to [0,1]; dir must be unit length.
Eigen::Vector3d basis_color(std::span<const float> coeffs, BasisKind kind,
                            const Eigen::Vector3d& dir);

struct RenderedView {
  Image rgb;    // 3 channels
  Image alpha;  // 1 channel
};

// Front-to-back compositing of the plane stack along each pixel ray. Voxels
// outside a non-empty `selection` (one byte per voxel) are treated as empty.
RenderedView render_view(const PlaneVolume& vol, const Camera& cam,
                         std::span<const std::uint8_t> selection = {});

struct TransmittanceSample {
  VoxelIndex voxel;
  double transmittance = 1.0;  // inclusive of this voxel
};

// Near-to-far walk with nearest-voxel sampling; samples outside the grid are skipped.
std::vector<TransmittanceSample> transmittance_walk(const PlaneVolume& vol, const Ray& ray);

// First voxel whose inclusive accumulated transmittance drops below gamma.
std::optional<VoxelIndex> surface_voxel(const PlaneVolume& vol, const Ray& ray,
                                        double gamma = 0.01);

// Fine -> coarse resampling: XY block averaging by `factor`, then the kept planes
// are resampled to `coarse_d` planes by linear interpolation along the kept index.
struct PlaneResampling {
  int factor = 1;
  int fine_w = 0, fine_h = 0, fine_d = 0;
  int coarse_w = 0, coarse_h = 0, coarse_d = 0;
  std::vector<int> kept;                   // ascending fine plane indices
  std::vector<double> coarse_position;     // per coarse plane, fractional index into `kept`
  std::vector<int> fine_to_coarse_plane;   // per fine plane; -1 when not kept

  std::size_t coarse_count() const {
    return static_cast<std::size_t>(coarse_w) * coarse_h * coarse_d;
  }
  std::size_t coarse_index(int x, int y, int d) const {
    return (static_cast<std::size_t>(d) * coarse_h + y) * coarse_w + x;
  }
  // Nearest coarse cell of a fine voxel; nullopt for planes that were truncated away.
  std::optional<std::size_t> coarse_of(int x, int y, int d) const;
};

PlaneResampling make_resampling(int fine_w, int fine_h, int fine_d, int factor_xy,
                                int out_planes, std::span<const int> plane_keep);

// Resamples a per-voxel field with `channels` values per voxel (fine layout
// (d, y, x, c)) onto the coarse grid.
std::vector<float> resample_field(const PlaneResampling& map, std::span<const float> fine,
                                  int channels);

// Coarse labels back to the fine grid; truncated planes become 0.
std::vector<std::uint8_t> upsample_labels(const PlaneResampling& map,
                                          std::span<const std::uint8_t> coarse);

struct DownsampledVolume {
  PlaneVolume volume;
  PlaneResampling mapping;
};

DownsampledVolume downsample_volume(const PlaneVolume& vol, int factor_xy, int out_planes,
                                    std::span<const int> plane_keep);

}  // namespace voxsel
