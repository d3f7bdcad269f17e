#pragma once

#include <Eigen/Dense>

#include <vector>

#include "voxsel/common.hpp"

namespace voxsel {

// Pinhole camera. R maps camera axes to world axes, t is the camera center,
// and the principal axis n is R's third column. K has K(2,2) == 1, so a pixel
// unprojected with K^-1 [u, v, 1] sits at unit depth along n.
//
// Image coordinates are continuous with pixel (i, j) covering [i, i+1) x [j, j+1);
// "pixel index" coordinates shift that by -0.5 so integer values land on pixel centers.
struct Camera {
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  int width = 0;
  int height = 0;

  Eigen::Vector3d principal_axis() const { return R.col(2); }
  // Pixel index coordinates of the principal point.
  Eigen::Vector2d principal_pixel() const { return {K(0, 2) - 0.5, K(1, 2) - 0.5}; }

  void validate() const;
  // Camera for an image resampled by `scale` (0.25 for a stride-4 feature map).
  Camera scaled(double scale) const;

  static Camera look_at(const Eigen::Vector3d& center, const Eigen::Vector3d& target,
                        const Eigen::Vector3d& up, double focal, int width, int height);
};

// Interpolates center, rotation (slerp) and intrinsics; s in [0,1].
Camera interpolate_cameras(const Camera& a, const Camera& b, double s);

enum class PlaneSpacing { Linear = 0, InverseDepth = 1, Explicit = 2 };

struct DepthPlaneSet {
  std::vector<double> depths;
  PlaneSpacing spacing = PlaneSpacing::Explicit;

  static DepthPlaneSet make(double z_near, double z_far, int count, PlaneSpacing spacing);
  std::size_t size() const { return depths.size(); }
  void validate() const;
};

struct Ray {
  Eigen::Vector3d origin;
  Eigen::Vector3d direction;  // unit length
};

struct Projection {
  double u = 0;  // pixel index coordinates
  double v = 0;
  double depth = 0;  // along the principal axis
};

// Plane-induced homography between view i and the reference view r for the
// fronto-parallel reference plane at depth z. H^-1 maps reference image
// coordinates to view-i image coordinates of the same plane point, so
// homography_matrix(c, c, z) is the identity.
Eigen::Matrix3d homography_matrix(const Camera& cam_i, const Camera& cam_r, double z);

// out(u, v) = bilinear sample of `source` at H^-1 [u, v, 1] (pixel centers), zero outside.
Image warp_feature_map(const Image& source, const Eigen::Matrix3d& H, int out_width,
                       int out_height);

// Ray through the center of pixel (u, v); u, v are pixel indices (may be fractional).
Ray pixel_ray(const Camera& cam, double u, double v);

// World point at depth z (along the principal axis) seen through pixel (u, v).
Eigen::Vector3d point_at_depth(const Camera& cam, double u, double v, double z);

Projection project_point(const Camera& cam, const Eigen::Vector3d& x);

// Bilinear sample at pixel index coordinates with zero padding outside.
// Coordinates within 1e-9 of an integer snap onto it.
void sample_bilinear(const Image& source, double x, double y, float* out);

}  // namespace voxsel
