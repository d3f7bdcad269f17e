#pragma once

#include <filesystem>
#include <string>

#include "voxsel/geometry.hpp"
#include "voxsel/volume.hpp"

namespace voxsel::test {

inline Camera make_camera(int w, int h, double focal, const Eigen::Vector3d& center = Eigen::Vector3d::Zero(),
                          const Eigen::Matrix3d& R = Eigen::Matrix3d::Identity()) {
  Camera c;
  c.K << focal, 0, w / 2.0, 0, focal, h / 2.0, 0, 0, 1;
  c.R = R;
  c.t = center;
  c.width = w;
  c.height = h;
  return c;
}

inline Eigen::Matrix3d rotation(double rx, double ry, double rz) {
  return (Eigen::AngleAxisd(rz, Eigen::Vector3d::UnitZ()) * Eigen::AngleAxisd(ry, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(rx, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

// Constant-basis volume with every voxel set to (xi, rgb).
inline PlaneVolume uniform_volume(int w, int h, int d, float xi, Eigen::Vector3f rgb = {0.5f, 0.5f, 0.5f},
                                  PlaneSpacing spacing = PlaneSpacing::Linear, double z0 = 1.0,
                                  double z1 = 4.0, double focal = 0.0) {
  PlaneVolume vol(make_camera(w, h, focal > 0 ? focal : w), DepthPlaneSet::make(z0, z1, d, spacing),
                  BasisKind::Constant);
  for (std::size_t i = 0; i < vol.voxel_count(); ++i) {
    auto v = vol.voxel(i);
    v[0] = xi;
    v[1] = rgb.x();
    v[2] = rgb.y();
    v[3] = rgb.z();
  }
  return vol;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::path(VOXSEL_TEST_TMP) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace voxsel::test
