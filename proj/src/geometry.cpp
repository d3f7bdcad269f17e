#include "voxsel/geometry.hpp"

#include <cmath>
#include <sstream>

namespace voxsel {

void Camera::validate() const {
  if (width <= 0 || height <= 0) fail(ErrorCode::InvalidCamera, "image size must be positive");
  if (!K.allFinite() || !R.allFinite() || !t.allFinite()) {
    fail(ErrorCode::InvalidCamera, "non-finite camera parameters");
  }
  if (K(1, 0) != 0.0 || K(2, 0) != 0.0 || K(2, 1) != 0.0) {
    fail(ErrorCode::InvalidCamera, "intrinsics must be upper triangular");
  }
  if (!(K(0, 0) > 0.0) || !(K(1, 1) > 0.0)) {
    fail(ErrorCode::InvalidCamera, "focal lengths must be positive");
  }
  if (std::abs(K(2, 2) - 1.0) > 1e-12) fail(ErrorCode::InvalidCamera, "K(2,2) must be 1");
  const double ortho = (R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho >= 1e-9 || R.determinant() <= 0.0) {
    fail(ErrorCode::InvalidCamera, "rotation must be orthonormal with determinant +1");
  }
}

Camera Camera::scaled(double scale) const {
  Camera c = *this;
  c.K.row(0) *= scale;
  c.K.row(1) *= scale;
  c.width = static_cast<int>(std::ceil(width * scale - 1e-9));
  c.height = static_cast<int>(std::ceil(height * scale - 1e-9));
  return c;
}

Camera Camera::look_at(const Eigen::Vector3d& center, const Eigen::Vector3d& target,
                       const Eigen::Vector3d& up, double focal, int width, int height) {
  const Eigen::Vector3d z = (target - center).normalized();
  const Eigen::Vector3d x = (-up).cross(z).normalized();
  const Eigen::Vector3d y = z.cross(x);
  Camera c;
  c.R.col(0) = x;
  c.R.col(1) = y;
  c.R.col(2) = z;
  c.t = center;
  c.K << focal, 0, width / 2.0, 0, focal, height / 2.0, 0, 0, 1;
  c.width = width;
  c.height = height;
  return c;
}

Camera interpolate_cameras(const Camera& a, const Camera& b, double s) {
  Camera c = a;
  const Eigen::Quaterniond qa(a.R), qb(b.R);
  c.R = qa.slerp(s, qb).normalized().toRotationMatrix();
  c.t = (1.0 - s) * a.t + s * b.t;
  c.K = (1.0 - s) * a.K + s * b.K;
  c.K(1, 0) = c.K(2, 0) = c.K(2, 1) = 0.0;
  c.K(2, 2) = 1.0;
  return c;
}

DepthPlaneSet DepthPlaneSet::make(double z_near, double z_far, int count, PlaneSpacing spacing) {
  if (count < 1) fail(ErrorCode::InvalidArgument, "plane count must be positive");
  if (!(z_near > 0.0) || !(z_far > z_near || (count == 1 && z_far >= z_near))) {
    fail(ErrorCode::InvalidDepth, "need 0 < z_near < z_far");
  }
  DepthPlaneSet set;
  set.spacing = spacing;
  set.depths.resize(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double s = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    if (spacing == PlaneSpacing::InverseDepth) {
      set.depths[i] = 1.0 / ((1.0 - s) / z_near + s / z_far);
    } else {
      set.depths[i] = (1.0 - s) * z_near + s * z_far;
    }
  }
  set.depths.front() = z_near;
  if (count > 1) set.depths.back() = z_far;
  return set;
}

void DepthPlaneSet::validate() const {
  if (depths.empty()) fail(ErrorCode::EmptyInput, "no depth planes");
  for (std::size_t i = 0; i < depths.size(); ++i) {
    if (!(depths[i] > 0.0)) fail(ErrorCode::InvalidDepth, "plane depths must be positive");
    if (i > 0 && !(depths[i] > depths[i - 1])) {
      fail(ErrorCode::InvalidDepth, "plane depths must be strictly increasing");
    }
  }
}

Eigen::Matrix3d homography_matrix(const Camera& cam_i, const Camera& cam_r, double z) {
  if (!(z > 0.0)) fail(ErrorCode::InvalidDepth, "plane depth must be positive");
  cam_i.validate();
  cam_r.validate();
  const Eigen::Vector3d n = cam_r.principal_axis();
  // Reference -> view i for points on the plane n . (X - t_r) = z.
  const Eigen::Matrix3d ref_to_i =
      cam_i.K * cam_i.R.transpose() *
      (Eigen::Matrix3d::Identity() + (cam_r.t - cam_i.t) * n.transpose() / z) * cam_r.R *
      cam_r.K.inverse();
  Eigen::Matrix3d H;
  bool invertible = false;
  ref_to_i.computeInverseWithCheck(H, invertible, 1e-15);
  if (!invertible) fail(ErrorCode::NonInvertible, "degenerate plane homography");
  return H;
}

void sample_bilinear(const Image& source, double x, double y, float* out) {
  const int channels = source.channels;
  for (int c = 0; c < channels; ++c) out[c] = 0.0f;
  if (!std::isfinite(x) || !std::isfinite(y)) return;
  const double rx = std::round(x), ry = std::round(y);
  if (std::abs(x - rx) < 1e-9) x = rx;
  if (std::abs(y - ry) < 1e-9) y = ry;
  if (x <= -1.0 || y <= -1.0 || x >= source.width || y >= source.height) return;
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  const int xs[2] = {x0, x0 + 1};
  const int ys[2] = {y0, y0 + 1};
  const double wx[2] = {1.0 - fx, fx};
  const double wy[2] = {1.0 - fy, fy};
  double acc[64] = {};
  std::vector<double> wide;
  double* sum = acc;
  if (channels > 64) {
    wide.assign(static_cast<std::size_t>(channels), 0.0);
    sum = wide.data();
  }
  for (int j = 0; j < 2; ++j) {
    if (ys[j] < 0 || ys[j] >= source.height || wy[j] == 0.0) continue;
    for (int i = 0; i < 2; ++i) {
      if (xs[i] < 0 || xs[i] >= source.width || wx[i] == 0.0) continue;
      const double w = wx[i] * wy[j];
      const float* px = &source.data[source.offset(xs[i], ys[j])];
      for (int c = 0; c < channels; ++c) sum[c] += w * px[c];
    }
  }
  for (int c = 0; c < channels; ++c) out[c] = static_cast<float>(sum[c]);
}

Image warp_feature_map(const Image& source, const Eigen::Matrix3d& H, int out_width,
                       int out_height) {
  Eigen::Matrix3d Hinv;
  bool invertible = false;
  H.computeInverseWithCheck(Hinv, invertible, 1e-15);
  if (!invertible || !Hinv.allFinite()) fail(ErrorCode::NonInvertible, "warp homography");
  Image out(out_width, out_height, source.channels);
  parallel_for(static_cast<std::size_t>(out_height), 8, [&](std::size_t begin, std::size_t end) {
    for (std::size_t yy = begin; yy < end; ++yy) {
      const int v = static_cast<int>(yy);
      for (int u = 0; u < out_width; ++u) {
        const Eigen::Vector3d q = Hinv * Eigen::Vector3d(u + 0.5, v + 0.5, 1.0);
        float* dst = &out.data[out.offset(u, v)];
        if (!(q.z() > 0.0)) continue;
        sample_bilinear(source, q.x() / q.z() - 0.5, q.y() / q.z() - 0.5, dst);
      }
    }
  });
  return out;
}

Ray pixel_ray(const Camera& cam, double u, double v) {
  if (!(u >= 0.0 && v >= 0.0 && u < cam.width && v < cam.height)) {
    std::ostringstream msg;
    msg << "pixel (" << u << ", " << v << ") outside " << cam.width << "x" << cam.height;
    fail(ErrorCode::OutOfImage, msg.str());
  }
  const Eigen::Vector3d dir =
      cam.R * cam.K.triangularView<Eigen::Upper>().solve(Eigen::Vector3d(u + 0.5, v + 0.5, 1.0));
  return {cam.t, dir.normalized()};
}

Eigen::Vector3d point_at_depth(const Camera& cam, double u, double v, double z) {
  const Eigen::Vector3d local =
      cam.K.triangularView<Eigen::Upper>().solve(Eigen::Vector3d(u + 0.5, v + 0.5, 1.0));
  return cam.t + z * (cam.R * local);
}

Projection project_point(const Camera& cam, const Eigen::Vector3d& x) {
  const Eigen::Vector3d local = cam.R.transpose() * (x - cam.t);
  if (!(local.z() > 0.0)) fail(ErrorCode::BehindCamera, "point is not in front of the camera");
  const Eigen::Vector3d h = cam.K * local;
  return {h.x() / h.z() - 0.5, h.y() / h.z() - 0.5, local.z()};
}

}  // namespace voxsel
