#include "voxsel/volume.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace voxsel {

int basis_size(BasisKind kind) { return kind == BasisKind::ShDegree1 ? 4 : 1; }

PlaneVolume::PlaneVolume(Camera ref_cam, DepthPlaneSet planes, BasisKind basis)
    : ref_cam_(std::move(ref_cam)), planes_(std::move(planes)), basis_(basis) {
  ref_cam_.validate();
  planes_.validate();
  data_.assign(voxel_count() * static_cast<std::size_t>(stride()), 0.0f);
}

VoxelIndex PlaneVolume::unravel(std::size_t i) const {
  const auto w = static_cast<std::size_t>(width());
  const auto h = static_cast<std::size_t>(height());
  return {static_cast<int>(i % w), static_cast<int>((i / w) % h), static_cast<int>(i / (w * h))};
}

Eigen::Vector3d PlaneVolume::position(int x, int y, int d) const {
  return point_at_depth(ref_cam_, x, y, planes_.depths[static_cast<std::size_t>(d)]);
}

void PlaneVolume::validate() const {
  ref_cam_.validate();
  planes_.validate();
  if (data_.size() != voxel_count() * static_cast<std::size_t>(stride())) {
    fail(ErrorCode::ShapeMismatch, "voxel payload size does not match the grid");
  }
  const std::size_t n = voxel_count();
  for (std::size_t i = 0; i < n; ++i) {
    const float a = xi(i);
    if (!(a >= 0.0f && a <= 1.0f)) fail(ErrorCode::InvalidArgument, "transparency outside [0,1]");
  }
}

Eigen::Vector3d evaluate_basis(std::span<const float> coeffs, BasisKind kind,
                               const Eigen::Vector3d& dir) {
  Eigen::Vector3d c(coeffs[0], coeffs[1], coeffs[2]);
  if (kind == BasisKind::ShDegree1) {
    // Real SH, l = 1, ordered m = -1, 0, 1.
    const double k = std::sqrt(3.0 / (4.0 * std::numbers::pi));
    const double h[3] = {k * dir.y(), k * dir.z(), k * dir.x()};
    for (int l = 0; l < 3; ++l) {
      const std::size_t o = 3 + 3 * static_cast<std::size_t>(l);
      c += h[l] * Eigen::Vector3d(coeffs[o], coeffs[o + 1], coeffs[o + 2]);
    }
  }
  return c;
}

Eigen::Vector3d basis_color(std::span<const float> coeffs, BasisKind kind,
                            const Eigen::Vector3d& dir) {
  if (std::abs(dir.norm() - 1.0) > 1e-6) {
    fail(ErrorCode::InvalidArgument, "view direction must be unit length");
  }
  if (coeffs.size() < static_cast<std::size_t>(3 * basis_size(kind))) {
    fail(ErrorCode::ShapeMismatch, "coefficient count does not match the basis");
  }
  return evaluate_basis(coeffs, kind, dir).cwiseMax(0.0).cwiseMin(1.0);
}

namespace {

double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : v;
}

// Ray parameter of the intersection with reference plane d, or <= 0 if none.
struct PlaneHit {
  double s = -1.0;
  double x = 0.0;  // reference pixel index coordinates
  double y = 0.0;
};

class PlaneIntersector {
 public:
  explicit PlaneIntersector(const PlaneVolume& vol)
      : vol_(vol), n_(vol.ref_cam().principal_axis()),
        to_ref_(vol.ref_cam().K * vol.ref_cam().R.transpose()) {}

  PlaneHit hit(const Ray& ray, int d) const {
    PlaneHit h;
    const double denom = n_.dot(ray.direction);
    if (!(denom > 1e-12)) return h;
    const double z = vol_.planes().depths[static_cast<std::size_t>(d)];
    const double s = (z - n_.dot(ray.origin - vol_.ref_cam().t)) / denom;
    if (!(s > 0.0)) return h;
    const Eigen::Vector3d p = to_ref_ * (ray.origin + s * ray.direction - vol_.ref_cam().t);
    if (!(p.z() > 0.0)) return h;
    h.s = s;
    h.x = snap(p.x() / p.z() - 0.5);
    h.y = snap(p.y() / p.z() - 0.5);
    return h;
  }

 private:
  const PlaneVolume& vol_;
  Eigen::Vector3d n_;
  Eigen::Matrix3d to_ref_;
};

}  // namespace

RenderedView render_view(const PlaneVolume& vol, const Camera& cam,
                         std::span<const std::uint8_t> selection) {
  cam.validate();
  if (!selection.empty() && selection.size() != vol.voxel_count()) {
    fail(ErrorCode::ShapeMismatch, "selection mask does not match the volume grid");
  }
  RenderedView out{Image(cam.width, cam.height, 3), Image(cam.width, cam.height, 1)};
  const PlaneIntersector planes(vol);
  const int depth = vol.depth();
  const BasisKind basis = vol.basis();
  const bool masked = !selection.empty();

  parallel_for(static_cast<std::size_t>(cam.height), 4, [&](std::size_t begin, std::size_t end) {
    for (std::size_t row = begin; row < end; ++row) {
      const int v = static_cast<int>(row);
      for (int u = 0; u < cam.width; ++u) {
        const Ray ray = pixel_ray(cam, u, v);
        Eigen::Vector3d color = Eigen::Vector3d::Zero();
        double transmittance = 1.0;
        for (int d = 0; d < depth; ++d) {
          const PlaneHit h = planes.hit(ray, d);
          if (h.s <= 0.0) continue;
          if (h.x <= -1.0 || h.y <= -1.0 || h.x >= vol.width() || h.y >= vol.height()) continue;
          const int x0 = static_cast<int>(std::floor(h.x));
          const int y0 = static_cast<int>(std::floor(h.y));
          const double fx = h.x - x0, fy = h.y - y0;
          double a = 0.0;
          Eigen::Vector3d premult = Eigen::Vector3d::Zero();
          for (int j = 0; j < 2; ++j) {
            const int yy = y0 + j;
            const double wy = j == 0 ? 1.0 - fy : fy;
            if (wy == 0.0 || yy < 0 || yy >= vol.height()) continue;
            for (int i = 0; i < 2; ++i) {
              const int xx = x0 + i;
              const double wx = i == 0 ? 1.0 - fx : fx;
              if (wx == 0.0 || xx < 0 || xx >= vol.width()) continue;
              const std::size_t idx = vol.index(xx, yy, d);
              if (masked && !selection[idx]) continue;
              const auto vox = vol.voxel(idx);
              if (vox[0] <= 0.0f) continue;
              const double w = wx * wy * vox[0];
              a += w;
              premult += w * basis_color(vox.subspan(1), basis, ray.direction);
            }
          }
          if (a <= 0.0) continue;
          a = std::min(a, 1.0);
          color += transmittance * premult;
          transmittance *= 1.0 - a;
        }
        for (int c = 0; c < 3; ++c) {
          out.rgb.at(u, v, c) = static_cast<float>(std::clamp(color[c], 0.0, 1.0));
        }
        out.alpha.at(u, v) = static_cast<float>(std::clamp(1.0 - transmittance, 0.0, 1.0));
      }
    }
  });
  return out;
}

std::vector<TransmittanceSample> transmittance_walk(const PlaneVolume& vol, const Ray& ray) {
  std::vector<TransmittanceSample> walk;
  const PlaneIntersector planes(vol);
  double transmittance = 1.0;
  for (int d = 0; d < vol.depth(); ++d) {
    const PlaneHit h = planes.hit(ray, d);
    if (h.s <= 0.0) continue;
    const int x = static_cast<int>(std::floor(h.x + 0.5));
    const int y = static_cast<int>(std::floor(h.y + 0.5));
    if (!vol.contains(x, y, d)) continue;
    transmittance *= 1.0 - static_cast<double>(vol.xi(vol.index(x, y, d)));
    walk.push_back({{x, y, d}, transmittance});
  }
  return walk;
}

std::optional<VoxelIndex> surface_voxel(const PlaneVolume& vol, const Ray& ray, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) fail(ErrorCode::InvalidArgument, "gamma must be in (0,1)");
  for (const auto& s : transmittance_walk(vol, ray)) {
    if (s.transmittance < gamma) return s.voxel;
  }
  return std::nullopt;
}

std::optional<std::size_t> PlaneResampling::coarse_of(int x, int y, int d) const {
  const int cd = fine_to_coarse_plane[static_cast<std::size_t>(d)];
  if (cd < 0) return std::nullopt;
  return coarse_index(x / factor, y / factor, cd);
}

PlaneResampling make_resampling(int fine_w, int fine_h, int fine_d, int factor_xy,
                                int out_planes, std::span<const int> plane_keep) {
  if (plane_keep.empty()) fail(ErrorCode::EmptyInput, "no planes to keep");
  if (factor_xy < 1) fail(ErrorCode::InvalidArgument, "downsample factor must be >= 1");
  PlaneResampling map;
  map.factor = factor_xy;
  map.fine_w = fine_w;
  map.fine_h = fine_h;
  map.fine_d = fine_d;
  map.kept.assign(plane_keep.begin(), plane_keep.end());
  std::sort(map.kept.begin(), map.kept.end());
  map.kept.erase(std::unique(map.kept.begin(), map.kept.end()), map.kept.end());
  if (map.kept.front() < 0 || map.kept.back() >= fine_d) {
    fail(ErrorCode::InvalidArgument, "kept plane index outside the volume");
  }
  const int kept = static_cast<int>(map.kept.size());
  if (out_planes < 1 || out_planes > kept) {
    fail(ErrorCode::InvalidArgument, "out_planes must be in [1, number of kept planes]");
  }
  map.coarse_w = (fine_w + factor_xy - 1) / factor_xy;
  map.coarse_h = (fine_h + factor_xy - 1) / factor_xy;
  map.coarse_d = out_planes;
  map.coarse_position.resize(static_cast<std::size_t>(out_planes));
  for (int j = 0; j < out_planes; ++j) {
    map.coarse_position[j] =
        out_planes == 1 ? 0.0 : static_cast<double>(j) * (kept - 1) / (out_planes - 1);
  }
  map.fine_to_coarse_plane.assign(static_cast<std::size_t>(fine_d), -1);
  for (int i = 0; i < kept; ++i) {
    const double pos = kept == 1 ? 0.0 : static_cast<double>(i) * (out_planes - 1) / (kept - 1);
    map.fine_to_coarse_plane[static_cast<std::size_t>(map.kept[i])] =
        static_cast<int>(std::floor(pos + 0.5));
  }
  return map;
}

std::vector<float> resample_field(const PlaneResampling& map, std::span<const float> fine,
                                  int channels) {
  const std::size_t fine_plane = static_cast<std::size_t>(map.fine_w) * map.fine_h * channels;
  if (fine.size() != fine_plane * static_cast<std::size_t>(map.fine_d)) {
    fail(ErrorCode::ShapeMismatch, "field size does not match the fine grid");
  }
  const std::size_t coarse_plane = static_cast<std::size_t>(map.coarse_w) * map.coarse_h * channels;
  const std::size_t kept = map.kept.size();

  // XY block average of every kept plane.
  std::vector<float> pooled(coarse_plane * kept);
  parallel_for(kept, 1, [&](std::size_t begin, std::size_t end) {
    std::vector<double> sum(static_cast<std::size_t>(channels));
    for (std::size_t k = begin; k < end; ++k) {
      const float* src = fine.data() + static_cast<std::size_t>(map.kept[k]) * fine_plane;
      float* dst = pooled.data() + k * coarse_plane;
      for (int cy = 0; cy < map.coarse_h; ++cy) {
        for (int cx = 0; cx < map.coarse_w; ++cx) {
          std::fill(sum.begin(), sum.end(), 0.0);
          const int x1 = std::min(map.fine_w, (cx + 1) * map.factor);
          const int y1 = std::min(map.fine_h, (cy + 1) * map.factor);
          int count = 0;
          for (int y = cy * map.factor; y < y1; ++y) {
            for (int x = cx * map.factor; x < x1; ++x) {
              const float* v = src + (static_cast<std::size_t>(y) * map.fine_w + x) * channels;
              for (int c = 0; c < channels; ++c) sum[c] += v[c];
              ++count;
            }
          }
          float* o = dst + (static_cast<std::size_t>(cy) * map.coarse_w + cx) * channels;
          for (int c = 0; c < channels; ++c) o[c] = static_cast<float>(sum[c] / count);
        }
      }
    }
  });

  std::vector<float> out(coarse_plane * static_cast<std::size_t>(map.coarse_d));
  for (int j = 0; j < map.coarse_d; ++j) {
    const double pos = map.coarse_position[static_cast<std::size_t>(j)];
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const double w = pos - static_cast<double>(lo);
    const float* a = pooled.data() + lo * coarse_plane;
    float* dst = out.data() + static_cast<std::size_t>(j) * coarse_plane;
    if (w == 0.0 || lo + 1 >= kept) {
      std::copy(a, a + coarse_plane, dst);
      continue;
    }
    const float* b = a + coarse_plane;
    for (std::size_t i = 0; i < coarse_plane; ++i) {
      dst[i] = static_cast<float>((1.0 - w) * a[i] + w * b[i]);
    }
  }
  return out;
}

std::vector<std::uint8_t> upsample_labels(const PlaneResampling& map,
                                          std::span<const std::uint8_t> coarse) {
  if (coarse.size() != map.coarse_count()) {
    fail(ErrorCode::ShapeMismatch, "coarse labels do not match the resampling");
  }
  std::vector<std::uint8_t> fine(static_cast<std::size_t>(map.fine_w) * map.fine_h * map.fine_d, 0);
  for (int d = 0; d < map.fine_d; ++d) {
    if (map.fine_to_coarse_plane[static_cast<std::size_t>(d)] < 0) continue;
    for (int y = 0; y < map.fine_h; ++y) {
      for (int x = 0; x < map.fine_w; ++x) {
        fine[(static_cast<std::size_t>(d) * map.fine_h + y) * map.fine_w + x] =
            coarse[*map.coarse_of(x, y, d)];
      }
    }
  }
  return fine;
}

DownsampledVolume downsample_volume(const PlaneVolume& vol, int factor_xy, int out_planes,
                                    std::span<const int> plane_keep) {
  PlaneResampling map =
      make_resampling(vol.width(), vol.height(), vol.depth(), factor_xy, out_planes, plane_keep);
  DepthPlaneSet planes;
  planes.spacing = PlaneSpacing::Explicit;
  for (int j = 0; j < map.coarse_d; ++j) {
    const double pos = map.coarse_position[static_cast<std::size_t>(j)];
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const double w = pos - static_cast<double>(lo);
    const double za = vol.planes().depths[static_cast<std::size_t>(map.kept[lo])];
    if (w == 0.0 || lo + 1 >= map.kept.size()) {
      planes.depths.push_back(za);
    } else {
      const double zb = vol.planes().depths[static_cast<std::size_t>(map.kept[lo + 1])];
      planes.depths.push_back((1.0 - w) * za + w * zb);
    }
  }
  if (factor_xy == 1 && map.coarse_d == vol.depth()) planes.spacing = vol.planes().spacing;
  Camera cam = factor_xy == 1 ? vol.ref_cam() : vol.ref_cam().scaled(1.0 / factor_xy);
  cam.width = map.coarse_w;
  cam.height = map.coarse_h;
  PlaneVolume coarse(cam, planes, vol.basis());
  coarse.raw() = resample_field(map, vol.raw(), vol.stride());
  return {std::move(coarse), std::move(map)};
}

}  // namespace voxsel
