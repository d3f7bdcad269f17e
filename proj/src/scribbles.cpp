#include "voxsel/scribbles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "voxsel/kdtree.hpp"

namespace voxsel {

std::vector<Pixel> bresenham_line(Pixel a, Pixel b) {
  std::vector<Pixel> out;
  int x = a.x, y = a.y;
  const int dx = std::abs(b.x - a.x), sx = a.x < b.x ? 1 : -1;
  const int dy = -std::abs(b.y - a.y), sy = a.y < b.y ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    out.push_back({x, y});
    if (x == b.x && y == b.y) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
  return out;
}

namespace {

std::vector<Pixel> rasterize_class(const std::vector<Stroke>& strokes, int width, int height,
                                   int radius) {
  std::vector<Pixel> centers;
  for (const auto& stroke : strokes) {
    for (const auto& p : stroke) {
      if (p.x < 0 || p.y < 0 || p.x >= width || p.y >= height) {
        std::ostringstream msg;
        msg << "stroke vertex (" << p.x << ", " << p.y << ") outside " << width << "x" << height;
        fail(ErrorCode::OutOfImage, msg.str());
      }
    }
    if (stroke.size() == 1) centers.push_back(stroke.front());
    for (std::size_t i = 1; i < stroke.size(); ++i) {
      const auto line = bresenham_line(stroke[i - 1], stroke[i]);
      centers.insert(centers.end(), line.begin(), line.end());
    }
  }
  std::sort(centers.begin(), centers.end());
  centers.erase(std::unique(centers.begin(), centers.end()), centers.end());
  std::vector<Pixel> out;
  for (const auto& c : centers) {
    for (int oy = -radius; oy <= radius; ++oy)
      for (int ox = -radius; ox <= radius; ++ox) {
        if (ox * ox + oy * oy > radius * radius) continue;
        const Pixel p{c.x + ox, c.y + oy};
        if (p.x >= 0 && p.y >= 0 && p.x < width && p.y < height) out.push_back(p);
      }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

ScribblePixels rasterize_scribbles(const ScribbleSet& s, int width, int height,
                                   int brush_radius) {
  if (brush_radius < 0) fail(ErrorCode::InvalidArgument, "brush radius must be >= 0");
  ScribblePixels px;
  px.fg = rasterize_class(s.fg_strokes, width, height, brush_radius);
  px.bg = rasterize_class(s.bg_strokes, width, height, brush_radius);
  std::vector<Pixel> overlap;
  std::set_intersection(px.fg.begin(), px.fg.end(), px.bg.begin(), px.bg.end(),
                        std::back_inserter(overlap));
  if (!overlap.empty()) {
    std::ostringstream msg;
    msg << overlap.size() << " pixel(s) in both classes:";
    for (std::size_t i = 0; i < overlap.size() && i < 20; ++i) {
      msg << " (" << overlap[i].x << "," << overlap[i].y << ")";
    }
    if (overlap.size() > 20) msg << " ...";
    fail(ErrorCode::Overlap, msg.str());
  }
  return px;
}

std::vector<std::size_t> LabeledVoxels::voxels_with_label(std::uint8_t label) const {
  std::vector<std::size_t> out;
  for (const auto& e : entries)
    if (e.label == label) out.push_back(e.voxel);
  return out;
}

std::size_t LabeledVoxels::count(std::uint8_t label) const {
  return static_cast<std::size_t>(std::count_if(
      entries.begin(), entries.end(), [&](const LabeledVoxel& e) { return e.label == label; }));
}

LabeledVoxels lift_pixels(const PlaneVolume& vol, const ScribblePixels& pixels, double gamma) {
  LabeledVoxels out;
  std::map<std::size_t, LabeledVoxel> found;
  std::vector<std::size_t> conflicted;
  auto lift_class = [&](const std::vector<Pixel>& px, std::uint8_t label) {
    for (const auto& p : px) {
      const auto hit = surface_voxel(vol, pixel_ray(vol.ref_cam(), p.x, p.y), gamma);
      if (!hit) {
        ++out.dropped_no_surface;
        continue;
      }
      const std::size_t idx = vol.index(*hit);
      auto it = found.find(idx);
      if (it == found.end()) {
        found.emplace(idx, LabeledVoxel{idx, label, p});
      } else if (it->second.label != label) {
        conflicted.push_back(idx);
      }
    }
  };
  lift_class(pixels.fg, 1);
  lift_class(pixels.bg, 0);
  std::sort(conflicted.begin(), conflicted.end());
  conflicted.erase(std::unique(conflicted.begin(), conflicted.end()), conflicted.end());
  for (std::size_t idx : conflicted) found.erase(idx);
  out.dropped_conflict = conflicted.size();
  for (auto& [idx, e] : found) out.entries.push_back(e);
  if (out.entries.empty()) fail(ErrorCode::EmptyInput, "no scribble pixel reached a surface voxel");
  return out;
}

LabeledVoxels lift_scribbles(const PlaneVolume& vol, const ScribbleSet& s, double gamma,
                             int brush_radius) {
  if (s.reference_view != 0) {
    fail(ErrorCode::InvalidArgument, "scribbles must be drawn on the volume's reference view");
  }
  return lift_pixels(vol, rasterize_scribbles(s, vol.width(), vol.height(), brush_radius), gamma);
}

ScribblePixels project_labeled_voxels(const LabeledVoxels& lv, const PlaneVolume& vol,
                                      const Camera& target) {
  target.validate();
  ScribblePixels out;
  const Eigen::Vector3d n = target.principal_axis();
  for (const auto& e : lv.entries) {
    const Eigen::Vector3d X = vol.position(vol.unravel(e.voxel));
    if (!(n.dot(X - target.t) > 0.0)) continue;
    const Projection pr = project_point(target, X);
    const int x = static_cast<int>(std::floor(pr.u + 0.5));
    const int y = static_cast<int>(std::floor(pr.v + 0.5));
    if (x < 0 || y < 0 || x >= target.width || y >= target.height) continue;
    (e.label ? out.fg : out.bg).push_back({x, y});
  }
  for (auto* v : {&out.fg, &out.bg}) {
    std::sort(v->begin(), v->end());
    v->erase(std::unique(v->begin(), v->end()), v->end());
  }
  return out;
}

double scene_diagonal(const PlaneVolume& vol) {
  // Voxel centers are multilinear in (x, y, z), so the grid corners bound them.
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (int x : {0, vol.width() - 1})
    for (int y : {0, vol.height() - 1})
      for (int d : {0, vol.depth() - 1}) {
        const Eigen::Vector3d p = vol.position(x, y, d);
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
      }
  const double diag = (hi - lo).norm();
  return diag > 0.0 ? diag : 1.0;
}

std::vector<double> distance_to_points(std::span<const Eigen::Vector3d> set,
                                       std::span<const Eigen::Vector3d> queries, double scale) {
  if (set.empty()) fail(ErrorCode::EmptyInput, "distance field of an empty voxel set");
  if (!(scale > 0.0)) fail(ErrorCode::InvalidArgument, "distance scale must be positive");
  std::vector<double> pts;
  pts.reserve(set.size() * 3);
  for (const auto& p : set) pts.insert(pts.end(), {p.x(), p.y(), p.z()});
  const KdTree tree(std::move(pts), 3);
  std::vector<double> out(queries.size());
  parallel_for(queries.size(), 4096, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const double q[3] = {queries[k].x(), queries[k].y(), queries[k].z()};
      out[k] = std::sqrt(tree.nearest(q).squared_distance) / scale;
    }
  });
  return out;
}

std::vector<double> distance_field(const PlaneVolume& vol, std::span<const std::size_t> set,
                                   std::span<const std::size_t> queries) {
  if (set.empty()) fail(ErrorCode::EmptyInput, "distance field of an empty voxel set");
  std::vector<Eigen::Vector3d> pts, qs;
  pts.reserve(set.size());
  qs.reserve(queries.size());
  for (std::size_t i : set) pts.push_back(vol.position(vol.unravel(i)));
  for (std::size_t i : queries) qs.push_back(vol.position(vol.unravel(i)));
  return distance_to_points(pts, qs, scene_diagonal(vol));
}

std::vector<double> distance_field(const PlaneVolume& vol, std::span<const std::size_t> set) {
  std::vector<std::size_t> all(vol.voxel_count());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return distance_field(vol, set, all);
}

}  // namespace voxsel
