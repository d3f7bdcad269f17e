#include "voxsel/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>

namespace voxsel {

Eigen::Vector3d Texture::color(const Eigen::Vector3d& x) const {
  Eigen::Vector3d c;
  for (int k = 0; k < 3; ++k) {
    c[k] = base[k] + amplitude[k] * std::sin(frequency.dot(x.cwiseProduct(
                                                 Eigen::Vector3d::Constant(1.0 + 0.37 * k))) +
                                             phase[k]);
  }
  if (stripe_amplitude != 0.0) {
    const double s = std::sin(2.0 * std::numbers::pi * x[stripe_axis] / stripe_period);
    c.array() += stripe_amplitude * (s > 0.0 ? 1.0 : -1.0);
  }
  return c.cwiseMax(0.0).cwiseMin(1.0);
}

bool SceneObject::contains(const Eigen::Vector3d& x) const {
  const Eigen::Vector3d r = (x - center).cwiseQuotient(half_extent);
  if (shape == ShapeKind::Ellipsoid) return r.squaredNorm() <= 1.0;
  return r.cwiseAbs().maxCoeff() <= 1.0;
}

void SceneSpec::validate() const {
  if (width < 8 || height < 8) fail(ErrorCode::InvalidArgument, "scene image too small");
  if (planes < 2) fail(ErrorCode::InvalidArgument, "scene needs at least 2 planes");
  if (!(z_near > 0.0 && z_far > z_near)) fail(ErrorCode::InvalidDepth, "need 0 < z_near < z_far");
  if (rig.centers.size() < 3) {
    fail(ErrorCode::InvalidArgument, "rig needs a reference, a source and a validation camera");
  }
  if (rig.centers.front().norm() != 0.0) {
    fail(ErrorCode::InvalidCamera, "reference camera must sit at the origin");
  }
  if (objects.empty()) fail(ErrorCode::EmptyInput, "scene has no objects");
  const bool any_fg = std::any_of(objects.begin(), objects.end(), [](auto& o) { return o.foreground; });
  const bool any_bg = std::any_of(objects.begin(), objects.end(), [](auto& o) { return !o.foreground; });
  if (!any_fg || !any_bg) {
    fail(ErrorCode::InvalidArgument, "scene needs at least one foreground and one background object");
  }
  for (const auto& o : objects) {
    if ((o.half_extent.array() <= 0.0).any()) fail(ErrorCode::InvalidArgument, "object extent must be positive");
    if (!(o.opacity > 0.0 && o.opacity <= 1.0)) fail(ErrorCode::InvalidArgument, "opacity must be in (0, 1]");
  }
}

SceneSpec default_scene_spec(std::uint64_t seed) {
  Rng rng(seed * 0x9E3779B97F4A7C15ULL + 17);
  auto jitter = [&](double a) { return uniform(rng, -a, a); };
  SceneSpec s;
  s.seed = seed;
  s.rig.centers = {{0.0, 0.0, 0.0},
                   {0.30, 0.0, 0.0},
                   {-0.30, 0.05, 0.0},
                   {0.0, -0.25, 0.0},
                   {0.18, 0.15, 0.0}};

  SceneObject fg;
  fg.name = "object";
  fg.foreground = true;
  fg.center = {jitter(0.35), jitter(0.25), 4.6 + jitter(0.3)};
  fg.half_extent = {0.85 + jitter(0.1), 0.7 + jitter(0.08), 0.6 + jitter(0.08)};
  fg.opacity = 0.9;
  fg.texture.base = {0.85 + jitter(0.05), 0.45 + jitter(0.1), 0.2 + jitter(0.05)};
  fg.texture.amplitude = {0.1, 0.12, 0.08};
  fg.texture.frequency = {3.0 + jitter(1.0), 2.5 + jitter(1.0), 2.0};
  fg.texture.phase = {jitter(3.0), jitter(3.0), jitter(3.0)};
  fg.texture.stripe_amplitude = 0.08;
  fg.texture.stripe_period = 0.3;
  fg.texture.stripe_axis = 1;
  s.objects.push_back(fg);

  SceneObject lookalike;
  lookalike.name = "lookalike_box";
  lookalike.shape = ShapeKind::Box;
  lookalike.center = {-1.7 + jitter(0.15), 0.75 + jitter(0.15), 6.4 + jitter(0.3)};
  lookalike.half_extent = {0.5, 0.5, 0.4};
  lookalike.opacity = 0.95;
  lookalike.texture.base = {0.8, 0.5, 0.25};
  lookalike.texture.amplitude = {0.1, 0.1, 0.08};
  lookalike.texture.frequency = {2.0, 3.0, 1.5};
  s.objects.push_back(lookalike);

  SceneObject front;
  front.name = "front_box";
  front.shape = ShapeKind::Box;
  front.center = {1.55 + jitter(0.1), -0.85 + jitter(0.1), 3.2 + jitter(0.2)};
  front.half_extent = {0.32, 0.38, 0.28};
  front.opacity = 0.95;
  front.texture.base = {0.2, 0.35, 0.8};
  front.texture.amplitude = {0.08, 0.1, 0.1};
  front.texture.frequency = {4.0, 2.0, 2.0};
  s.objects.push_back(front);

  SceneObject floater;
  floater.name = "floater";
  floater.center = {0.95 + jitter(0.1), -1.2 + jitter(0.1), 5.6 + jitter(0.2)};
  floater.half_extent = {0.25, 0.25, 0.25};
  floater.opacity = 0.85;
  floater.texture.base = {0.3, 0.75, 0.35};
  floater.texture.amplitude = {0.08, 0.1, 0.08};
  s.objects.push_back(floater);

  SceneObject floor;
  floor.name = "floor";
  floor.shape = ShapeKind::Box;
  floor.center = {0.0, 1.55, 6.0};
  floor.half_extent = {6.0, 0.2, 3.2};
  floor.opacity = 1.0;
  floor.texture.base = {0.5, 0.42, 0.32};
  floor.texture.amplitude = {0.1, 0.08, 0.06};
  floor.texture.frequency = {3.0, 1.0, 4.0};
  floor.texture.stripe_amplitude = 0.06;
  floor.texture.stripe_period = 0.5;
  floor.texture.stripe_axis = 2;
  s.objects.push_back(floor);

  SceneObject wall;
  wall.name = "wall";
  wall.shape = ShapeKind::Box;
  wall.center = {0.0, 0.0, 8.9};
  wall.half_extent = {7.0, 6.0, 0.3};
  wall.opacity = 1.0;
  wall.texture.base = {0.38, 0.42, 0.52};
  wall.texture.amplitude = {0.12, 0.1, 0.12};
  wall.texture.frequency = {2.2, 1.7, 0.5};
  wall.texture.phase = {jitter(3.0), jitter(3.0), jitter(3.0)};
  s.objects.push_back(wall);
  return s;
}

std::vector<View> SyntheticScene::input_views() const {
  std::vector<View> views;
  for (int i = 0; i < validation_view(); ++i) views.push_back({images[i], cameras[i], i});
  return views;
}

SyntheticScene make_scene(const SceneSpec& spec) {
  spec.validate();
  SyntheticScene sc;
  sc.spec = spec;
  for (const auto& c : spec.rig.centers) {
    sc.cameras.push_back(c.norm() == 0.0
                             ? Camera::look_at(c, c + Eigen::Vector3d::UnitZ(), -Eigen::Vector3d::UnitY(),
                                               spec.rig.focal, spec.width, spec.height)
                             : Camera::look_at(c, spec.rig.target, -Eigen::Vector3d::UnitY(),
                                               spec.rig.focal, spec.width, spec.height));
  }
  for (const auto& o : spec.objects) {
    if (!o.foreground) continue;
    for (const auto& cam : sc.cameras) {
      const double depth = cam.principal_axis().dot(o.center - cam.t);
      bool inside = depth > 0.0;
      if (inside) {
        const Projection pr = project_point(cam, o.center);
        inside = pr.u >= 0 && pr.v >= 0 && pr.u < cam.width && pr.v < cam.height;
      }
      if (!inside) fail(ErrorCode::OutOfImage, "foreground object '" + o.name + "' outside a camera frustum");
    }
    if (o.center.z() - o.half_extent.z() < spec.z_near || o.center.z() + o.half_extent.z() > spec.z_far) {
      fail(ErrorCode::InvalidDepth, "foreground object '" + o.name + "' outside the plane range");
    }
  }

  sc.volume = PlaneVolume(sc.cameras.front(),
                          DepthPlaneSet::make(spec.z_near, spec.z_far, spec.planes, spec.spacing),
                          spec.basis);
  PlaneVolume& vol = sc.volume;
  sc.gt_labels.assign(vol.voxel_count(), 0);
  const int stride = vol.stride();
  parallel_for(static_cast<std::size_t>(vol.depth()), 1, [&](std::size_t begin, std::size_t end) {
    for (auto d = static_cast<int>(begin); d < static_cast<int>(end); ++d) {
      for (int y = 0; y < vol.height(); ++y) {
        for (int x = 0; x < vol.width(); ++x) {
          const Eigen::Vector3d p = vol.position(x, y, d);
          const std::size_t i = vol.index(x, y, d);
          auto v = vol.voxel(i);
          for (const auto& o : spec.objects) {
            if (!o.contains(p)) continue;
            v[0] = static_cast<float>(o.opacity);
            const Eigen::Vector3d c = o.texture.color(p);
            for (int k = 0; k < 3; ++k) v[1 + k] = static_cast<float>(c[k]);
            for (int k = 4; k < stride; ++k) v[k] = 0.0f;  // no view dependence
            sc.gt_labels[i] = o.foreground ? 1 : 0;
            break;
          }
        }
      }
    }
  });
  for (const auto& cam : sc.cameras) sc.images.push_back(render_view(vol, cam).rgb);
  const RenderedView gt = render_view(vol, sc.cameras.back(), sc.gt_labels);
  sc.gt_fg_validation = gt.rgb;
  sc.gt_mask_validation = Mask(gt.alpha.width, gt.alpha.height, 1);
  for (std::size_t i = 0; i < gt.alpha.data.size(); ++i) {
    sc.gt_mask_validation.data[i] = gt.alpha.data[i] > 0.5f ? 1 : 0;
  }
  return sc;
}

Mask selection_mask(const PlaneVolume& vol, const Camera& cam,
                    const std::vector<std::uint8_t>& selection) {
  const RenderedView r = render_view(vol, cam, selection);
  Mask m(r.alpha.width, r.alpha.height, 1);
  for (std::size_t i = 0; i < r.alpha.data.size(); ++i) m.data[i] = r.alpha.data[i] > 0.5f ? 1 : 0;
  return m;
}

Mask visible_label_mask(const PlaneVolume& vol, const std::vector<std::uint8_t>& gt_labels,
                        std::uint8_t label, double gamma) {
  if (gt_labels.size() != vol.voxel_count()) fail(ErrorCode::ShapeMismatch, "label volume mismatch");
  Mask m(vol.width(), vol.height(), 1);
  for (int y = 0; y < vol.height(); ++y)
    for (int x = 0; x < vol.width(); ++x) {
      const auto hit = surface_voxel(vol, pixel_ray(vol.ref_cam(), x, y), gamma);
      m.at(x, y) = hit && gt_labels[vol.index(*hit)] == label ? 1 : 0;
    }
  return m;
}

Mask erode(const Mask& m, int radius) {
  Mask out(m.width, m.height, 1);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      bool keep = m.at(x, y) != 0;
      for (int dy = -radius; keep && dy <= radius; ++dy)
        for (int dx = -radius; keep && dx <= radius; ++dx) {
          if (dx * dx + dy * dy > radius * radius) continue;
          const int xx = x + dx, yy = y + dy;
          keep = xx >= 0 && yy >= 0 && xx < m.width && yy < m.height && m.at(xx, yy) != 0;
        }
      out.at(x, y) = keep ? 1 : 0;
    }
  return out;
}

namespace {

std::vector<Stroke> random_strokes(const Mask& region, int count, Rng& rng) {
  std::vector<Pixel> candidates;
  for (int y = 0; y < region.height; ++y)
    for (int x = 0; x < region.width; ++x)
      if (region.at(x, y)) candidates.push_back({x, y});
  if (candidates.empty()) fail(ErrorCode::EmptyInput, "mask too small to place scribbles after erosion");
  auto segment_inside = [&](Pixel a, Pixel b) {
    for (const auto& p : bresenham_line(a, b)) {
      if (p.x < 0 || p.y < 0 || p.x >= region.width || p.y >= region.height || !region.at(p.x, p.y)) {
        return false;
      }
    }
    return true;
  };
  std::vector<Stroke> strokes;
  for (int s = 0; s < count; ++s) {
    Stroke stroke{candidates[static_cast<std::size_t>(
        uniform_int(rng, 0, static_cast<int>(candidates.size()) - 1))]};
    const int vertices = uniform_int(rng, 3, 5);
    double heading = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    for (int v = 1; v < vertices; ++v) {
      for (int attempt = 0; attempt < 30; ++attempt) {
        const double len = uniform(rng, 6.0, 14.0);
        const double dir = heading + uniform(rng, -0.9, 0.9) + (attempt >= 10 ? uniform(rng, -3.0, 3.0) : 0.0);
        const Pixel next{stroke.back().x + static_cast<int>(std::lround(len * std::cos(dir))),
                         stroke.back().y + static_cast<int>(std::lround(len * std::sin(dir)))};
        if (segment_inside(stroke.back(), next)) {
          stroke.push_back(next);
          heading = dir;
          break;
        }
      }
    }
    strokes.push_back(std::move(stroke));
  }
  return strokes;
}

}  // namespace

ScribbleSet auto_scribbles(const SyntheticScene& scene, int n_fg_strokes, int n_bg_strokes,
                           std::uint64_t seed, int brush_radius) {
  if (n_fg_strokes < 1 || n_bg_strokes < 1) {
    fail(ErrorCode::InvalidArgument, "need at least one stroke per class");
  }
  const int margin = 3 + brush_radius;
  const Mask fg = erode(visible_label_mask(scene.volume, scene.gt_labels, 1), margin);
  const Mask bg = erode(visible_label_mask(scene.volume, scene.gt_labels, 0), margin);
  Rng rng(seed);
  ScribbleSet s;
  s.fg_strokes = random_strokes(fg, n_fg_strokes, rng);
  s.bg_strokes = random_strokes(bg, n_bg_strokes, rng);
  return s;
}

// ---- JSON ----

namespace {

using nlohmann::json;

json vec(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec_from(const json& j, const char* field) {
  if (!j.is_array() || j.size() != 3) fail(ErrorCode::Parse, std::string(field) + " must be a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

const char* spacing_name(PlaneSpacing s) {
  switch (s) {
    case PlaneSpacing::Linear: return "linear";
    case PlaneSpacing::InverseDepth: return "inverse_depth";
    case PlaneSpacing::Explicit: return "explicit";
  }
  return "?";
}

PlaneSpacing spacing_from(const std::string& s) {
  if (s == "linear") return PlaneSpacing::Linear;
  if (s == "inverse_depth") return PlaneSpacing::InverseDepth;
  fail(ErrorCode::Parse, "unknown plane spacing '" + s + "'");
}

}  // namespace

std::string scene_spec_to_json(const SceneSpec& s) {
  json j;
  j["width"] = s.width;
  j["height"] = s.height;
  j["planes"] = s.planes;
  j["z_near"] = s.z_near;
  j["z_far"] = s.z_far;
  j["spacing"] = spacing_name(s.spacing);
  j["basis"] = s.basis == BasisKind::Constant ? "constant" : "sh1";
  j["seed"] = s.seed;
  j["rig"]["focal"] = s.rig.focal;
  j["rig"]["target"] = vec(s.rig.target);
  j["rig"]["centers"] = json::array();
  for (const auto& c : s.rig.centers) j["rig"]["centers"].push_back(vec(c));
  j["objects"] = json::array();
  for (const auto& o : s.objects) {
    json t;
    t["base"] = vec(o.texture.base);
    t["amplitude"] = vec(o.texture.amplitude);
    t["frequency"] = vec(o.texture.frequency);
    t["phase"] = vec(o.texture.phase);
    t["stripe_amplitude"] = o.texture.stripe_amplitude;
    t["stripe_period"] = o.texture.stripe_period;
    t["stripe_axis"] = o.texture.stripe_axis;
    j["objects"].push_back({{"name", o.name},
                            {"shape", o.shape == ShapeKind::Box ? "box" : "ellipsoid"},
                            {"center", vec(o.center)},
                            {"half_extent", vec(o.half_extent)},
                            {"opacity", o.opacity},
                            {"foreground", o.foreground},
                            {"texture", t}});
  }
  return j.dump(2);
}

SceneSpec scene_spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("scene spec: ") + e.what());
  }
  SceneSpec s;
  try {
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.planes = j.value("planes", s.planes);
    s.z_near = j.value("z_near", s.z_near);
    s.z_far = j.value("z_far", s.z_far);
    s.spacing = spacing_from(j.value("spacing", std::string("inverse_depth")));
    const std::string basis = j.value("basis", std::string("constant"));
    if (basis != "constant" && basis != "sh1") fail(ErrorCode::Parse, "unknown basis '" + basis + "'");
    s.basis = basis == "constant" ? BasisKind::Constant : BasisKind::ShDegree1;
    s.seed = j.value("seed", s.seed);
    const json& rig = j.at("rig");
    s.rig.focal = rig.value("focal", s.rig.focal);
    if (rig.contains("target")) s.rig.target = vec_from(rig["target"], "rig.target");
    for (const auto& c : rig.at("centers")) s.rig.centers.push_back(vec_from(c, "rig.centers"));
    for (const auto& jo : j.at("objects")) {
      SceneObject o;
      o.name = jo.value("name", std::string());
      const std::string shape = jo.value("shape", std::string("ellipsoid"));
      if (shape != "box" && shape != "ellipsoid") fail(ErrorCode::Parse, "unknown shape '" + shape + "'");
      o.shape = shape == "box" ? ShapeKind::Box : ShapeKind::Ellipsoid;
      o.center = vec_from(jo.at("center"), "center");
      o.half_extent = vec_from(jo.at("half_extent"), "half_extent");
      o.opacity = jo.value("opacity", o.opacity);
      o.foreground = jo.value("foreground", false);
      if (jo.contains("texture")) {
        const json& t = jo["texture"];
        if (t.contains("base")) o.texture.base = vec_from(t["base"], "texture.base");
        if (t.contains("amplitude")) o.texture.amplitude = vec_from(t["amplitude"], "texture.amplitude");
        if (t.contains("frequency")) o.texture.frequency = vec_from(t["frequency"], "texture.frequency");
        if (t.contains("phase")) o.texture.phase = vec_from(t["phase"], "texture.phase");
        o.texture.stripe_amplitude = t.value("stripe_amplitude", 0.0);
        o.texture.stripe_period = t.value("stripe_period", o.texture.stripe_period);
        o.texture.stripe_axis = t.value("stripe_axis", 0);
        if (o.texture.stripe_axis < 0 || o.texture.stripe_axis > 2) {
          fail(ErrorCode::Parse, "stripe_axis must be 0, 1 or 2");
        }
      }
      s.objects.push_back(o);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("scene spec: ") + e.what());
  }
  s.validate();
  return s;
}

}  // namespace voxsel
