#include <doctest.h>

#include "support.hpp"
#include "voxsel/eval.hpp"
#include "voxsel/io.hpp"
#include "voxsel/synth.hpp"

using namespace voxsel;

namespace {

SceneSpec small_spec(std::uint64_t seed) {
  SceneSpec s = default_scene_spec(seed);
  s.width = 64;
  s.height = 48;
  s.planes = 24;
  s.rig.focal = 60;
  return s;
}

std::string scribble_hash(const ScribbleSet& s) { return sha256_hex(format_scribbles(s)); }

}  // namespace

TEST_CASE("scene generation is deterministic") {
  const SyntheticScene a = make_scene(small_spec(3)), b = make_scene(small_spec(3));
  CHECK(encode_volume(a.volume) == encode_volume(b.volume));
  CHECK(a.gt_labels == b.gt_labels);
  REQUIRE(a.images.size() == a.cameras.size());
  for (std::size_t i = 0; i < a.images.size(); ++i) CHECK(a.images[i].data == b.images[i].data);
  CHECK(a.gt_mask_validation.data == b.gt_mask_validation.data);
  CHECK(a.validation_view() == 4);
  CHECK(a.input_views().size() == 4);
  const SyntheticScene c = make_scene(small_spec(4));
  CHECK(encode_volume(c.volume) != encode_volume(a.volume));
  CHECK(scene_spec_to_json(scene_spec_from_json(scene_spec_to_json(a.spec))) == scene_spec_to_json(a.spec));
}

TEST_CASE("scene spec validation") {
  SceneSpec s = small_spec(1);
  s.objects.clear();
  CHECK_THROWS_AS(make_scene(s), Error);
  s = small_spec(1);
  for (auto& o : s.objects) o.foreground = false;
  CHECK_THROWS_AS(make_scene(s), Error);
  s = small_spec(1);
  s.rig.centers[0] = {0.1, 0, 0};
  CHECK_THROWS_AS(make_scene(s), Error);
  s = small_spec(1);
  s.objects[0].center = {40, 0, 5};
  CHECK_THROWS_AS(make_scene(s), Error);
  CHECK_THROWS_AS(scene_spec_from_json("{\"width\": 64, \"bogus\": 1}"), Error);
}

TEST_CASE("voxelized ellipsoid matches the inside test") {
  SceneSpec s = small_spec(1);
  s.objects.resize(2);
  s.objects[0].opacity = 1.0;
  s.objects[0].texture.amplitude.setZero();
  s.objects[0].texture.stripe_amplitude = 0;
  const SyntheticScene scene = make_scene(s);
  std::size_t inside = 0, labeled = 0;
  for (std::size_t i = 0; i < scene.volume.voxel_count(); ++i) {
    const bool in = s.objects[0].contains(scene.volume.position(scene.volume.unravel(i)));
    inside += in;
    labeled += scene.gt_labels[i];
    REQUIRE(static_cast<bool>(scene.gt_labels[i]) == in);
    if (in) REQUIRE(scene.volume.xi(i) == 1.0f);
  }
  CHECK(inside == labeled);
  CHECK(inside > 100);
}

TEST_CASE("reference rendering of the gt selection matches the gt mask") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const SyntheticScene scene = make_scene(small_spec(seed));
    const PlaneVolume& vol = scene.volume;
    // Pixel is foreground when the first occupied voxel of its column is labeled foreground.
    Mask gt(vol.width(), vol.height(), 1, 0);
    for (int y = 0; y < vol.height(); ++y)
      for (int x = 0; x < vol.width(); ++x)
        for (int d = 0; d < vol.depth(); ++d) {
          const std::size_t i = vol.index(x, y, d);
          if (vol.xi(i) > 0.0f) {
            gt.at(x, y) = scene.gt_labels[i];
            break;
          }
        }
    const Mask rendered = selection_mask(vol, scene.cameras[0], scene.gt_labels);
    CHECK(mask_metrics(rendered, gt).iou >= 0.99);
    const Mask visible = visible_label_mask(vol, scene.gt_labels, 1);
    for (std::size_t i = 0; i < visible.data.size(); ++i) CHECK(visible.data[i] <= rendered.data[i]);
  }
}

TEST_CASE("automatic scribbles") {
  const SyntheticScene scene = make_scene(default_scene_spec(5));
  const ScribbleSet s = auto_scribbles(scene, 2, 4, 9);
  CHECK(s.fg_strokes.size() == 2);
  CHECK(s.bg_strokes.size() == 4);
  CHECK(s.reference_view == 0);
  const ScribblePixels px = rasterize_scribbles(s, scene.spec.width, scene.spec.height);
  const Mask fg = visible_label_mask(scene.volume, scene.gt_labels, 1);
  const Mask bg = visible_label_mask(scene.volume, scene.gt_labels, 0);
  for (const auto& p : px.fg) CHECK(fg.at(p.x, p.y) == 1);
  for (const auto& p : px.bg) CHECK(bg.at(p.x, p.y) == 1);

  CHECK(scribble_hash(auto_scribbles(scene, 2, 4, 9)) == scribble_hash(s));
  CHECK(scribble_hash(auto_scribbles(scene, 2, 4, 10)) != scribble_hash(s));

  const LabeledVoxels lifted = lift_pixels(scene.volume, px);
  std::size_t fg_total = 0, fg_hit = 0;
  for (const auto& e : lifted.entries) {
    if (e.label != 1) continue;
    ++fg_total;
    fg_hit += scene.gt_labels[e.voxel];
  }
  REQUIRE(fg_total > 0);
  CHECK(static_cast<double>(fg_hit) / fg_total >= 0.99);

  CHECK_THROWS_AS(auto_scribbles(scene, 2, 4, 9, 40), Error);
}

TEST_CASE("mask erosion") {
  Mask m(9, 9, 1, 0);
  for (int y = 2; y <= 6; ++y)
    for (int x = 2; x <= 6; ++x) m.at(x, y) = 1;
  const Mask e = erode(m, 1);
  std::size_t count = 0;
  for (auto v : e.data) count += v;
  CHECK(count == 9);
  CHECK(e.at(4, 4) == 1);
  CHECK(e.at(2, 2) == 0);
  CHECK(erode(m, 0).data == m.data);
}
