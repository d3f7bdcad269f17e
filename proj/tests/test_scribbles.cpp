#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "support.hpp"
#include "voxsel/scribbles.hpp"

using namespace voxsel;
using voxsel::test::make_camera;
using voxsel::test::uniform_volume;

TEST_CASE("bresenham lines") {
  CHECK(bresenham_line({2, 3}, {2, 3}) == std::vector<Pixel>{{2, 3}});
  const auto diag = bresenham_line({0, 0}, {4, 4});
  CHECK(diag.size() == 5);
  CHECK(diag.back() == Pixel{4, 4});
  const auto shallow = bresenham_line({7, 1}, {0, 3});
  CHECK(shallow.size() == 8);
  CHECK(shallow.front() == Pixel{7, 1});
  CHECK(shallow.back() == Pixel{0, 3});
  for (std::size_t i = 1; i < shallow.size(); ++i) {
    CHECK(std::abs(shallow[i].x - shallow[i - 1].x) <= 1);
    CHECK(std::abs(shallow[i].y - shallow[i - 1].y) <= 1);
  }
}

TEST_CASE("scribble rasterization") {
  SUBCASE("single point with radius 0") {
    const auto px = rasterize_scribbles({{{{5, 5}}}, {}, 0}, 20, 20, 0);
    CHECK(px.fg == std::vector<Pixel>{{5, 5}});
    CHECK(px.bg.empty());
  }
  SUBCASE("horizontal segment with radius 0") {
    const auto px = rasterize_scribbles({{}, {{{0, 4}, {9, 4}}}, 0}, 20, 20, 0);
    CHECK(px.bg.size() == 10);
  }
  SUBCASE("disk of radius 2 has 13 pixels") {
    const auto px = rasterize_scribbles({{{{10, 10}}}, {}, 0}, 20, 20, 2);
    CHECK(px.fg.size() == 13);
    CHECK(std::is_sorted(px.fg.begin(), px.fg.end()));
  }
  SUBCASE("disk is clipped at the border") {
    const auto px = rasterize_scribbles({{{{0, 0}}}, {}, 0}, 20, 20, 2);
    CHECK(px.fg.size() == 6);
  }
  SUBCASE("overlapping classes are rejected") {
    const ScribbleSet s{{{{3, 3}, {8, 3}}}, {{{5, 0}, {5, 6}}}, 0};
    try {
      rasterize_scribbles(s, 20, 20, 0);
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Overlap);
      CHECK(std::string(e.what()).find("(5,3)") != std::string::npos);
    }
  }
  SUBCASE("vertices outside the image are rejected") {
    CHECK_THROWS_AS(rasterize_scribbles({{{{25, 3}}}, {}, 0}, 20, 20, 0), Error);
    CHECK_THROWS_AS(rasterize_scribbles({{{{3, 3}}}, {}, 0}, 20, 20, -1), Error);
  }
}

TEST_CASE("lifting onto a sphere") {
  PlaneVolume vol = uniform_volume(40, 40, 48, 0.0f, {0.5f, 0.5f, 0.5f}, PlaneSpacing::Linear, 2.0, 6.0, 40);
  const Eigen::Vector3d center(0, 0, 4);
  const double radius = 1.0;
  for (std::size_t i = 0; i < vol.voxel_count(); ++i) {
    if ((vol.position(vol.unravel(i)) - center).norm() <= radius) vol.voxel(i)[0] = 1.0f;
  }
  const double spacing = (6.0 - 2.0) / 47;

  ScribblePixels px;
  for (int y = 14; y <= 26; y += 2)
    for (int x = 14; x <= 26; x += 2) px.fg.push_back({x, y});
  px.bg.push_back({1, 1});
  const LabeledVoxels lv = lift_pixels(vol, px);
  CHECK(lv.dropped_no_surface == 1);
  CHECK(lv.count(1) == px.fg.size());
  CHECK(lv.count(0) == 0);
  for (const auto& e : lv.entries) {
    const Ray ray = pixel_ray(vol.ref_cam(), e.source.x, e.source.y);
    const double b = ray.direction.dot(ray.origin - center);
    const double c = (ray.origin - center).squaredNorm() - radius * radius;
    const double s = -b - std::sqrt(b * b - c);
    const double z_true = (ray.origin + s * ray.direction).z();
    const double z_lift = vol.planes().depths[static_cast<std::size_t>(vol.unravel(e.voxel).d)];
    CHECK(std::abs(z_lift - z_true) <= spacing + 1e-9);
  }
  CHECK(std::is_sorted(lv.entries.begin(), lv.entries.end(),
                       [](const LabeledVoxel& a, const LabeledVoxel& b) { return a.voxel < b.voxel; }));

  SUBCASE("projecting back into the reference view") {
    const ScribblePixels back = project_labeled_voxels(lv, vol, vol.ref_cam());
    CHECK(back.fg.size() == lv.count(1));
    for (const auto& e : lv.entries) {
      CHECK(std::binary_search(back.fg.begin(), back.fg.end(), e.source));
    }
  }
  SUBCASE("voxels behind the target camera are dropped") {
    Camera behind = make_camera(40, 40, 40, {0, 0, 20});
    CHECK(project_labeled_voxels(lv, vol, behind).fg.empty());
  }
  SUBCASE("conflicting classes on one voxel drop it") {
    ScribblePixels both;
    both.fg = {{20, 20}};
    both.bg = {{20, 20}, {18, 18}};
    const LabeledVoxels c = lift_pixels(vol, both);
    CHECK(c.dropped_conflict == 1);
    CHECK(c.entries.size() == 1);
    CHECK(c.entries[0].label == 0);
  }
  SUBCASE("nothing to lift is an error") {
    ScribblePixels empty;
    empty.fg = {{0, 0}};
    CHECK_THROWS_AS(lift_pixels(vol, empty), Error);
  }
  SUBCASE("scribbles on another view are rejected") {
    CHECK_THROWS_AS(lift_scribbles(vol, {{{{20, 20}}}, {}, 2}), Error);
  }
}

TEST_CASE("distance fields") {
  const PlaneVolume vol = uniform_volume(10, 10, 10, 0.0f, {0.5f, 0.5f, 0.5f}, PlaneSpacing::InverseDepth, 1.0, 3.0, 10);
  const double diag = scene_diagonal(vol);
  double brute_diag = 0;
  for (std::size_t i = 0; i < vol.voxel_count(); i += 37)
    for (std::size_t j = 0; j < vol.voxel_count(); j += 41)
      brute_diag = std::max(brute_diag, (vol.position(vol.unravel(i)) - vol.position(vol.unravel(j))).norm());
  CHECK(diag >= brute_diag);

  SUBCASE("matches brute force") {
    Rng rng(4);
    std::vector<std::size_t> set;
    for (int k = 0; k < 25; ++k) set.push_back(static_cast<std::size_t>(uniform_int(rng, 0, 999)));
    const auto d = distance_field(vol, set);
    REQUIRE(d.size() == vol.voxel_count());
    for (std::size_t q = 0; q < vol.voxel_count(); ++q) {
      double best = 1e300;
      for (std::size_t s : set) best = std::min(best, (vol.position(vol.unravel(q)) - vol.position(vol.unravel(s))).norm());
      REQUIRE(d[q] == doctest::Approx(best / diag).epsilon(1e-12));
    }
    for (std::size_t s : set) CHECK(d[s] == 0.0);
    const auto a = vol.index(0, 0, 0), b = vol.index(9, 9, 9);
    const auto lipschitz = [&](std::size_t p, std::size_t q) {
      return d[p] <= d[q] + (vol.position(vol.unravel(p)) - vol.position(vol.unravel(q))).norm() / diag + 1e-12;
    };
    CHECK(lipschitz(a, b));
    CHECK(lipschitz(b, a));
  }
  SUBCASE("queries subset") {
    const std::vector<std::size_t> set{0}, queries{0, 999};
    const auto d = distance_field(vol, set, queries);
    CHECK(d[0] == 0.0);
    CHECK(d[1] <= 1.0);
    CHECK(d[1] > 0.5);
  }
  SUBCASE("point sets") {
    const std::vector<Eigen::Vector3d> pts{{0, 0, 0}, {3, 0, 0}}, qs{{1, 0, 0}, {3, 4, 0}};
    const auto d = distance_to_points(pts, qs, 2.0);
    CHECK(d[0] == doctest::Approx(0.5));
    CHECK(d[1] == doctest::Approx(2.0));
    CHECK_THROWS_AS(distance_to_points({}, qs, 1.0), Error);
  }
}
