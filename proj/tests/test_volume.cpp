#include <doctest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "voxsel/volume.hpp"

using namespace voxsel;
using voxsel::test::make_camera;
using voxsel::test::rotation;
using voxsel::test::uniform_volume;

namespace {

void set_voxel(PlaneVolume& vol, std::size_t i, float xi, Eigen::Vector3f rgb) {
  auto v = vol.voxel(i);
  v[0] = xi;
  v[1] = rgb.x();
  v[2] = rgb.y();
  v[3] = rgb.z();
}

PlaneVolume random_volume(Rng& rng, int w, int h, int d, BasisKind basis = BasisKind::Constant) {
  PlaneVolume vol(make_camera(w, h, w), DepthPlaneSet::make(1, 5, d, PlaneSpacing::InverseDepth), basis);
  for (std::size_t i = 0; i < vol.voxel_count(); ++i) {
    auto v = vol.voxel(i);
    v[0] = static_cast<float>(uniform01(rng) < 0.7 ? 0.0 : uniform01(rng));
    for (std::size_t k = 1; k < v.size(); ++k) v[k] = static_cast<float>(uniform(rng, -0.3, 1.3));
  }
  return vol;
}

}  // namespace

TEST_CASE("basis colors") {
  const std::vector<float> constant{0.2f, 0.4f, 0.6f};
  const Eigen::Vector3d c = basis_color(constant, BasisKind::Constant, Eigen::Vector3d(0.6, 0, 0.8));
  CHECK((c - Eigen::Vector3d(0.2f, 0.4f, 0.6f)).norm() < 1e-12);
  CHECK(basis_size(BasisKind::Constant) == 1);
  CHECK(basis_size(BasisKind::ShDegree1) == 4);

  std::vector<float> sh(12, 0.0f);
  sh[0] = 0.2f, sh[1] = 0.4f, sh[2] = 0.6f;
  const Eigen::Vector3d d = Eigen::Vector3d(0.3, -0.5, 0.8).normalized();
  CHECK((basis_color(sh, BasisKind::ShDegree1, d) - c).norm() < 1e-12);

  sh[3] = 0.1f, sh[4] = -0.2f, sh[5] = 0.05f;  // first degree-1 function, proportional to d.y
  const double h = std::sqrt(3.0 / (4.0 * std::numbers::pi)) * d.y();
  const Eigen::Vector3d diff = evaluate_basis(sh, BasisKind::ShDegree1, d) - evaluate_basis(sh, BasisKind::ShDegree1, -d);
  CHECK((diff - 2.0 * h * Eigen::Vector3d(0.1f, -0.2f, 0.05f)).norm() < 1e-12);

  CHECK_THROWS_AS(basis_color(constant, BasisKind::Constant, Eigen::Vector3d(1, 1, 0)), Error);
}

TEST_CASE("voxel indexing and positions") {
  const PlaneVolume vol = uniform_volume(6, 4, 3, 0.0f);
  CHECK(vol.voxel_count() == 72);
  CHECK(vol.stride() == 4);
  for (std::size_t i = 0; i < vol.voxel_count(); ++i) CHECK(vol.index(vol.unravel(i)) == i);
  const Eigen::Vector3d p = vol.position(2, 1, 2);
  const Projection pr = project_point(vol.ref_cam(), p);
  CHECK(pr.u == doctest::Approx(2.0));
  CHECK(pr.v == doctest::Approx(1.0));
  CHECK(pr.depth == doctest::Approx(vol.planes().depths[2]));
}

TEST_CASE("rendering identities") {
  SUBCASE("opaque front plane") {
    PlaneVolume vol = uniform_volume(8, 6, 4, 0.3f, {0.9f, 0.1f, 0.1f});
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 8; ++x) set_voxel(vol, vol.index(x, y, 0), 1.0f, {0.2f, 0.4f, 0.6f});
    const RenderedView rv = render_view(vol, vol.ref_cam());
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 8; ++x) {
        CHECK(rv.alpha.at(x, y) == 1.0f);
        CHECK(rv.rgb.at(x, y, 0) == 0.2f);
        CHECK(rv.rgb.at(x, y, 1) == 0.4f);
        CHECK(rv.rgb.at(x, y, 2) == 0.6f);
      }
  }
  SUBCASE("empty volume") {
    const PlaneVolume vol = uniform_volume(8, 6, 4, 0.0f);
    const RenderedView rv = render_view(vol, make_camera(10, 7, 9, {0.1, 0, 0}));
    CHECK(std::all_of(rv.rgb.data.begin(), rv.rgb.data.end(), [](float v) { return v == 0.0f; }));
    CHECK(std::all_of(rv.alpha.data.begin(), rv.alpha.data.end(), [](float v) { return v == 0.0f; }));
  }
  SUBCASE("two-plane compositing") {
    PlaneVolume vol = uniform_volume(4, 4, 2, 0.0f);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) {
        set_voxel(vol, vol.index(x, y, 0), 0.5f, {1, 0, 0});
        set_voxel(vol, vol.index(x, y, 1), 1.0f, {0, 0, 1});
      }
    const RenderedView rv = render_view(vol, vol.ref_cam());
    CHECK(rv.rgb.at(1, 2, 0) == doctest::Approx(0.5));
    CHECK(rv.rgb.at(1, 2, 1) == doctest::Approx(0.0));
    CHECK(rv.rgb.at(1, 2, 2) == doctest::Approx(0.5));
    CHECK(rv.alpha.at(1, 2) == doctest::Approx(1.0));
  }
}

TEST_CASE("random volumes render inside [0,1]; a full selection changes nothing") {
  Rng rng(4);
  for (auto basis : {BasisKind::Constant, BasisKind::ShDegree1}) {
    const PlaneVolume vol = random_volume(rng, 12, 9, 6, basis);
    const Camera cam = make_camera(14, 10, 12, {0.2, -0.1, 0.05}, rotation(0.05, -0.1, 0.02));
    const RenderedView rv = render_view(vol, cam);
    for (float v : rv.rgb.data) CHECK((v >= 0.0f && v <= 1.0f));
    for (float v : rv.alpha.data) CHECK((v >= 0.0f && v <= 1.0f));
    const std::vector<std::uint8_t> all(vol.voxel_count(), 1);
    const RenderedView sel = render_view(vol, cam, all);
    CHECK(sel.rgb.data == rv.rgb.data);
    CHECK(sel.alpha.data == rv.alpha.data);
  }
}

TEST_CASE("transmittance walk") {
  Rng rng(9);
  const PlaneVolume vol = random_volume(rng, 10, 8, 12);
  for (int k = 0; k < 30; ++k) {
    const Ray ray = pixel_ray(vol.ref_cam(), uniform(rng, 0, 9), uniform(rng, 0, 7));
    const auto walk = transmittance_walk(vol, ray);
    REQUIRE(walk.size() == 12);
    double prev = 1.0, opacity = 0.0;
    for (const auto& s : walk) {
      CHECK(s.transmittance <= prev);
      const double xi = vol.xi(vol.index(s.voxel));
      opacity += xi * prev;
      prev = s.transmittance;
    }
    CHECK(std::abs(opacity + prev - 1.0) < 1e-9);
  }
}

TEST_CASE("surface voxel") {
  SUBCASE("uniform transparency") {
    const PlaneVolume vol = uniform_volume(4, 4, 32, 0.2f);
    const auto s = surface_voxel(vol, pixel_ray(vol.ref_cam(), 1, 1), 0.01);
    REQUIRE(s);
    CHECK(s->d == 20);
    CHECK(std::pow(0.8, 21) < 0.01);
    CHECK(std::pow(0.8, 20) >= 0.01);
  }
  SUBCASE("single opaque plane") {
    PlaneVolume vol = uniform_volume(4, 4, 10, 0.0f);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) set_voxel(vol, vol.index(x, y, 5), 1.0f, {1, 1, 1});
    const auto s = surface_voxel(vol, pixel_ray(vol.ref_cam(), 2, 3));
    REQUIRE(s);
    CHECK(*s == VoxelIndex{2, 3, 5});
  }
  SUBCASE("empty ray") {
    const PlaneVolume vol = uniform_volume(4, 4, 10, 0.0f);
    CHECK_FALSE(surface_voxel(vol, pixel_ray(vol.ref_cam(), 2, 3)).has_value());
    CHECK_THROWS_AS(surface_voxel(vol, pixel_ray(vol.ref_cam(), 2, 3), 0.0), Error);
  }
}

TEST_CASE("downsampling") {
  Rng rng(12);
  SUBCASE("factor 1 keeping every plane is the identity") {
    const PlaneVolume vol = random_volume(rng, 10, 8, 6);
    const std::vector<int> keep{0, 1, 2, 3, 4, 5};
    const auto ds = downsample_volume(vol, 1, 6, keep);
    CHECK(ds.volume.raw() == vol.raw());
    CHECK(ds.volume.planes().depths == vol.planes().depths);
  }
  SUBCASE("constant volumes stay constant") {
    const PlaneVolume vol = uniform_volume(9, 7, 12, 0.4f, {0.1f, 0.7f, 0.3f});
    const std::vector<int> keep{2, 3, 4, 5, 6, 7, 8, 9};
    const auto ds = downsample_volume(vol, 2, 5, keep);
    CHECK(ds.volume.width() == 5);
    CHECK(ds.volume.height() == 4);
    CHECK(ds.volume.depth() == 5);
    for (std::size_t i = 0; i < ds.volume.voxel_count(); ++i) {
      const auto v = ds.volume.voxel(i);
      CHECK(v[0] == doctest::Approx(0.4f));
      CHECK(v[2] == doctest::Approx(0.7f));
    }
    CHECK(ds.volume.planes().depths.front() == doctest::Approx(vol.planes().depths[2]));
    CHECK(ds.volume.planes().depths.back() == doctest::Approx(vol.planes().depths[9]));
  }
  SUBCASE("mapping round trip") {
    const std::vector<int> keep{3, 4, 5, 6};
    const PlaneResampling map = make_resampling(8, 6, 10, 2, 4, keep);
    CHECK(map.coarse_count() == 4u * 3 * 4);
    CHECK_FALSE(map.coarse_of(0, 0, 0).has_value());
    CHECK(map.coarse_of(5, 3, 4) == map.coarse_index(2, 1, 1));
    std::vector<std::uint8_t> coarse(map.coarse_count(), 1);
    const auto fine = upsample_labels(map, coarse);
    for (int d = 0; d < 10; ++d) {
      const bool kept = d >= 3 && d <= 6;
      CHECK(fine[static_cast<std::size_t>(d) * 48] == (kept ? 1 : 0));
    }
    CHECK_THROWS_AS(make_resampling(8, 6, 10, 2, 5, keep), Error);
    CHECK_THROWS_AS(make_resampling(8, 6, 10, 0, 2, keep), Error);
  }
}

TEST_CASE("volume validation") {
  PlaneVolume vol = uniform_volume(4, 4, 3, 0.5f);
  CHECK_NOTHROW(vol.validate());
  vol.raw()[0] = 1.5f;
  CHECK_THROWS_AS(vol.validate(), Error);
}
