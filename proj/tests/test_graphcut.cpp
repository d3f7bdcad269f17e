#include <doctest.h>

#include <cmath>
#include <limits>

#include "support.hpp"
#include "voxsel/graphcut.hpp"

using namespace voxsel;
using voxsel::test::uniform_volume;

namespace {

GraphCutProblem random_grid_problem(Rng& rng, int w, int h) {
  GraphCutProblem pr;
  pr.nodes = static_cast<std::size_t>(w * h);
  for (std::size_t i = 0; i < pr.nodes; ++i) {
    pr.cost0.push_back(uniform(rng, 0, 2));
    pr.cost1.push_back(uniform(rng, 0, 2));
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto p = static_cast<std::uint32_t>(y * w + x);
      if (x + 1 < w) pr.edges.push_back({p, p + 1, uniform(rng, 0, 1.5)});
      if (y + 1 < h) pr.edges.push_back({p, p + static_cast<std::uint32_t>(w), uniform(rng, 0, 1.5)});
    }
  if (uniform01(rng) < 0.5) pr.forced1.push_back(0);
  if (uniform01(rng) < 0.5 && pr.nodes > 1) pr.forced0.push_back(pr.nodes - 1);
  return pr;
}

double brute_force_energy(const GraphCutProblem& pr) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::uint8_t> labels(pr.nodes);
  for (unsigned mask = 0; mask < (1u << pr.nodes); ++mask) {
    for (std::size_t i = 0; i < pr.nodes; ++i) labels[i] = mask >> i & 1;
    best = std::min(best, evaluate_energy(pr, labels));
  }
  return best;
}

struct GridInputs {
  std::vector<Eigen::Vector3d> positions;
  std::vector<float> fg, bg, appearance;
  std::vector<double> dfg, dbg;
  EnergyInputs in;
};

GridInputs line_inputs(int n, int appearance_width) {
  GridInputs g;
  for (int i = 0; i < n; ++i) g.positions.emplace_back(i * 0.5, 0, 0);
  g.fg.assign(n, 0.5f);
  g.bg.assign(n, 0.5f);
  g.dfg.assign(n, 0.0);
  g.dbg.assign(n, 0.0);
  g.appearance.assign(static_cast<std::size_t>(n * appearance_width), 0.0f);
  g.in.width = n;
  g.in.height = 1;
  g.in.depth = 1;
  g.in.appearance_width = appearance_width;
  return g;
}

void bind(GridInputs& g) {
  g.in.positions = g.positions;
  g.in.fg_cost = g.fg;
  g.in.bg_cost = g.bg;
  g.in.dist_fg = g.dfg;
  g.in.dist_bg = g.dbg;
  g.in.appearance = g.appearance;
}

}  // namespace

TEST_CASE("min-cut on tiny problems") {
  SUBCASE("single node") {
    GraphCutProblem pr;
    pr.nodes = 1;
    pr.cost0 = {1};
    pr.cost1 = {3};
    const CutResult r = min_cut(pr);
    CHECK(r.labels == std::vector<std::uint8_t>{0});
    CHECK(r.energy == 1);
    CHECK(r.energy == doctest::Approx(r.constant + r.flow));
  }
  SUBCASE("strong edge forces a joint label") {
    GraphCutProblem pr;
    pr.nodes = 2;
    pr.cost0 = {0, 3};
    pr.cost1 = {2, 0};
    pr.edges = {{0, 1, 100}};
    const CutResult r = min_cut(pr);
    CHECK(r.labels == std::vector<std::uint8_t>{1, 1});
    CHECK(r.energy == 2);
  }
  SUBCASE("hard constraints override unaries") {
    GraphCutProblem pr;
    pr.nodes = 2;
    pr.cost0 = {0, 5};
    pr.cost1 = {5, 0};
    pr.forced1 = {0};
    pr.forced0 = {1};
    const CutResult r = min_cut(pr);
    CHECK(r.labels == std::vector<std::uint8_t>{1, 0});
    CHECK(r.energy == 10);
    const std::vector<std::uint8_t> violating{0, 0};
    CHECK(std::isinf(evaluate_energy(pr, violating)));
  }
  SUBCASE("contradicting constraints are infeasible") {
    GraphCutProblem pr;
    pr.nodes = 1;
    pr.cost0 = {0};
    pr.cost1 = {0};
    pr.forced0 = {0};
    pr.forced1 = {0};
    try {
      min_cut(pr);
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Infeasible);
    }
  }
  SUBCASE("invalid problems are rejected") {
    GraphCutProblem pr;
    pr.nodes = 2;
    pr.cost0 = {0, 0};
    pr.cost1 = {0, -1};
    CHECK_THROWS_AS(min_cut(pr), Error);
    pr.cost1 = {0, 0};
    pr.edges = {{0, 1, -0.5}};
    CHECK_THROWS_AS(min_cut(pr), Error);
  }
}

TEST_CASE("min-cut is the global minimizer on random grids") {
  Rng rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const int w = uniform_int(rng, 1, 4), h = uniform_int(rng, 1, 3);
    const GraphCutProblem pr = random_grid_problem(rng, w, h);
    const CutResult r = min_cut(pr);
    REQUIRE(std::abs(r.energy - brute_force_energy(pr)) < 1e-9);
    REQUIRE(std::abs(r.energy - (r.constant + r.flow)) < 1e-9);
    for (auto v : pr.forced1) REQUIRE(r.labels[v] == 1);
    for (auto v : pr.forced0) REQUIRE(r.labels[v] == 0);
  }
}

TEST_CASE("problem dump") {
  GraphCutProblem pr;
  pr.nodes = 2;
  pr.cost0 = {0.5, 1};
  pr.cost1 = {1, 0.25};
  pr.edges = {{0, 1, 0.125}};
  pr.forced1 = {1};
  CHECK(dump_problem(pr) == "nodes 2\nunary 0 0.5 1\nunary 1 1 0.25\nedge 0 1 0.125\nforce 1 1\n");
}

TEST_CASE("energy construction") {
  GraphCutParams params;
  CHECK(params.w1 == 1);
  CHECK(params.w2 == 10);
  CHECK(params.alpha == 0.1);
  CHECK(params.sigma == 1);

  SUBCASE("unary terms") {
    GridInputs g = line_inputs(2, 1);
    std::vector<float> fg, bg;
    classifier_costs(std::vector<float>{0.9f, 0.2f}, fg, bg);
    g.fg = fg;
    g.bg = bg;
    g.dfg = {0.05, 0.3};
    g.dbg = {0.4, 0.0};
    bind(g);
    const GraphCutProblem pr = build_energy(g.in, params);
    CHECK(pr.cost1[0] == doctest::Approx(0.6).epsilon(1e-6));
    CHECK(pr.cost0[0] == doctest::Approx(4.9).epsilon(1e-6));
    CHECK(pr.cost1[1] == doctest::Approx(0.8 + 3.0).epsilon(1e-6));
    CHECK(pr.cost0[1] == doctest::Approx(0.2).epsilon(1e-6));
  }
  SUBCASE("pairwise weights") {
    GridInputs g = line_inputs(3, 2);
    g.appearance = {0, 0, 0, 0, 1, 1};
    bind(g);
    const GraphCutProblem pr = build_energy(g.in, params);
    REQUIRE(pr.edges.size() == 2);
    CHECK(in_plane_spacing(g.in) == doctest::Approx(0.5));
    CHECK(pr.edges[0].weight == doctest::Approx(0.1));
    CHECK(pr.edges[1].weight == doctest::Approx(0.1 * std::exp(-2.0)));
    params.alpha = 0;
    for (const auto& e : build_energy(g.in, params).edges) CHECK(e.weight == 0);
  }
  SUBCASE("6-connected neighborhood") {
    const int w = 3, h = 2, d = 2;
    GridInputs g = line_inputs(w * h * d, 1);
    for (int k = 0; k < d; ++k)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) g.positions[static_cast<std::size_t>((k * h + y) * w + x)] = {x * 1.0, y * 1.0, k * 2.0};
    g.in.width = w;
    g.in.height = h;
    g.in.depth = d;
    bind(g);
    const GraphCutProblem pr = build_energy(g.in, params);
    CHECK(pr.edges.size() == static_cast<std::size_t>((w - 1) * h * d + w * (h - 1) * d + w * h * (d - 1)));
    for (const auto& e : pr.edges) {
      const double expected = (e.q - e.p == static_cast<std::uint32_t>(w * h)) ? 0.05 : 0.1;
      CHECK(e.weight == doctest::Approx(expected));
    }
  }
  SUBCASE("mismatched grids are rejected") {
    GridInputs g = line_inputs(3, 1);
    bind(g);
    g.in.width = 4;
    CHECK_THROWS_AS(build_energy(g.in, params), Error);
    params.sigma = 0;
    g.in.width = 3;
    CHECK_THROWS_AS(build_energy(g.in, params), Error);
  }
}

TEST_CASE("post-processing on a plane volume") {
  PlaneVolume vol = uniform_volume(16, 16, 8, 0.0f, {0.5f, 0.5f, 0.5f}, PlaneSpacing::Linear, 1.0, 3.0, 16);
  const FeatureVolume fv = assemble_features(vol, nullptr, {false, true, true});
  std::vector<float> prob(vol.voxel_count(), 0.05f);
  auto block = [&](int x0, int x1, int y0, int y1, int d0, int d1, float p) {
    for (int d = d0; d <= d1; ++d)
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) prob[vol.index(x, y, d)] = p;
  };
  block(2, 7, 2, 7, 1, 3, 0.9f);     // object next to the fg scribbles
  block(12, 13, 12, 13, 6, 6, 0.6f);  // isolated blob next to the bg scribbles
  LabeledVoxels lifted;
  for (int x = 3; x <= 6; ++x) lifted.entries.push_back({vol.index(x, 4, 2), 1, {x, 4}});
  for (int x = 10; x <= 15; ++x) lifted.entries.push_back({vol.index(x, 14, 6), 0, {x, 14}});
  std::sort(lifted.entries.begin(), lifted.entries.end(),
            [](const LabeledVoxel& a, const LabeledVoxel& b) { return a.voxel < b.voxel; });

  GraphCutParams params;
  const RefineResult r = postprocess(vol, prob, lifted, fv, params);
  REQUIRE(r.labels.size() == vol.voxel_count());
  CHECK(r.kept_planes == std::vector<int>{1, 2, 3, 4, 5, 6});
  CHECK(r.mapping.factor == 2);
  CHECK(r.coarse.width() == 8);

  std::size_t object = 0, blob = 0, outside_kept = 0;
  for (int d = 0; d < 8; ++d)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        const bool fg = r.labels[vol.index(x, y, d)] != 0;
        if (x >= 2 && x <= 7 && y >= 2 && y <= 7 && d >= 1 && d <= 3) object += fg;
        if (x >= 12 && x <= 13 && y >= 12 && y <= 13 && d == 6) blob += fg;
        if (d == 0 || d == 7) outside_kept += fg;
      }
  CHECK(object == 6 * 6 * 3);
  CHECK(blob == 0);
  CHECK(outside_kept == 0);
  for (const auto& e : lifted.entries) CHECK(r.labels[e.voxel] == e.label);

  // The solution is no worse than simple alternatives on the coarse problem.
  const std::size_t cn = r.problem.nodes;
  std::vector<std::uint8_t> all0(cn, 0), all1(cn, 1), thresholded(cn);
  for (std::size_t i = 0; i < cn; ++i) thresholded[i] = r.coarse_fg_cost[i] < 0.5f;
  for (auto v : r.problem.forced1) all0[v] = thresholded[v] = 1;
  for (auto v : r.problem.forced0) all1[v] = thresholded[v] = 0;
  for (const auto* l : {&all0, &all1, &thresholded}) CHECK(r.cut.energy <= evaluate_energy(r.problem, *l) + 1e-9);

  SUBCASE("nothing to refine") {
    std::vector<float> none(vol.voxel_count(), 0.0f);
    LabeledVoxels bg_only;
    bg_only.entries.push_back({0, 0, {0, 0}});
    CHECK_THROWS_AS(postprocess(vol, none, bg_only, fv, params), Error);
  }
  SUBCASE("at most max_planes coarse planes") {
    GraphCutParams few = params;
    few.max_planes = 3;
    const RefineResult t = postprocess(vol, prob, lifted, fv, few);
    CHECK(t.coarse.depth() == 3);
  }
}

TEST_CASE("feature-distance unary of the 3D baseline") {
  Rng rng(6);
  PlaneVolume vol = uniform_volume(10, 10, 10, 0.5f);
  for (std::size_t i = 0; i < vol.voxel_count(); ++i)
    for (int c = 1; c < 4; ++c) vol.voxel(i)[static_cast<std::size_t>(c)] = static_cast<float>(uniform01(rng));
  const FeatureVolume fv = assemble_features(vol, nullptr);
  LabeledVoxels lifted;
  for (std::size_t i = 0; i < vol.voxel_count(); i += 97) lifted.entries.push_back({i, static_cast<std::uint8_t>(i % 2), {}});
  std::vector<float> fg, bg;
  ibr_scribble_costs(fv, lifted, fg, bg);

  auto brute = [&](std::size_t p, std::uint8_t label) {
    double best = 1e300;
    for (const auto& e : lifted.entries) {
      if (e.label != label) continue;
      double s = 0;
      for (int c = 0; c < 4; ++c) {
        const double dv = fv.at(p)[static_cast<std::size_t>(fv.layout.ibr_offset + c)] -
                          fv.at(e.voxel)[static_cast<std::size_t>(fv.layout.ibr_offset + c)];
        s += dv * dv;
      }
      best = std::min(best, std::sqrt(s));
    }
    return best;
  };
  double mx = 0;
  std::vector<double> bf(vol.voxel_count()), bb(vol.voxel_count());
  for (std::size_t p = 0; p < vol.voxel_count(); ++p) {
    bf[p] = brute(p, 1);
    bb[p] = brute(p, 0);
    mx = std::max({mx, bf[p], bb[p]});
  }
  for (std::size_t p = 0; p < vol.voxel_count(); ++p) {
    REQUIRE(fg[p] == doctest::Approx(bf[p] / mx).epsilon(1e-5));
    REQUIRE(bg[p] == doctest::Approx(bb[p] / mx).epsilon(1e-5));
  }
  for (const auto& e : lifted.entries) CHECK((e.label ? fg[e.voxel] : bg[e.voxel]) == 0.0f);
}

TEST_CASE("k-means") {
  std::vector<Eigen::Vector3d> pts;
  Rng rng(3);
  for (int i = 0; i < 50; ++i) pts.emplace_back(uniform(rng, 0, 0.1), uniform(rng, 0, 0.1), 0);
  for (int i = 0; i < 50; ++i) pts.emplace_back(5 + uniform(rng, 0, 0.1), 5, uniform(rng, 0, 0.1));
  const KMeansResult a = kmeans(pts, 2, 10, 4);
  REQUIRE(a.centers.size() == 2);
  const bool first_low = a.centers[0].x() < 1;
  CHECK((a.centers[first_low ? 0 : 1] - Eigen::Vector3d(0.05, 0.05, 0)).norm() < 0.05);
  CHECK((a.centers[first_low ? 1 : 0] - Eigen::Vector3d(5.05, 5, 0.05)).norm() < 0.05);
  const KMeansResult b = kmeans(pts, 2, 10, 4);
  CHECK(b.inertia == a.inertia);
  CHECK(kmeans(pts, 200, 1, 1).centers.size() == pts.size());
  CHECK(kmeans(pts, 200, 1, 1).inertia == 0.0);
  CHECK_THROWS_AS(kmeans(std::vector<Eigen::Vector3d>{}, 2, 1, 1), Error);
}

TEST_CASE("2D graph-cut baseline") {
  Image img(20, 12, 3);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 20; ++x) {
      const bool left = x < 8;
      img.at(x, y, 0) = left ? 0.9f : 0.1f;
      img.at(x, y, 1) = 0.2f;
      img.at(x, y, 2) = left ? 0.1f : 0.8f;
    }
  const std::vector<Pixel> fg{{2, 3}, {3, 3}}, bg{{15, 8}, {16, 8}};
  const Mask m = graphcut2d_baseline(img, fg, bg);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 20; ++x) REQUIRE((m.at(x, y) != 0) == (x < 8));

  SUBCASE("scribbles keep their class") {
    const std::vector<Pixel> odd_fg{{2, 3}, {15, 2}};
    const Mask o = graphcut2d_baseline(img, odd_fg, bg);
    CHECK(o.at(15, 2) != 0);
    CHECK(o.at(15, 8) == 0);
  }
  SUBCASE("empty class is rejected") {
    CHECK_THROWS_AS(graphcut2d_baseline(img, fg, std::vector<Pixel>{}), Error);
  }
}
