#include "voxsel/graphcut.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "voxsel/kdtree.hpp"
#include "voxsel/maxflow.hpp"

namespace voxsel {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void GraphCutParams::validate() const {
  if (!(sigma > 0.0)) fail(ErrorCode::InvalidArgument, "sigma must be > 0");
  if (!(alpha >= 0.0)) fail(ErrorCode::InvalidArgument, "alpha must be >= 0");
  if (!(w1 >= 0.0) || !(w2 >= 0.0)) fail(ErrorCode::InvalidArgument, "unary weights must be >= 0");
  if (downsample_xy < 1) fail(ErrorCode::InvalidArgument, "downsample_xy must be >= 1");
  if (max_planes < 1) fail(ErrorCode::InvalidArgument, "max_planes must be >= 1");
  if (!(fg_threshold > 0.0 && fg_threshold < 1.0)) {
    fail(ErrorCode::InvalidArgument, "fg_threshold must be in (0, 1)");
  }
}

void GraphCutProblem::validate() const {
  if (cost0.size() != nodes || cost1.size() != nodes) {
    fail(ErrorCode::ShapeMismatch, "unary arrays do not match the node count");
  }
  for (std::size_t i = 0; i < nodes; ++i) {
    if (!(cost0[i] >= 0.0) || !(cost1[i] >= 0.0) || std::isinf(cost0[i]) || std::isinf(cost1[i])) {
      fail(ErrorCode::InvalidArgument, "unary costs must be finite and non-negative");
    }
  }
  for (const auto& e : edges) {
    if (e.p >= nodes || e.q >= nodes || e.p == e.q) fail(ErrorCode::InvalidArgument, "bad edge");
    if (!(e.weight >= 0.0) || std::isinf(e.weight)) {
      fail(ErrorCode::InvalidArgument, "edge weights must be finite and non-negative");
    }
  }
  for (auto v : forced0)
    if (v >= nodes) fail(ErrorCode::InvalidArgument, "forced node out of range");
  for (auto v : forced1)
    if (v >= nodes) fail(ErrorCode::InvalidArgument, "forced node out of range");
}

double evaluate_energy(const GraphCutProblem& pr, std::span<const std::uint8_t> labels) {
  if (labels.size() != pr.nodes) fail(ErrorCode::ShapeMismatch, "label count mismatch");
  for (auto v : pr.forced0)
    if (labels[v] != 0) return kInf;
  for (auto v : pr.forced1)
    if (labels[v] != 1) return kInf;
  double e = 0.0;
  for (std::size_t i = 0; i < pr.nodes; ++i) e += labels[i] ? pr.cost1[i] : pr.cost0[i];
  for (const auto& edge : pr.edges) {
    if (labels[edge.p] != labels[edge.q]) e += edge.weight;
  }
  return e;
}

CutResult min_cut(const GraphCutProblem& pr) {
  pr.validate();
  std::vector<std::int8_t> forced(pr.nodes, -1);
  for (auto v : pr.forced1) forced[v] = 1;
  for (auto v : pr.forced0) {
    if (forced[v] == 1) {
      fail(ErrorCode::Infeasible, "node " + std::to_string(v) + " is forced to both labels");
    }
    forced[v] = 0;
  }
  MaxFlow g(pr.nodes);
  CutResult res;
  for (std::size_t i = 0; i < pr.nodes; ++i) {
    if (forced[i] == 1) {
      res.constant += pr.cost1[i];
      g.add_terminal(i, kInf, 0.0);
    } else if (forced[i] == 0) {
      res.constant += pr.cost0[i];
      g.add_terminal(i, 0.0, kInf);
    } else {
      const double m = std::min(pr.cost0[i], pr.cost1[i]);
      res.constant += m;
      g.add_terminal(i, pr.cost0[i] - m, pr.cost1[i] - m);
    }
  }
  for (const auto& e : pr.edges) g.add_edge(e.p, e.q, e.weight, e.weight);
  res.flow = g.solve();
  res.labels.resize(pr.nodes);
  for (std::size_t i = 0; i < pr.nodes; ++i) res.labels[i] = g.source_side(i) ? 1 : 0;
  res.energy = evaluate_energy(pr, res.labels);
  return res;
}

std::string dump_problem(const GraphCutProblem& pr) {
  std::ostringstream out;
  out.precision(17);
  out << "nodes " << pr.nodes << '\n';
  for (std::size_t i = 0; i < pr.nodes; ++i) {
    out << "unary " << i << ' ' << pr.cost0[i] << ' ' << pr.cost1[i] << '\n';
  }
  for (const auto& e : pr.edges) out << "edge " << e.p << ' ' << e.q << ' ' << e.weight << '\n';
  for (auto v : pr.forced0) out << "force " << v << " 0\n";
  for (auto v : pr.forced1) out << "force " << v << " 1\n";
  return out.str();
}

namespace {

void check_inputs(const EnergyInputs& in) {
  const std::size_t n = static_cast<std::size_t>(in.width) * in.height * in.depth;
  if (n == 0) fail(ErrorCode::EmptyInput, "empty grid");
  if (in.positions.size() != n || in.fg_cost.size() != n || in.bg_cost.size() != n ||
      in.dist_fg.size() != n || in.dist_bg.size() != n ||
      in.appearance.size() != n * static_cast<std::size_t>(in.appearance_width)) {
    fail(ErrorCode::ShapeMismatch, "energy inputs are not on the same grid");
  }
}

}  // namespace

double in_plane_spacing(const EnergyInputs& in) {
  double sum = 0.0;
  std::size_t count = 0;
  for (int d = 0; d < in.depth; ++d)
    for (int y = 0; y < in.height; ++y)
      for (int x = 0; x < in.width; ++x) {
        const std::size_t p = (static_cast<std::size_t>(d) * in.height + y) * in.width + x;
        if (x + 1 < in.width) {
          sum += (in.positions[p + 1] - in.positions[p]).norm();
          ++count;
        }
        if (y + 1 < in.height) {
          sum += (in.positions[p + static_cast<std::size_t>(in.width)] - in.positions[p]).norm();
          ++count;
        }
      }
  return count > 0 && sum > 0.0 ? sum / static_cast<double>(count) : 1.0;
}

GraphCutProblem build_energy(const EnergyInputs& in, const GraphCutParams& params) {
  params.validate();
  check_inputs(in);
  const std::size_t n = in.positions.size();
  GraphCutProblem pr;
  pr.nodes = n;
  pr.cost0.resize(n);
  pr.cost1.resize(n);
  for (std::size_t p = 0; p < n; ++p) {
    pr.cost1[p] = params.w1 * in.fg_cost[p] + params.w2 * in.dist_fg[p];
    pr.cost0[p] = params.w1 * in.bg_cost[p] + params.w2 * in.dist_bg[p];
  }
  const double unit = in_plane_spacing(in);
  const auto aw = static_cast<std::size_t>(in.appearance_width);
  auto weight = [&](std::size_t p, std::size_t q) {
    double diff2 = 0.0;
    for (std::size_t c = 0; c < aw; ++c) {
      const double dv = static_cast<double>(in.appearance[p * aw + c]) - in.appearance[q * aw + c];
      diff2 += dv * dv;
    }
    const double dist = (in.positions[p] - in.positions[q]).norm() / unit;
    return params.alpha * std::exp(-diff2 / params.sigma) / dist;
  };
  const auto W = static_cast<std::size_t>(in.width);
  const std::size_t plane = W * static_cast<std::size_t>(in.height);
  pr.edges.reserve(3 * n);
  for (int d = 0; d < in.depth; ++d)
    for (int y = 0; y < in.height; ++y)
      for (int x = 0; x < in.width; ++x) {
        const std::size_t p = (static_cast<std::size_t>(d) * in.height + y) * W + x;
        auto add = [&](std::size_t q) {
          pr.edges.push_back({static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(q), weight(p, q)});
        };
        if (x + 1 < in.width) add(p + 1);
        if (y + 1 < in.height) add(p + W);
        if (d + 1 < in.depth) add(p + plane);
      }
  pr.forced1.assign(in.forced_fg.begin(), in.forced_fg.end());
  pr.forced0.assign(in.forced_bg.begin(), in.forced_bg.end());
  return pr;
}

void classifier_costs(std::span<const float> prob, std::vector<float>& fg_cost,
                      std::vector<float>& bg_cost) {
  fg_cost.resize(prob.size());
  bg_cost.resize(prob.size());
  for (std::size_t i = 0; i < prob.size(); ++i) {
    fg_cost[i] = 1.0f - prob[i];
    bg_cost[i] = prob[i];
  }
}

RefineResult refine_on_coarse_grid(const PlaneVolume& vol, const FeatureVolume& fv,
                                   const LabeledVoxels& lifted, std::span<const float> fg_cost,
                                   std::span<const float> bg_cost,
                                   std::span<const std::uint8_t> fine_fg,
                                   const GraphCutParams& params) {
  params.validate();
  const std::size_t n = vol.voxel_count();
  if (fg_cost.size() != n || bg_cost.size() != n || fine_fg.size() != n ||
      fv.voxel_count() != n || fv.width != vol.width() || fv.height != vol.height()) {
    fail(ErrorCode::ShapeMismatch, "post-process inputs are not on the volume grid");
  }
  const std::size_t plane = static_cast<std::size_t>(vol.width()) * vol.height();
  int lo = vol.depth(), hi = -1;
  for (std::size_t i = 0; i < n; ++i) {
    if (fine_fg[i]) {
      const int d = static_cast<int>(i / plane);
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  }
  for (const auto& e : lifted.entries) {
    if (e.label == 1) {
      const int d = static_cast<int>(e.voxel / plane);
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  }
  if (hi < 0) fail(ErrorCode::EmptyInput, "no foreground predictions or scribbles to refine");

  RefineResult res;
  for (int d = lo; d <= hi; ++d) res.kept_planes.push_back(d);
  const int out_planes = std::min(params.max_planes, hi - lo + 1);
  DownsampledVolume ds = downsample_volume(vol, params.downsample_xy, out_planes, res.kept_planes);
  res.coarse = std::move(ds.volume);
  res.mapping = std::move(ds.mapping);
  const PlaneResampling& map = res.mapping;
  const std::size_t cn = map.coarse_count();

  res.coarse_fg_cost = resample_field(map, fg_cost, 1);
  res.coarse_bg_cost = resample_field(map, bg_cost, 1);
  const int aw = fv.layout.mvs_width + fv.layout.ibr_width;
  const std::vector<float> appearance =
      aw > 0 ? resample_field(map, appearance_features(fv), aw) : std::vector<float>();

  std::vector<Eigen::Vector3d> positions(cn);
  for (std::size_t i = 0; i < cn; ++i) positions[i] = res.coarse.position(res.coarse.unravel(i));
  std::vector<Eigen::Vector3d> fg_pts, bg_pts;
  std::vector<std::size_t> forced_fg, forced_bg;
  for (const auto& e : lifted.entries) {
    const VoxelIndex v = vol.unravel(e.voxel);
    (e.label ? fg_pts : bg_pts).push_back(vol.position(v));
    if (const auto c = map.coarse_of(v.x, v.y, v.d)) (e.label ? forced_fg : forced_bg).push_back(*c);
  }
  for (auto* s : {&forced_fg, &forced_bg}) {
    std::sort(s->begin(), s->end());
    s->erase(std::unique(s->begin(), s->end()), s->end());
  }
  std::vector<std::size_t> both;
  std::set_intersection(forced_fg.begin(), forced_fg.end(), forced_bg.begin(), forced_bg.end(),
                        std::back_inserter(both));
  auto drop = [&](std::vector<std::size_t>& s) {
    std::vector<std::size_t> kept;
    std::set_difference(s.begin(), s.end(), both.begin(), both.end(), std::back_inserter(kept));
    s = std::move(kept);
  };
  drop(forced_fg);
  drop(forced_bg);

  const double diag = scene_diagonal(vol);
  const std::vector<double> dist_fg = distance_to_points(fg_pts, positions, diag);
  const std::vector<double> dist_bg = distance_to_points(bg_pts, positions, diag);

  EnergyInputs in;
  in.width = map.coarse_w;
  in.height = map.coarse_h;
  in.depth = map.coarse_d;
  in.positions = positions;
  in.fg_cost = res.coarse_fg_cost;
  in.bg_cost = res.coarse_bg_cost;
  in.dist_fg = dist_fg;
  in.dist_bg = dist_bg;
  in.appearance = appearance;
  in.appearance_width = aw;
  in.forced_fg = forced_fg;
  in.forced_bg = forced_bg;
  res.problem = build_energy(in, params);
  res.cut = min_cut(res.problem);
  res.coarse_labels = res.cut.labels;
  res.labels = upsample_labels(map, res.coarse_labels);
  return res;
}

RefineResult postprocess(const PlaneVolume& vol, std::span<const float> prob,
                         const LabeledVoxels& lifted, const FeatureVolume& fv,
                         const GraphCutParams& params) {
  if (prob.size() != vol.voxel_count()) {
    fail(ErrorCode::ShapeMismatch, "probability volume does not match the grid");
  }
  std::vector<float> fg_cost, bg_cost;
  classifier_costs(prob, fg_cost, bg_cost);
  std::vector<std::uint8_t> fine_fg(prob.size());
  for (std::size_t i = 0; i < prob.size(); ++i) fine_fg[i] = prob[i] > params.fg_threshold;
  return refine_on_coarse_grid(vol, fv, lifted, fg_cost, bg_cost, fine_fg, params);
}

void ibr_scribble_costs(const FeatureVolume& fv, const LabeledVoxels& lifted,
                        std::vector<float>& fg_cost, std::vector<float>& bg_cost) {
  const int off = fv.layout.ibr_offset, width = fv.layout.ibr_width;
  if (width == 0) fail(ErrorCode::InvalidArgument, "feature volume has no IBR segment");
  const std::size_t n = fv.voxel_count();
  auto nearest = [&](std::uint8_t label, std::vector<float>& out) {
    std::vector<double> pts;
    for (const auto& e : lifted.entries) {
      if (e.label != label) continue;
      const auto f = fv.at(e.voxel);
      for (int c = 0; c < width; ++c) pts.push_back(f[static_cast<std::size_t>(off + c)]);
    }
    if (pts.empty()) fail(ErrorCode::EmptyInput, "baseline needs scribbles of both classes");
    const KdTree tree(std::move(pts), width);
    out.resize(n);
    parallel_for(n, 8192, [&](std::size_t begin, std::size_t end) {
      std::vector<double> q(static_cast<std::size_t>(width));
      for (std::size_t i = begin; i < end; ++i) {
        const auto f = fv.at(i);
        for (int c = 0; c < width; ++c) q[static_cast<std::size_t>(c)] = f[static_cast<std::size_t>(off + c)];
        out[i] = static_cast<float>(std::sqrt(tree.nearest(q).squared_distance));
      }
    });
  };
  nearest(1, fg_cost);
  nearest(0, bg_cost);
  float mx = 0.0f;
  for (std::size_t i = 0; i < n; ++i) mx = std::max({mx, fg_cost[i], bg_cost[i]});
  if (mx > 0.0f) {
    for (std::size_t i = 0; i < n; ++i) {
      fg_cost[i] /= mx;
      bg_cost[i] /= mx;
    }
  }
}

RefineResult graphcut3d_baseline(const PlaneVolume& vol, const FeatureVolume& fv,
                                 const LabeledVoxels& lifted, const GraphCutParams& params) {
  if (fv.voxel_count() != vol.voxel_count()) {
    fail(ErrorCode::ShapeMismatch, "feature volume does not match the grid");
  }
  std::vector<float> fg_cost, bg_cost;
  ibr_scribble_costs(fv, lifted, fg_cost, bg_cost);
  std::vector<std::uint8_t> fine_fg(fg_cost.size());
  for (std::size_t i = 0; i < fg_cost.size(); ++i) fine_fg[i] = fg_cost[i] < bg_cost[i];
  return refine_on_coarse_grid(vol, fv, lifted, fg_cost, bg_cost, fine_fg, params);
}

KMeansResult kmeans(std::span<const Eigen::Vector3d> points, int k, int restarts,
                    std::uint64_t seed, int max_iterations) {
  if (points.empty()) fail(ErrorCode::EmptyInput, "k-means on an empty point set");
  if (k < 1 || restarts < 1) fail(ErrorCode::InvalidArgument, "k and restarts must be >= 1");
  const std::size_t n = points.size();
  const auto kk = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(k), n));
  Rng rng(seed);
  KMeansResult best;
  best.inertia = kInf;
  std::vector<std::size_t> assign(n);
  for (int r = 0; r < restarts; ++r) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < kk; ++i) {  // partial Fisher-Yates
      const auto j = i + static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(n - i - 1)));
      std::swap(idx[i], idx[j]);
    }
    std::vector<Eigen::Vector3d> centers(kk);
    for (std::size_t i = 0; i < kk; ++i) centers[i] = points[idx[i]];
    std::fill(assign.begin(), assign.end(), kk);
    double inertia = 0.0;
    for (int it = 0; it < max_iterations; ++it) {
      bool changed = false;
      inertia = 0.0;
      for (std::size_t p = 0; p < n; ++p) {
        std::size_t arg = 0;
        double bd = kInf;
        for (std::size_t c = 0; c < kk; ++c) {
          const double d = (points[p] - centers[c]).squaredNorm();
          if (d < bd) {
            bd = d;
            arg = c;
          }
        }
        inertia += bd;
        if (assign[p] != arg) {
          assign[p] = arg;
          changed = true;
        }
      }
      if (!changed) break;
      std::vector<Eigen::Vector3d> sum(kk, Eigen::Vector3d::Zero());
      std::vector<std::size_t> count(kk, 0);
      for (std::size_t p = 0; p < n; ++p) {
        sum[assign[p]] += points[p];
        ++count[assign[p]];
      }
      for (std::size_t c = 0; c < kk; ++c) {
        if (count[c] > 0) centers[c] = sum[c] / static_cast<double>(count[c]);
      }
    }
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.centers = centers;
    }
  }
  return best;
}

Mask graphcut2d_baseline(const Image& image, std::span<const Pixel> fg_pixels,
                         std::span<const Pixel> bg_pixels, const Graphcut2dParams& params) {
  if (image.channels != 3) fail(ErrorCode::InvalidArgument, "2D graph cut needs an RGB image");
  if (fg_pixels.empty() || bg_pixels.empty()) {
    fail(ErrorCode::EmptyInput, "2D graph cut needs fg and bg scribble pixels");
  }
  if (params.clusters < 1) fail(ErrorCode::InvalidArgument, "cluster count must be >= 1");
  if (!(params.sigma > 0.0)) fail(ErrorCode::InvalidArgument, "sigma must be > 0");
  const int W = image.width, H = image.height;
  const std::size_t n = static_cast<std::size_t>(W) * H;
  auto color = [&](std::size_t i) -> Eigen::Vector3d {
    const float* c = image.data.data() + i * 3;
    return Eigen::Vector3d(c[0], c[1], c[2]) * params.color_scale;
  };
  std::vector<std::int8_t> seed_label(n, -1);
  auto mark = [&](std::span<const Pixel> px, std::int8_t label) {
    for (const auto& p : px) {
      if (p.x < 0 || p.y < 0 || p.x >= W || p.y >= H) fail(ErrorCode::OutOfImage, "scribble pixel outside image");
      auto& s = seed_label[static_cast<std::size_t>(p.y) * W + p.x];
      s = (s == -1 || s == label) ? label : std::int8_t{2};
    }
  };
  mark(fg_pixels, 1);
  mark(bg_pixels, 0);
  std::vector<Eigen::Vector3d> fg_colors, bg_colors;
  for (std::size_t i = 0; i < n; ++i) {
    if (seed_label[i] == 1) fg_colors.push_back(color(i));
    if (seed_label[i] == 0) bg_colors.push_back(color(i));
  }
  if (fg_colors.empty() || bg_colors.empty()) {
    fail(ErrorCode::EmptyInput, "scribble classes cancel out completely");
  }
  const auto fg_model = kmeans(fg_colors, params.clusters, params.restarts, params.seed);
  const auto bg_model = kmeans(bg_colors, params.clusters, params.restarts, params.seed + 1);
  auto nearest = [](const std::vector<Eigen::Vector3d>& centers, const Eigen::Vector3d& c) {
    double best = kInf;
    for (const auto& k : centers) best = std::min(best, (c - k).norm());
    return best;
  };

  GraphCutProblem pr;
  pr.nodes = n;
  pr.cost0.resize(n);
  pr.cost1.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (seed_label[i] == 1) {
      pr.forced1.push_back(i);
    } else if (seed_label[i] == 0) {
      pr.forced0.push_back(i);
    }
    const Eigen::Vector3d c = color(i);
    const double df = nearest(fg_model.centers, c), db = nearest(bg_model.centers, c);
    const double sum = df + db;
    pr.cost1[i] = sum > 0.0 ? df / sum : 0.5;
    pr.cost0[i] = sum > 0.0 ? db / sum : 0.5;
  }
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * W + x;
      auto add = [&](std::size_t q) {
        const double d2 = (color(p) - color(q)).squaredNorm();
        pr.edges.push_back({static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(q),
                            std::exp(-d2 / params.sigma)});
      };
      if (x + 1 < W) add(p + 1);
      if (y + 1 < H) add(p + static_cast<std::size_t>(W));
    }
  const CutResult cut = min_cut(pr);
  Mask out(W, H, 1);
  out.data = cut.labels;
  return out;
}

}  // namespace voxsel
