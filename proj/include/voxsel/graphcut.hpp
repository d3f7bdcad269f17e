#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "voxsel/features.hpp"
#include "voxsel/scribbles.hpp"
#include "voxsel/volume.hpp"

namespace voxsel {

struct GraphCutParams {
  double w1 = 1.0;
  double w2 = 10.0;
  double alpha = 0.1;
  double sigma = 1.0;
  int downsample_xy = 2;  // per axis, so 4x fewer voxels per plane
  int max_planes = 20;
  double fg_threshold = 0.5;

  void validate() const;
};

struct GraphEdge {
  std::uint32_t p = 0;
  std::uint32_t q = 0;
  double weight = 0.0;
};

// E(y) = sum_p cost_{y_p}(p) + sum_{(p,q)} weight_pq |y_p - y_q|, subject to the
// forced labels. Edge weights already include alpha.
struct GraphCutProblem {
  std::size_t nodes = 0;
  std::vector<double> cost0;
  std::vector<double> cost1;
  std::vector<GraphEdge> edges;
  std::vector<std::size_t> forced0;
  std::vector<std::size_t> forced1;

  void validate() const;
};

struct CutResult {
  std::vector<std::uint8_t> labels;
  double energy = 0.0;
  double flow = 0.0;
  double constant = 0.0;  // energy == constant + flow
};

// +infinity when a forced label is violated.
double evaluate_energy(const GraphCutProblem& problem, std::span<const std::uint8_t> labels);

// Exact global minimizer through one s-t max-flow (source side = label 1).
CutResult min_cut(const GraphCutProblem& problem);

std::string dump_problem(const GraphCutProblem& problem);

// Energy on a plane grid. `positions` are the world positions of the grid
// voxels; `appearance` holds `appearance_width` values per voxel.
struct EnergyInputs {
  int width = 0;
  int height = 0;
  int depth = 0;
  std::span<const Eigen::Vector3d> positions;
  std::span<const float> fg_cost;  // phi^c(1), in [0, 1]
  std::span<const float> bg_cost;  // phi^c(0), in [0, 1]
  std::span<const double> dist_fg;
  std::span<const double> dist_bg;
  std::span<const float> appearance;
  int appearance_width = 0;
  std::span<const std::size_t> forced_fg;
  std::span<const std::size_t> forced_bg;
};

// Mean world distance between in-plane (x or y) neighbors; the unit of Dist(p, q).
double in_plane_spacing(const EnergyInputs& in);

GraphCutProblem build_energy(const EnergyInputs& in, const GraphCutParams& params);

// Classifier costs: phi^c(1) = 1 - p, phi^c(0) = p.
void classifier_costs(std::span<const float> prob, std::vector<float>& fg_cost,
                      std::vector<float>& bg_cost);

struct RefineResult {
  std::vector<std::uint8_t> labels;  // fine grid
  std::vector<std::uint8_t> coarse_labels;
  std::vector<int> kept_planes;
  PlaneResampling mapping;
  PlaneVolume coarse;  // coarse grid geometry
  GraphCutProblem problem;
  CutResult cut;
  std::vector<float> coarse_fg_cost;
  std::vector<float> coarse_bg_cost;
};

// Downsample / solve / upsample with arbitrary first-unary costs on the fine grid.
// `fine_fg` marks voxels whose planes must be kept (in addition to lifted fg voxels).
RefineResult refine_on_coarse_grid(const PlaneVolume& vol, const FeatureVolume& fv,
                                   const LabeledVoxels& lifted, std::span<const float> fg_cost,
                                   std::span<const float> bg_cost,
                                   std::span<const std::uint8_t> fine_fg,
                                   const GraphCutParams& params);

RefineResult postprocess(const PlaneVolume& vol, std::span<const float> prob,
                         const LabeledVoxels& lifted, const FeatureVolume& fv,
                         const GraphCutParams& params);

// Nearest-scribble IBR feature distances; both columns divided by their joint maximum.
void ibr_scribble_costs(const FeatureVolume& fv, const LabeledVoxels& lifted,
                        std::vector<float>& fg_cost, std::vector<float>& bg_cost);

RefineResult graphcut3d_baseline(const PlaneVolume& vol, const FeatureVolume& fv,
                                 const LabeledVoxels& lifted, const GraphCutParams& params);

struct KMeansResult {
  std::vector<Eigen::Vector3d> centers;
  double inertia = 0.0;
};

// Lloyd iterations from `restarts` random initializations; keeps the lowest inertia.
KMeansResult kmeans(std::span<const Eigen::Vector3d> points, int k, int restarts,
                    std::uint64_t seed, int max_iterations = 100);

struct Graphcut2dParams {
  int clusters = 64;
  int restarts = 10;
  double sigma = 10.0;
  double color_scale = 255.0;
  std::uint64_t seed = 11;
};

// Ratio unary over nearest fg/bg color cluster distances, exponential color
// contrast pairwise term on a 4-connected grid, hard constraints on scribbles.
Mask graphcut2d_baseline(const Image& image, std::span<const Pixel> fg_pixels,
                         std::span<const Pixel> bg_pixels, const Graphcut2dParams& params = {});

}  // namespace voxsel
