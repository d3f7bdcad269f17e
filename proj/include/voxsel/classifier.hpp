#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "voxsel/features.hpp"

namespace voxsel {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int max_epochs = 200;
  int batch_size = 1024;
  double validation_fraction = 0.1;
  int patience = 20;
  double min_delta = 1e-4;
  bool standardize = true;
  std::uint64_t seed = 7;
};

void validate(const TrainConfig& cfg);

// Fully connected network: ReLU hidden layers, one sigmoid output.
// weights[l] has shape (widths[l+1], widths[l]).
struct MlpModel {
  std::vector<int> widths;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  Eigen::VectorXd feature_mean;  // applied as (x - mean) / scale
  Eigen::VectorXd feature_scale;
  std::uint64_t seed = 0;
  TrainConfig config;

  int input_width() const { return widths.empty() ? 0 : widths.front(); }
  int layer_count() const { return static_cast<int>(weights.size()); }
};

inline constexpr int kHiddenWidth = 128;

// He-uniform weights, U(-sqrt(6/fan_in), sqrt(6/fan_in)), drawn layer by layer in
// row-major order from mt19937_64(seed); zero biases; identity standardization.
MlpModel init_model(int input_width, std::uint64_t seed,
                    std::vector<int> hidden = {kHiddenWidth, kHiddenWidth});

struct MlpGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

// Rows of `x` are raw (unstandardized) samples.
Eigen::VectorXd forward_logits(const MlpModel& model, const Eigen::MatrixXd& x);

// Mean binary cross-entropy of the sigmoid outputs against `y` (0/1); fills
// `grad` with its derivative w.r.t. every weight and bias when non-null.
double loss_and_gradients(const MlpModel& model, const Eigen::MatrixXd& x,
                          const Eigen::VectorXd& y, MlpGradients* grad);

struct TrainHistory {
  std::vector<double> selection_train_loss;  // per epoch of the held-out run
  std::vector<double> validation_loss;
  std::vector<double> train_loss;  // per epoch of the final run on all samples
  int selected_epochs = 0;
  std::size_t train_samples = 0;
  std::size_t validation_samples = 0;
};

struct TrainResult {
  MlpModel model;
  TrainHistory history;
};

// Holds out validation_fraction of the samples to choose the epoch count by
// validation BCE with early stopping, then retrains from the same initial
// weights on every sample for that many epochs.
TrainResult train(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TrainConfig& cfg,
                  std::vector<int> hidden = {kHiddenWidth, kHiddenWidth});

double predict(const MlpModel& model, std::span<const float> features);
double predict(const MlpModel& model, std::span<const double> features);

// Per-voxel foreground probability over the whole feature volume.
std::vector<float> predict_volume(const MlpModel& model, const FeatureVolume& fv);

// Training matrix for the given voxels of a feature volume.
Eigen::MatrixXd gather_samples(const FeatureVolume& fv, std::span<const std::size_t> voxels);

void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace voxsel
