#include "voxsel/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "voxsel/io.hpp"

namespace voxsel {

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) fail(ErrorCode::InvalidArgument, "learning_rate must be > 0");
  if (!(cfg.validation_fraction > 0.0 && cfg.validation_fraction < 1.0)) {
    fail(ErrorCode::InvalidArgument, "validation_fraction must be in (0, 1)");
  }
  if (cfg.max_epochs < 1) fail(ErrorCode::InvalidArgument, "max_epochs must be >= 1");
  if (cfg.batch_size < 1) fail(ErrorCode::InvalidArgument, "batch_size must be >= 1");
  if (cfg.patience < 1) fail(ErrorCode::InvalidArgument, "patience must be >= 1");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
    fail(ErrorCode::InvalidArgument, "Adam betas must be in [0, 1)");
  }
}

MlpModel init_model(int input_width, std::uint64_t seed, std::vector<int> hidden) {
  if (input_width < 1) fail(ErrorCode::InvalidArgument, "input width must be >= 1");
  MlpModel m;
  m.seed = seed;
  m.widths.push_back(input_width);
  for (int h : hidden) {
    if (h < 1) fail(ErrorCode::InvalidArgument, "hidden width must be >= 1");
    m.widths.push_back(h);
  }
  m.widths.push_back(1);
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < m.widths.size(); ++l) {
    const int fan_in = m.widths[l], fan_out = m.widths[l + 1];
    const double bound = std::sqrt(6.0 / fan_in);
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) w(r, c) = uniform(rng, -bound, bound);
    m.weights.push_back(std::move(w));
    m.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  m.feature_mean = Eigen::VectorXd::Zero(input_width);
  m.feature_scale = Eigen::VectorXd::Ones(input_width);
  return m;
}

namespace {

Eigen::MatrixXd standardize(const MlpModel& m, const Eigen::MatrixXd& x) {
  if (x.cols() != m.input_width()) {
    fail(ErrorCode::ShapeMismatch, "feature width " + std::to_string(x.cols()) +
                                       " does not match model input " +
                                       std::to_string(m.input_width()));
  }
  return (x.rowwise() - m.feature_mean.transpose()).array().rowwise() /
         m.feature_scale.transpose().array();
}

// Numerically stable log(1 + exp(-|z|)) based BCE with logits.
double bce_with_logit(double z, double y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

Eigen::VectorXd forward_logits(const MlpModel& model, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd a = standardize(model, x);
  const int layers = model.layer_count();
  for (int l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = a * model.weights[l].transpose();
    z.rowwise() += model.biases[l].transpose();
    a = l + 1 < layers ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return a.col(0);
}

double loss_and_gradients(const MlpModel& model, const Eigen::MatrixXd& x,
                          const Eigen::VectorXd& y, MlpGradients* grad) {
  if (x.rows() != y.size()) fail(ErrorCode::ShapeMismatch, "sample and label counts differ");
  if (x.rows() == 0) fail(ErrorCode::EmptyInput, "no samples");
  const int layers = model.layer_count();
  const double n = static_cast<double>(x.rows());
  std::vector<Eigen::MatrixXd> acts;  // acts[l] is the input of layer l
  acts.reserve(static_cast<std::size_t>(layers) + 1);
  acts.push_back(standardize(model, x));
  for (int l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = acts.back() * model.weights[l].transpose();
    z.rowwise() += model.biases[l].transpose();
    acts.push_back(l + 1 < layers ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z);
  }
  const Eigen::VectorXd logits = acts.back().col(0);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) loss += bce_with_logit(logits[i], y[i]);
  loss /= n;
  if (!grad) return loss;

  grad->weights.assign(static_cast<std::size_t>(layers), {});
  grad->biases.assign(static_cast<std::size_t>(layers), {});
  Eigen::MatrixXd delta(logits.size(), 1);
  for (Eigen::Index i = 0; i < logits.size(); ++i) delta(i, 0) = (sigmoid(logits[i]) - y[i]) / n;
  for (int l = layers - 1; l >= 0; --l) {
    grad->weights[l] = delta.transpose() * acts[l];
    grad->biases[l] = delta.colwise().sum().transpose();
    if (l == 0) break;
    Eigen::MatrixXd back = delta * model.weights[l];
    delta = (acts[l].array() > 0.0).select(back, 0.0);
  }
  return loss;
}

namespace {

struct AdamState {
  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
  long step = 0;

  explicit AdamState(const MlpModel& m) {
    for (int l = 0; l < m.layer_count(); ++l) {
      mw.push_back(Eigen::MatrixXd::Zero(m.weights[l].rows(), m.weights[l].cols()));
      vw.push_back(mw.back());
      mb.push_back(Eigen::VectorXd::Zero(m.biases[l].size()));
      vb.push_back(mb.back());
    }
  }

  void apply(MlpModel& m, const MlpGradients& g, const TrainConfig& c) {
    ++step;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
    for (int l = 0; l < m.layer_count(); ++l) {
      mw[l] = c.beta1 * mw[l] + (1.0 - c.beta1) * g.weights[l];
      vw[l] = c.beta2 * vw[l] + (1.0 - c.beta2) * g.weights[l].cwiseAbs2();
      mb[l] = c.beta1 * mb[l] + (1.0 - c.beta1) * g.biases[l];
      vb[l] = c.beta2 * vb[l] + (1.0 - c.beta2) * g.biases[l].cwiseAbs2();
      m.weights[l].array() -= c.learning_rate * (mw[l].array() / bc1) /
                              ((vw[l].array() / bc2).sqrt() + c.epsilon);
      m.biases[l].array() -= c.learning_rate * (mb[l].array() / bc1) /
                             ((vb[l].array() / bc2).sqrt() + c.epsilon);
    }
  }
};

void fit_standardization(MlpModel& m, const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  m.feature_mean = x.colwise().mean().transpose();
  m.feature_scale.resize(x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double var = (x.col(c).array() - m.feature_mean[c]).square().sum() / static_cast<double>(n);
    const double sd = std::sqrt(var);
    m.feature_scale[c] = sd > 1e-12 ? sd : 1.0;
  }
}

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& x, std::span<const std::size_t> idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

Eigen::VectorXd entries_of(const Eigen::VectorXd& y, std::span<const std::size_t> idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(idx[i])];
  return out;
}

// One epoch of shuffled mini-batch Adam.
void run_epoch(MlpModel& m, AdamState& adam, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
               const TrainConfig& cfg, Rng& rng) {
  std::vector<std::size_t> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle(order, rng);
  MlpGradients g;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  for (std::size_t b = 0; b < order.size(); b += batch) {
    const std::span<const std::size_t> idx(order.data() + b, std::min(batch, order.size() - b));
    loss_and_gradients(m, rows_of(x, idx), entries_of(y, idx), &g);
    adam.apply(m, g, cfg);
  }
}

}  // namespace

TrainResult train(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TrainConfig& cfg,
                  std::vector<int> hidden) {
  validate(cfg);
  if (x.rows() != y.size()) fail(ErrorCode::ShapeMismatch, "sample and label counts differ");
  const auto n = static_cast<std::size_t>(x.rows());
  std::size_t positives = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) fail(ErrorCode::InvalidArgument, "labels must be 0 or 1");
    positives += y[i] == 1.0;
  }
  if (positives == 0 || positives == n) {
    fail(ErrorCode::InvalidArgument, "training needs at least one sample of each class");
  }
  const int width = static_cast<int>(x.cols());
  TrainResult result;
  TrainHistory& hist = result.history;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng(cfg.seed ^ 0x5eedULL);
  shuffle(order, split_rng);
  auto n_val = static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(n)));
  if (n - n_val < 2) n_val = 0;

  if (n_val == 0) {
    hist.selected_epochs = cfg.max_epochs;
  } else {
    std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> tr_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(tr_idx.begin(), tr_idx.end());
    const Eigen::MatrixXd xt = rows_of(x, tr_idx), xv = rows_of(x, val_idx);
    const Eigen::VectorXd yt = entries_of(y, tr_idx), yv = entries_of(y, val_idx);
    MlpModel m = init_model(width, cfg.seed, hidden);
    if (cfg.standardize) fit_standardization(m, xt);
    AdamState adam(m);
    Rng rng(cfg.seed);
    double best = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    for (int e = 0; e < cfg.max_epochs; ++e) {
      run_epoch(m, adam, xt, yt, cfg, rng);
      hist.selection_train_loss.push_back(loss_and_gradients(m, xt, yt, nullptr));
      const double v = loss_and_gradients(m, xv, yv, nullptr);
      hist.validation_loss.push_back(v);
      if (v < best - cfg.min_delta) {
        best = v;
        best_epoch = e;
      } else if (e - best_epoch >= cfg.patience) {
        break;
      }
    }
    hist.selected_epochs = best_epoch + 1;
  }
  hist.train_samples = n - n_val;
  hist.validation_samples = n_val;

  MlpModel m = init_model(width, cfg.seed, hidden);
  if (cfg.standardize) fit_standardization(m, x);
  AdamState adam(m);
  Rng rng(cfg.seed);
  for (int e = 0; e < hist.selected_epochs; ++e) {
    run_epoch(m, adam, x, y, cfg, rng);
    hist.train_loss.push_back(loss_and_gradients(m, x, y, nullptr));
  }
  m.config = cfg;
  result.model = std::move(m);
  return result;
}

double predict(const MlpModel& model, std::span<const double> features) {
  Eigen::MatrixXd x(1, static_cast<Eigen::Index>(features.size()));
  for (std::size_t c = 0; c < features.size(); ++c) x(0, static_cast<Eigen::Index>(c)) = features[c];
  return sigmoid(forward_logits(model, x)[0]);
}

double predict(const MlpModel& model, std::span<const float> features) {
  std::vector<double> d(features.begin(), features.end());
  return predict(model, std::span<const double>(d));
}

std::vector<float> predict_volume(const MlpModel& model, const FeatureVolume& fv) {
  if (fv.channels() != model.input_width()) {
    fail(ErrorCode::ShapeMismatch, "feature volume has " + std::to_string(fv.channels()) +
                                       " channels, model expects " +
                                       std::to_string(model.input_width()));
  }
  const std::size_t count = fv.voxel_count();
  std::vector<float> out(count);
  const auto c = static_cast<Eigen::Index>(fv.channels());
  parallel_for(count, 4096, [&](std::size_t begin, std::size_t end) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(end - begin), c);
    for (std::size_t i = begin; i < end; ++i) {
      const auto f = fv.at(i);
      for (Eigen::Index k = 0; k < c; ++k) x(static_cast<Eigen::Index>(i - begin), k) = f[static_cast<std::size_t>(k)];
    }
    const Eigen::VectorXd z = forward_logits(model, x);
    for (std::size_t i = begin; i < end; ++i) {
      out[i] = static_cast<float>(sigmoid(z[static_cast<Eigen::Index>(i - begin)]));
    }
  });
  return out;
}

Eigen::MatrixXd gather_samples(const FeatureVolume& fv, std::span<const std::size_t> voxels) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(voxels.size()), fv.channels());
  for (std::size_t i = 0; i < voxels.size(); ++i) {
    if (voxels[i] >= fv.voxel_count()) fail(ErrorCode::OutOfImage, "voxel index outside the feature volume");
    const auto f = fv.at(voxels[i]);
    for (int k = 0; k < fv.channels(); ++k) x(static_cast<Eigen::Index>(i), k) = f[static_cast<std::size_t>(k)];
  }
  return x;
}

namespace {
constexpr char kModelMagic[4] = {'P', 'M', 'L', 'P'};
constexpr std::uint32_t kModelVersion = 1;
}  // namespace

void save_model(const MlpModel& model, const std::filesystem::path& path) {
  BinaryWriter w;
  w.bytes(kModelMagic, 4);
  w.u32(kModelVersion);
  w.u32(static_cast<std::uint32_t>(model.widths.size()));
  for (int wd : model.widths) w.u32(static_cast<std::uint32_t>(wd));
  w.u64(model.seed);
  const TrainConfig& c = model.config;
  w.f64(c.learning_rate);
  w.f64(c.beta1);
  w.f64(c.beta2);
  w.f64(c.epsilon);
  w.u32(static_cast<std::uint32_t>(c.max_epochs));
  w.u32(static_cast<std::uint32_t>(c.batch_size));
  w.f64(c.validation_fraction);
  w.u32(static_cast<std::uint32_t>(c.patience));
  w.f64(c.min_delta);
  w.u8(c.standardize ? 1 : 0);
  w.u64(c.seed);
  for (Eigen::Index i = 0; i < model.feature_mean.size(); ++i) w.f32(static_cast<float>(model.feature_mean[i]));
  for (Eigen::Index i = 0; i < model.feature_scale.size(); ++i) w.f32(static_cast<float>(model.feature_scale[i]));
  for (int l = 0; l < model.layer_count(); ++l) {
    const auto& W = model.weights[l];
    for (Eigen::Index r = 0; r < W.rows(); ++r)
      for (Eigen::Index k = 0; k < W.cols(); ++k) w.f32(static_cast<float>(W(r, k)));
    for (Eigen::Index r = 0; r < model.biases[l].size(); ++r) w.f32(static_cast<float>(model.biases[l][r]));
  }
  w.save(path);
}

MlpModel load_model(const std::filesystem::path& path) {
  BinaryReader r = BinaryReader::open(path);
  r.expect_magic(kModelMagic);
  if (r.u32() != kModelVersion) fail(ErrorCode::Parse, "unsupported model version");
  MlpModel m;
  const std::uint32_t layers = r.u32();
  if (layers < 2 || layers > 64) fail(ErrorCode::Parse, "bad layer count in model file");
  for (std::uint32_t i = 0; i < layers; ++i) {
    const std::uint32_t wd = r.u32();
    if (wd < 1 || wd > (1u << 20)) fail(ErrorCode::Parse, "bad layer width in model file");
    m.widths.push_back(static_cast<int>(wd));
  }
  if (m.widths.back() != 1) fail(ErrorCode::Parse, "model output width must be 1");
  m.seed = r.u64();
  TrainConfig& c = m.config;
  c.learning_rate = r.f64();
  c.beta1 = r.f64();
  c.beta2 = r.f64();
  c.epsilon = r.f64();
  c.max_epochs = static_cast<int>(r.u32());
  c.batch_size = static_cast<int>(r.u32());
  c.validation_fraction = r.f64();
  c.patience = static_cast<int>(r.u32());
  c.min_delta = r.f64();
  c.standardize = r.u8() != 0;
  c.seed = r.u64();
  const int in = m.widths.front();
  m.feature_mean.resize(in);
  m.feature_scale.resize(in);
  for (int i = 0; i < in; ++i) m.feature_mean[i] = r.f32();
  for (int i = 0; i < in; ++i) m.feature_scale[i] = r.f32();
  for (std::size_t l = 0; l + 1 < m.widths.size(); ++l) {
    Eigen::MatrixXd W(m.widths[l + 1], m.widths[l]);
    for (Eigen::Index i = 0; i < W.rows(); ++i)
      for (Eigen::Index k = 0; k < W.cols(); ++k) W(i, k) = r.f32();
    Eigen::VectorXd b(m.widths[l + 1]);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = r.f32();
    m.weights.push_back(std::move(W));
    m.biases.push_back(std::move(b));
  }
  r.expect_end();
  return m;
}

}  // namespace voxsel
