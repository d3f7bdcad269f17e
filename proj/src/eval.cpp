#include "voxsel/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

namespace voxsel {

MaskMetrics mask_metrics(const Mask& pred, const Mask& gt) {
  if (pred.width != gt.width || pred.height != gt.height || pred.channels != 1 || gt.channels != 1) {
    fail(ErrorCode::ShapeMismatch, "mask dimensions differ");
  }
  MaskMetrics m;
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    const bool p = pred.data[i] != 0, g = gt.data[i] != 0;
    m.tp += p && g;
    m.fp += p && !g;
    m.fn += !p && g;
    m.tn += !p && !g;
  }
  const double total = static_cast<double>(gt.data.size());
  m.accuracy = total > 0 ? static_cast<double>(m.tp + m.tn) / total : 1.0;
  const std::uint64_t uni = m.tp + m.fp + m.fn;
  m.degenerate = uni == 0;
  m.iou = uni == 0 ? 1.0 : static_cast<double>(m.tp) / static_cast<double>(uni);
  return m;
}

CropBox gt_bbox(const Mask& gt, int pad) {
  if (pad < 0) fail(ErrorCode::InvalidArgument, "pad must be >= 0");
  CropBox b{gt.width, gt.height, -1, -1};
  for (int y = 0; y < gt.height; ++y)
    for (int x = 0; x < gt.width; ++x)
      if (gt.at(x, y)) {
        b.x0 = std::min(b.x0, x);
        b.y0 = std::min(b.y0, y);
        b.x1 = std::max(b.x1, x + 1);
        b.y1 = std::max(b.y1, y + 1);
      }
  if (b.x1 < 0) fail(ErrorCode::EmptyInput, "ground-truth mask is empty");
  b.x0 = std::max(0, b.x0 - pad);
  b.y0 = std::max(0, b.y0 - pad);
  b.x1 = std::min(gt.width, b.x1 + pad);
  b.y1 = std::min(gt.height, b.y1 + pad);
  return b;
}

Image crop(const Image& img, const CropBox& box) {
  if (box.x0 < 0 || box.y0 < 0 || box.x1 > img.width || box.y1 > img.height || box.width() <= 0 ||
      box.height() <= 0) {
    fail(ErrorCode::OutOfImage, "crop box outside image");
  }
  Image out(box.width(), box.height(), img.channels);
  for (int y = 0; y < box.height(); ++y)
    for (int x = 0; x < box.width(); ++x)
      for (int c = 0; c < img.channels; ++c) out.at(x, y, c) = img.at(box.x0 + x, box.y0 + y, c);
  return out;
}

Image crop_to_gt_bbox(const Image& img, const Mask& gt, int pad) {
  if (img.width != gt.width || img.height != gt.height) {
    fail(ErrorCode::ShapeMismatch, "image and mask dimensions differ");
  }
  return crop(img, gt_bbox(gt, pad));
}

double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) fail(ErrorCode::ShapeMismatch, "image dimensions differ");
  if (a.data.empty()) fail(ErrorCode::EmptyInput, "empty image");
  double se = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.data.size());
  return mse < 1e-10 ? kPsnrCap : std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

namespace {

std::vector<double> luminance(const Image& img) {
  std::vector<double> y(static_cast<std::size_t>(img.width) * img.height);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * img.width + c;
      if (img.channels >= 3) {
        y[i] = 0.299 * img.at(c, r, 0) + 0.587 * img.at(c, r, 1) + 0.114 * img.at(c, r, 2);
      } else {
        y[i] = img.at(c, r, 0);
      }
    }
  return y;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  if (!a.same_shape(b)) fail(ErrorCode::ShapeMismatch, "image dimensions differ");
  if (a.data.empty()) fail(ErrorCode::EmptyInput, "empty image");
  constexpr double kC1 = 0.01 * 0.01, kC2 = 0.03 * 0.03, kSigma = 1.5;
  const int win = std::min({11, a.width, a.height});
  const double half = (win - 1) / 2.0;
  std::vector<double> g(static_cast<std::size_t>(win));
  double gsum = 0.0;
  for (int i = 0; i < win; ++i) {
    g[i] = std::exp(-(i - half) * (i - half) / (2.0 * kSigma * kSigma));
    gsum += g[i];
  }
  for (auto& v : g) v /= gsum;
  const auto ya = luminance(a), yb = luminance(b);
  const int W = a.width;
  double total = 0.0;
  std::size_t count = 0;
  for (int y0 = 0; y0 + win <= a.height; ++y0) {
    for (int x0 = 0; x0 + win <= a.width; ++x0) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int dy = 0; dy < win; ++dy)
        for (int dx = 0; dx < win; ++dx) {
          const double w = g[dy] * g[dx];
          const std::size_t i = static_cast<std::size_t>(y0 + dy) * W + x0 + dx;
          ma += w * ya[i];
          mb += w * yb[i];
          saa += w * ya[i] * ya[i];
          sbb += w * yb[i] * yb[i];
          sab += w * ya[i] * yb[i];
        }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      total += ((2 * ma * mb + kC1) * (2 * cov + kC2)) /
               ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

RenderMetrics render_metrics(const Image& pred, const Image& gt, const Mask& gt_mask, int pad) {
  if (!pred.same_shape(gt)) fail(ErrorCode::ShapeMismatch, "image dimensions differ");
  RenderMetrics m;
  m.box = gt_bbox(gt_mask, pad);
  const Image a = crop(pred, m.box), b = crop(gt, m.box);
  m.psnr = psnr(a, b);
  m.ssim = ssim(a, b);
  return m;
}

std::string format_records(const std::vector<MetricRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    if (r.scene.find_first_of("\t\n") != std::string::npos ||
        r.metric.find_first_of("\t\n") != std::string::npos) {
      fail(ErrorCode::InvalidArgument, "metric names may not contain tabs or newlines");
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), r.value);
    out += r.scene + '\t' + r.metric + '\t' + std::string(buf, res.ptr) + '\n';
  }
  return out;
}

std::vector<MetricRecord> parse_records(std::string_view text) {
  std::vector<MetricRecord> out;
  std::size_t pos = 0;
  int lineno = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string_view::npos) {
      fail(ErrorCode::Parse, "metrics line " + std::to_string(lineno) + ": expected 3 tab-separated fields");
    }
    MetricRecord r{std::string(line.substr(0, t1)), std::string(line.substr(t1 + 1, t2 - t1 - 1)), 0.0};
    const auto v = line.substr(t2 + 1);
    const auto res = std::from_chars(v.data(), v.data() + v.size(), r.value);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
      fail(ErrorCode::Parse, "metrics line " + std::to_string(lineno) + ": bad value");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_table(const std::vector<MetricRecord>& records) {
  std::vector<std::string> metrics;
  std::vector<std::string> scenes;
  std::map<std::pair<std::string, std::string>, double> cell;
  for (const auto& r : records) {
    if (std::find(metrics.begin(), metrics.end(), r.metric) == metrics.end()) metrics.push_back(r.metric);
    if (std::find(scenes.begin(), scenes.end(), r.scene) == scenes.end()) scenes.push_back(r.scene);
    cell[{r.scene, r.metric}] = r.value;
  }
  std::size_t first = 5;
  for (const auto& s : scenes) first = std::max(first, s.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(first) + 2) << "scene";
  for (const auto& m : metrics) out << std::right << std::setw(std::max<int>(12, static_cast<int>(m.size()) + 2)) << m;
  out << '\n';
  for (const auto& s : scenes) {
    out << std::left << std::setw(static_cast<int>(first) + 2) << s;
    for (const auto& m : metrics) {
      const int w = std::max<int>(12, static_cast<int>(m.size()) + 2);
      const auto it = cell.find({s, m});
      if (it == cell.end()) {
        out << std::right << std::setw(w) << "-";
      } else {
        out << std::right << std::setw(w) << std::fixed << std::setprecision(4) << it->second;
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace voxsel
