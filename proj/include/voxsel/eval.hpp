#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "voxsel/common.hpp"

namespace voxsel {

struct MaskMetrics {
  double accuracy = 0.0;
  double iou = 0.0;
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  bool degenerate = false;  // prediction and gt both empty; iou reported as 1
};

MaskMetrics mask_metrics(const Mask& pred, const Mask& gt);

struct CropBox {
  int x0 = 0, y0 = 0;  // inclusive
  int x1 = 0, y1 = 0;  // exclusive
  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
};

// Tight box around the true gt pixels, grown by `pad` and clamped to the image.
CropBox gt_bbox(const Mask& gt, int pad = 0);
Image crop(const Image& img, const CropBox& box);
Image crop_to_gt_bbox(const Image& img, const Mask& gt, int pad = 0);

inline constexpr double kPsnrCap = 99.0;

// 10 log10(1 / mse) on [0,1] images; kPsnrCap when mse < 1e-10.
double psnr(const Image& a, const Image& b);
// Mean SSIM over valid 11x11 Gaussian windows (sigma 1.5) of the luminance,
// C1 = 0.01^2, C2 = 0.03^2. Smaller images use a window as large as fits.
double ssim(const Image& a, const Image& b);

struct RenderMetrics {
  double psnr = 0.0;
  double ssim = 0.0;
  CropBox box;
};

RenderMetrics render_metrics(const Image& pred, const Image& gt, const Mask& gt_mask, int pad = 0);

struct MetricRecord {
  std::string scene;
  std::string metric;
  double value = 0.0;
};

// One tab-separated "scene metric value" record per line, values printed round-trip exact.
std::string format_records(const std::vector<MetricRecord>& records);
std::vector<MetricRecord> parse_records(std::string_view text);
std::string format_table(const std::vector<MetricRecord>& records);

}  // namespace voxsel
