#include "voxsel/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace voxsel {

namespace {

float luminance(const Image& img, int x, int y) {
  const float* p = &img.data[img.offset(x, y)];
  return 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
}

}  // namespace

FeatureMap2D extract_2d_features(const Image& image) {
  if (image.empty() || image.width <= 0 || image.height <= 0) {
    fail(ErrorCode::EmptyInput, "empty image");
  }
  if (image.channels != 3) fail(ErrorCode::ShapeMismatch, "expected an RGB image");
  const int W = image.width, H = image.height;
  const int cw = (W + kImageFeatureStride - 1) / kImageFeatureStride;
  const int ch = (H + kImageFeatureStride - 1) / kImageFeatureStride;

  Image lum(W, H, 1);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) lum.at(x, y) = luminance(image, x, y);
  auto L = [&](int x, int y) {
    return lum.at(std::clamp(x, 0, W - 1), std::clamp(y, 0, H - 1));
  };

  FeatureMap2D out(cw, ch, kImageFeatureChannels);
  Image cell_mean(cw, ch, 3);
  Image cell_lum(cw, ch, 1);

  for (int cy = 0; cy < ch; ++cy) {
    for (int cx = 0; cx < cw; ++cx) {
      const int x0 = cx * kImageFeatureStride, y0 = cy * kImageFeatureStride;
      const int x1 = std::min(W, x0 + kImageFeatureStride);
      const int y1 = std::min(H, y0 + kImageFeatureStride);
      const double count = static_cast<double>((x1 - x0) * (y1 - y0));
      double mean[3] = {0, 0, 0};
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
          for (int c = 0; c < 3; ++c) mean[c] += image.at(x, y, c);
      for (double& m : mean) m /= count;
      double var[3] = {0, 0, 0};
      double hist[8] = {};
      double lap = 0.0;
      double lum_sum = 0.0;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          for (int c = 0; c < 3; ++c) {
            const double dv = image.at(x, y, c) - mean[c];
            var[c] += dv * dv;
          }
          const double l = L(x, y);
          lum_sum += l;
          const double gx = 0.5 * (static_cast<double>(L(x + 1, y)) - L(x - 1, y));
          const double gy = 0.5 * (static_cast<double>(L(x, y + 1)) - L(x, y - 1));
          const double mag = std::hypot(gx, gy);
          if (mag > 0.0) {
            const double angle = std::atan2(gy, gx);
            int bin = static_cast<int>(std::lround(angle / (std::numbers::pi / 4.0)));
            bin = ((bin % 8) + 8) % 8;
            hist[bin] += mag;
          }
          const double lp = (L(x + 1, y) - l) + (L(x - 1, y) - l) + (L(x, y + 1) - l) +
                            (L(x, y - 1) - l);
          lap += lp * lp;
        }
      }
      float* o = &out.at(cx, cy, 0);
      for (int c = 0; c < 3; ++c) {
        o[c] = static_cast<float>(mean[c]);
        o[3 + c] = static_cast<float>(std::sqrt(var[c] / count));
        cell_mean.at(cx, cy, c) = static_cast<float>(mean[c]);
      }
      for (int b = 0; b < 8; ++b) o[6 + b] = static_cast<float>(hist[b] / count);
      o[20] = static_cast<float>(lap / count);
      cell_lum.at(cx, cy) = static_cast<float>(lum_sum / count);
    }
  }

  auto cm = [&](int x, int y, int c) {
    return static_cast<double>(cell_mean.at(std::clamp(x, 0, cw - 1), std::clamp(y, 0, ch - 1), c));
  };
  auto cl = [&](int x, int y) {
    return static_cast<double>(cell_lum.at(std::clamp(x, 0, cw - 1), std::clamp(y, 0, ch - 1)));
  };
  auto window_mean = [&](int cx, int cy, int radius, int c) {
    double s = 0.0;
    int n = 0;
    for (int y = std::max(0, cy - radius); y <= std::min(ch - 1, cy + radius); ++y)
      for (int x = std::max(0, cx - radius); x <= std::min(cw - 1, cx + radius); ++x) {
        s += cell_mean.at(x, y, c);
        ++n;
      }
    return s / n;
  };
  constexpr int dx[4] = {1, 0, -1, 0};
  constexpr int dy[4] = {0, 1, 0, -1};

  for (int cy = 0; cy < ch; ++cy) {
    for (int cx = 0; cx < cw; ++cx) {
      float* o = &out.at(cx, cy, 0);
      for (int c = 0; c < 3; ++c) {
        o[14 + c] = static_cast<float>(window_mean(cx, cy, 1, c));
        o[17 + c] = static_cast<float>(window_mean(cx, cy, 2, c));
      }
      for (int k = 0; k < 4; ++k) {
        const int nx = cx + dx[k], ny = cy + dy[k];
        o[21 + k] = static_cast<float>(cl(cx, cy) - cl(nx, ny));
        double dist = 0.0;
        for (int c = 0; c < 3; ++c) {
          const double dv = cm(cx, cy, c) - cm(nx, ny, c);
          dist += dv * dv;
        }
        o[25 + k] = static_cast<float>(std::sqrt(dist));
      }
      const double r = cm(cx, cy, 0), g = cm(cx, cy, 1), b = cm(cx, cy, 2);
      o[29] = static_cast<float>(r - g);
      o[30] = static_cast<float>(0.5 * (r - b) + 0.5 * (g - b));
      double surround = 0.0;
      int n = 0;
      for (int y = std::max(0, cy - 2); y <= std::min(ch - 1, cy + 2); ++y)
        for (int x = std::max(0, cx - 2); x <= std::min(cw - 1, cx + 2); ++x) {
          surround += cl(x, y) - cl(cx, cy);
          ++n;
        }
      o[31] = static_cast<float>(-surround / n);
    }
  }
  return out;
}

CostVolume build_cost_volume_from_features(const Camera& ref_feature_cam,
                                           std::span<const FeatureView> views,
                                           const DepthPlaneSet& planes, double scale) {
  if (views.size() < 2) fail(ErrorCode::InvalidArgument, "cost volume needs at least 2 views");
  planes.validate();
  ref_feature_cam.validate();
  const int channels = views.front().features.channels;
  for (const auto& v : views) {
    if (v.features.channels != channels) {
      fail(ErrorCode::ShapeMismatch, "views disagree on the feature channel count");
    }
  }
  CostVolume cv;
  cv.ref_cam = ref_feature_cam;
  cv.planes = planes;
  cv.scale = scale;
  cv.width = ref_feature_cam.width;
  cv.height = ref_feature_cam.height;
  cv.channels = channels;
  for (const auto& v : views) cv.source_views.push_back(v.id);
  cv.data.assign(static_cast<std::size_t>(cv.width) * cv.height * planes.size() * channels, 0.0f);

  const std::size_t M = views.size();
  const std::size_t plane_size = static_cast<std::size_t>(cv.width) * cv.height * channels;
  parallel_for(planes.size(), 1, [&](std::size_t begin, std::size_t end) {
    std::vector<float> values(M);
    std::vector<Image> warped(M);
    for (std::size_t d = begin; d < end; ++d) {
      for (std::size_t i = 0; i < M; ++i) {
        const Eigen::Matrix3d H =
            homography_matrix(views[i].camera, ref_feature_cam, planes.depths[d]);
        warped[i] = warp_feature_map(views[i].features, H, cv.width, cv.height);
      }
      float* dst = cv.data.data() + d * plane_size;
      for (std::size_t k = 0; k < plane_size; ++k) {
        for (std::size_t i = 0; i < M; ++i) values[i] = warped[i].data[k];
        // Sorting makes the reduction independent of view order.
        std::sort(values.begin(), values.end());
        double mean = 0.0;
        for (float v : values) mean += v;
        mean /= static_cast<double>(M);
        double var = 0.0;
        for (float v : values) var += (v - mean) * (v - mean);
        dst[k] = static_cast<float>(var / static_cast<double>(M));
      }
    }
  });
  return cv;
}

CostVolume build_cost_volume(const Camera& ref_cam, std::span<const View> views,
                             const DepthPlaneSet& planes) {
  if (views.size() < 2) fail(ErrorCode::InvalidArgument, "cost volume needs at least 2 views");
  constexpr double scale = 1.0 / kImageFeatureStride;
  std::vector<FeatureView> fviews;
  fviews.reserve(views.size());
  for (const auto& v : views) {
    FeatureView fv;
    fv.features = extract_2d_features(v.image);
    fv.camera = v.camera.scaled(scale);
    fv.camera.width = fv.features.width;
    fv.camera.height = fv.features.height;
    fv.id = v.id;
    fviews.push_back(std::move(fv));
  }
  Camera ref = ref_cam.scaled(scale);
  return build_cost_volume_from_features(ref, fviews, planes, scale);
}

std::vector<float> mvs_projection(int in_channels, std::uint64_t seed) {
  Rng rng(seed ^ 0x6d76735f70726f6aULL);
  std::vector<float> P(static_cast<std::size_t>(kMvsChannels) * in_channels);
  const double limit = std::sqrt(3.0 / in_channels);
  for (float& p : P) p = static_cast<float>(uniform(rng, -limit, limit));
  return P;
}

namespace {

// Clamp-normalized box filter of `radius` along one axis of a (d, y, x, c) field.
void box_axis(const std::vector<float>& src, std::vector<float>& dst, int width, int height,
              int depth, int channels, int axis, int radius) {
  const int dims[3] = {width, height, depth};
  const std::size_t strides[3] = {static_cast<std::size_t>(channels),
                                  static_cast<std::size_t>(channels) * width,
                                  static_cast<std::size_t>(channels) * width * height};
  const int n = dims[axis];
  const std::size_t step = strides[axis];
  const std::size_t total = src.size() / static_cast<std::size_t>(n);
  // Enumerate all lines along `axis`.
  std::vector<double> prefix(static_cast<std::size_t>(n) + 1);
  for (std::size_t line = 0; line < total; ++line) {
    // Decompose `line` into the coordinates of the other axes (and channel).
    std::size_t rem = line;
    const std::size_t c = rem % channels;
    rem /= channels;
    std::size_t base = c;
    for (int a = 0; a < 3; ++a) {
      if (a == axis) continue;
      const std::size_t coord = rem % static_cast<std::size_t>(dims[a]);
      rem /= static_cast<std::size_t>(dims[a]);
      base += coord * strides[a];
    }
    prefix[0] = 0.0;
    for (int i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + src[base + i * step];
    for (int i = 0; i < n; ++i) {
      const int lo = std::max(0, i - radius), hi = std::min(n - 1, i + radius);
      dst[base + i * step] = static_cast<float>((prefix[hi + 1] - prefix[lo]) / (hi - lo + 1));
    }
  }
}

std::vector<float> box3d(const std::vector<float>& field, int width, int height, int depth,
                         int channels, int radius) {
  std::vector<float> a(field.size()), b(field.size());
  box_axis(field, a, width, height, depth, channels, 0, radius);
  box_axis(a, b, width, height, depth, channels, 1, radius);
  box_axis(b, a, width, height, depth, channels, 2, radius);
  return a;
}

}  // namespace

std::vector<float> box_pyramid(std::span<const float> field, int width, int height, int depth,
                               int channels) {
  const std::vector<float> input(field.begin(), field.end());
  const auto o1 = box3d(input, width, height, depth, channels, 1);
  const auto o2 = box3d(o1, width, height, depth, channels, 2);
  const auto o3 = box3d(o2, width, height, depth, channels, 4);
  std::vector<float> out(input.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>((static_cast<double>(o1[i]) + o2[i] + o3[i]) / 3.0);
  }
  return out;
}

MvsFeatures refine_cost_volume(const CostVolume& cv, const PlaneVolume& target,
                               std::uint64_t seed) {
  const int D = cv.depth();
  const std::size_t cells = static_cast<std::size_t>(cv.width) * cv.height * D;
  const auto P = mvs_projection(cv.channels, seed);
  std::vector<float> projected(cells * kMvsChannels);
  for (std::size_t i = 0; i < cells; ++i) {
    const float* v = cv.data.data() + i * cv.channels;
    for (int o = 0; o < kMvsChannels; ++o) {
      double s = 0.0;
      const float* row = P.data() + static_cast<std::size_t>(o) * cv.channels;
      for (int c = 0; c < cv.channels; ++c) s += static_cast<double>(row[c]) * v[c];
      projected[i * kMvsChannels + o] = static_cast<float>(s);
    }
  }
  const auto smooth = box_pyramid(projected, cv.width, cv.height, D, kMvsChannels);

  MvsFeatures out;
  out.width = target.width();
  out.height = target.height();
  out.depth = target.depth();
  out.data.assign(target.voxel_count() * kMvsChannels, 0.0f);

  // Plane correspondence: identity when the plane sets match, else linear in depth.
  struct PlaneTap {
    int lo = 0, hi = 0;
    double w = 0.0;
  };
  std::vector<PlaneTap> taps(static_cast<std::size_t>(out.depth));
  const bool same_planes = cv.planes.depths == target.planes().depths;
  for (int d = 0; d < out.depth; ++d) {
    PlaneTap& t = taps[static_cast<std::size_t>(d)];
    if (same_planes) {
      t = {d, d, 0.0};
      continue;
    }
    const double z = target.planes().depths[static_cast<std::size_t>(d)];
    const auto& zs = cv.planes.depths;
    if (z <= zs.front()) {
      t = {0, 0, 0.0};
    } else if (z >= zs.back()) {
      t = {D - 1, D - 1, 0.0};
    } else {
      const auto it = std::upper_bound(zs.begin(), zs.end(), z);
      const int hi = static_cast<int>(it - zs.begin());
      t = {hi - 1, hi, (z - zs[hi - 1]) / (zs[hi] - zs[hi - 1])};
    }
  }

  const double sx = static_cast<double>(cv.ref_cam.K(0, 0)) / target.ref_cam().K(0, 0);
  const double sy = static_cast<double>(cv.ref_cam.K(1, 1)) / target.ref_cam().K(1, 1);
  auto sample = [&](int d, double fx, double fy, int c) {
    fx = std::clamp(fx, 0.0, static_cast<double>(cv.width - 1));
    fy = std::clamp(fy, 0.0, static_cast<double>(cv.height - 1));
    const int x0 = static_cast<int>(std::floor(fx)), y0 = static_cast<int>(std::floor(fy));
    const int x1 = std::min(x0 + 1, cv.width - 1), y1 = std::min(y0 + 1, cv.height - 1);
    const double ax = fx - x0, ay = fy - y0;
    auto at = [&](int x, int y) {
      return static_cast<double>(
          smooth[((static_cast<std::size_t>(d) * cv.height + y) * cv.width + x) * kMvsChannels + c]);
    };
    return (1 - ay) * ((1 - ax) * at(x0, y0) + ax * at(x1, y0)) +
           ay * ((1 - ax) * at(x0, y1) + ax * at(x1, y1));
  };

  parallel_for(static_cast<std::size_t>(out.depth), 1, [&](std::size_t begin, std::size_t end) {
    for (std::size_t dd = begin; dd < end; ++dd) {
      const int d = static_cast<int>(dd);
      const PlaneTap& t = taps[dd];
      for (int y = 0; y < out.height; ++y) {
        const double fy = (y + 0.5) * sy - 0.5;
        for (int x = 0; x < out.width; ++x) {
          const double fx = (x + 0.5) * sx - 0.5;
          float* dst = out.data.data() + target.index(x, y, d) * kMvsChannels;
          for (int c = 0; c < kMvsChannels; ++c) {
            double v = sample(t.lo, fx, fy, c);
            if (t.w > 0.0) v = (1.0 - t.w) * v + t.w * sample(t.hi, fx, fy, c);
            dst[c] = static_cast<float>(v);
          }
        }
      }
    }
  });
  return out;
}

std::vector<float> ibr_feature(const PlaneVolume& vol, const VoxelIndex& p) {
  if (!vol.contains(p.x, p.y, p.d)) fail(ErrorCode::OutOfImage, "voxel outside the grid");
  const auto v = vol.voxel(vol.index(p));
  return {v.begin(), v.end()};
}

std::array<float, kPositionalWidth> positional_feature(const PlaneVolume& vol,
                                                       const VoxelIndex& p) {
  if (!vol.contains(p.x, p.y, p.d)) fail(ErrorCode::OutOfImage, "voxel outside the grid");
  auto normalized = [](int i, int n) {
    return n > 1 ? 2.0 * i / (n - 1) - 1.0 : 0.0;
  };
  std::array<float, kPositionalWidth> out{};
  std::size_t k = 0;
  auto encode = [&](double u, int frequencies) {
    for (int j = 0; j < frequencies; ++j) {
      const double a = std::ldexp(std::numbers::pi, j) * u;
      out[k++] = static_cast<float>(std::sin(a));
      out[k++] = static_cast<float>(std::cos(a));
    }
  };
  encode(normalized(p.x, vol.width()), kXyFrequencies);
  encode(normalized(p.y, vol.height()), kXyFrequencies);
  encode(normalized(p.d, vol.depth()), kZFrequencies);
  return out;
}

FeatureVolume assemble_features(const PlaneVolume& vol, const MvsFeatures* mvs,
                                FeatureSegments segments) {
  if (mvs == nullptr) segments.mvs = false;
  if (segments.mvs && (mvs->width != vol.width() || mvs->height != vol.height() ||
                       mvs->depth != vol.depth())) {
    fail(ErrorCode::ShapeMismatch, "MVS features do not cover the volume grid");
  }
  FeatureVolume fv;
  fv.width = vol.width();
  fv.height = vol.height();
  fv.depth = vol.depth();
  FeatureLayout& L = fv.layout;
  L.mvs_offset = 0;
  L.mvs_width = segments.mvs ? mvs->channels : 0;
  L.ibr_offset = L.mvs_width;
  L.ibr_width = segments.ibr ? vol.stride() : 0;
  L.xyz_offset = L.ibr_offset + L.ibr_width;
  L.xyz_width = segments.xyz ? kPositionalWidth : 0;
  const auto C = static_cast<std::size_t>(L.total());
  fv.data.assign(vol.voxel_count() * C, 0.0f);

  // The encoding is separable per axis: x fills [0,20), y [20,40), z [40,56).
  constexpr int kXSlots = 2 * kXyFrequencies;
  std::vector<std::array<float, kPositionalWidth>> px, py, pz;
  if (L.xyz_width > 0) {
    for (int x = 0; x < vol.width(); ++x) px.push_back(positional_feature(vol, {x, 0, 0}));
    for (int y = 0; y < vol.height(); ++y) py.push_back(positional_feature(vol, {0, y, 0}));
    for (int d = 0; d < vol.depth(); ++d) pz.push_back(positional_feature(vol, {0, 0, d}));
  }

  parallel_for(static_cast<std::size_t>(vol.depth()), 1, [&](std::size_t begin, std::size_t end) {
    for (std::size_t dd = begin; dd < end; ++dd) {
      const int d = static_cast<int>(dd);
      for (int y = 0; y < vol.height(); ++y) {
        for (int x = 0; x < vol.width(); ++x) {
          const std::size_t i = vol.index(x, y, d);
          float* dst = fv.data.data() + i * C;
          if (L.mvs_width > 0) {
            const float* src = mvs->data.data() + i * static_cast<std::size_t>(mvs->channels);
            std::copy(src, src + L.mvs_width, dst + L.mvs_offset);
          }
          if (L.ibr_width > 0) {
            const auto v = vol.voxel(i);
            std::copy(v.begin(), v.end(), dst + L.ibr_offset);
          }
          if (L.xyz_width > 0) {
            float* o = dst + L.xyz_offset;
            std::copy(px[x].begin(), px[x].begin() + kXSlots, o);
            std::copy(py[y].begin() + kXSlots, py[y].begin() + 2 * kXSlots, o + kXSlots);
            std::copy(pz[dd].begin() + 2 * kXSlots, pz[dd].end(), o + 2 * kXSlots);
          }
        }
      }
    }
  });
  return fv;
}

std::vector<float> appearance_features(const FeatureVolume& fv) {
  const int width = fv.layout.mvs_width + fv.layout.ibr_width;
  const auto C = static_cast<std::size_t>(fv.channels());
  std::vector<float> out(fv.voxel_count() * static_cast<std::size_t>(width));
  for (std::size_t i = 0; i < fv.voxel_count(); ++i) {
    const float* src = fv.data.data() + i * C;
    float* dst = out.data() + i * static_cast<std::size_t>(width);
    std::copy(src + fv.layout.mvs_offset, src + fv.layout.mvs_offset + fv.layout.mvs_width, dst);
    std::copy(src + fv.layout.ibr_offset, src + fv.layout.ibr_offset + fv.layout.ibr_width,
              dst + fv.layout.mvs_width);
  }
  return out;
}

}  // namespace voxsel
