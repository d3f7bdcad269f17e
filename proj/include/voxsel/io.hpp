#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "voxsel/common.hpp"
#include "voxsel/features.hpp"
#include "voxsel/geometry.hpp"
#include "voxsel/scribbles.hpp"
#include "voxsel/volume.hpp"

namespace voxsel {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written in host order and assume little-endian");

class BinaryWriter {
 public:
  void bytes(const void* data, std::size_t n);
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void f32(float v) { bytes(&v, 4); }
  void f64(double v) { bytes(&v, 8); }
  void camera(const Camera& cam);

  const std::vector<std::uint8_t>& buffer() const { return buf_; }
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<std::uint8_t> buf_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::vector<std::uint8_t> data) : buf_(std::move(data)) {}
  static BinaryReader open(const std::filesystem::path& path);

  void bytes(void* out, std::size_t n);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  Camera camera();
  void expect_magic(const char (&magic)[4]);
  void expect_end() const;
  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> content);

// 8-bit PNG. Float images are clamped to [0,1] and rounded; channels 1, 3 or 4.
std::vector<std::uint8_t> encode_png(const Raster<std::uint8_t>& img);
Raster<std::uint8_t> decode_png(std::span<const std::uint8_t> bytes);
void write_png(const std::filesystem::path& path, const Raster<std::uint8_t>& img);
void write_png(const std::filesystem::path& path, const Image& img);
Raster<std::uint8_t> read_png_u8(const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);  // values / 255

Raster<std::uint8_t> quantize(const Image& img);
Image dequantize(const Raster<std::uint8_t>& img);
// 0/1 mask as 0/255 grayscale and back (threshold 128).
Raster<std::uint8_t> mask_to_gray(const Mask& m);
Mask gray_to_mask(const Raster<std::uint8_t>& g);

// Binary PGM (P5, maxval 255).
void write_pgm(const std::filesystem::path& path, const Raster<std::uint8_t>& img);
Raster<std::uint8_t> read_pgm(const std::filesystem::path& path);

// One camera per non-comment line:
//   K00 K01 K02 K10 K11 K12 K20 K21 K22 R00 ... R22 t0 t1 t2 width height
// '#' starts a comment. R is camera-to-world (row-major), t the camera center.
std::vector<Camera> parse_cameras(std::string_view text);
std::string format_cameras(std::span<const Camera> cams);
std::vector<Camera> read_cameras(const std::filesystem::path& path);
void write_cameras(const std::filesystem::path& path, std::span<const Camera> cams);

// Text scribbles: "fg x,y x,y ..." or "bg x,y ..." per stroke; optional
// "reference_view N" line; '#' comments.
ScribbleSet parse_scribbles(std::string_view text);
std::string format_scribbles(const ScribbleSet& s);
// Label raster: 0 none, 1 fg, 2 bg. Every labeled pixel becomes a one-point stroke.
ScribbleSet scribbles_from_raster(const Raster<std::uint8_t>& labels);
ScribbleSet read_scribbles(const std::filesystem::path& path);  // .txt or .pgm/.png raster

// PVOL: magic, version, W, H, D, N, basis_kind, spacing_kind, z_near, z_far,
// camera record, D plane depths, then W*H*D*(1+3N) float32 in (d, y, x) order.
void save_volume(const PlaneVolume& vol, const std::filesystem::path& path);
PlaneVolume load_volume(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_volume(const PlaneVolume& vol);
PlaneVolume decode_volume(std::vector<std::uint8_t> bytes);

// PLBL: magic, version, W, H, D, then one byte per voxel.
void save_labels(const std::vector<std::uint8_t>& labels, int w, int h, int d,
                 const std::filesystem::path& path);
std::vector<std::uint8_t> load_labels(const std::filesystem::path& path, int w, int h, int d);

// PFEA: magic, version, W, H, D, layout record, key string, float32 payload.
void save_features(const FeatureVolume& fv, const std::string& key,
                   const std::filesystem::path& path);
FeatureVolume load_features(const std::filesystem::path& path, std::string* key = nullptr);

}  // namespace voxsel
