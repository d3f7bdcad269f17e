#include "voxsel/io.hpp"

#include <png.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace voxsel {

void BinaryWriter::bytes(const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  buf_.insert(buf_.end(), p, p + n);
}

void BinaryWriter::camera(const Camera& cam) {
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) f64(cam.K(r, c));
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) f64(cam.R(r, c));
  for (int i = 0; i < 3; ++i) f64(cam.t[i]);
  u32(static_cast<std::uint32_t>(cam.width));
  u32(static_cast<std::uint32_t>(cam.height));
}

void BinaryWriter::save(const std::filesystem::path& path) const { write_file(path, buf_); }

BinaryReader BinaryReader::open(const std::filesystem::path& path) {
  return BinaryReader(read_file(path));
}

void BinaryReader::bytes(void* out, std::size_t n) {
  if (remaining() < n) fail(ErrorCode::Parse, "unexpected end of binary data");
  std::memcpy(out, buf_.data() + pos_, n);
  pos_ += n;
}

std::uint8_t BinaryReader::u8() {
  std::uint8_t v;
  bytes(&v, 1);
  return v;
}
std::uint32_t BinaryReader::u32() {
  std::uint32_t v;
  bytes(&v, 4);
  return v;
}
std::uint64_t BinaryReader::u64() {
  std::uint64_t v;
  bytes(&v, 8);
  return v;
}
float BinaryReader::f32() {
  float v;
  bytes(&v, 4);
  return v;
}
double BinaryReader::f64() {
  double v;
  bytes(&v, 8);
  return v;
}

Camera BinaryReader::camera() {
  Camera cam;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) cam.K(r, c) = f64();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) cam.R(r, c) = f64();
  for (int i = 0; i < 3; ++i) cam.t[i] = f64();
  cam.width = static_cast<int>(u32());
  cam.height = static_cast<int>(u32());
  return cam;
}

void BinaryReader::expect_magic(const char (&magic)[4]) {
  char got[4];
  bytes(got, 4);
  if (std::memcmp(got, magic, 4) != 0) {
    fail(ErrorCode::Parse, "bad magic, expected " + std::string(magic, 4));
  }
}

void BinaryReader::expect_end() const {
  if (remaining() != 0) fail(ErrorCode::Parse, "trailing bytes after payload");
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(content.data()),
            static_cast<std::streamsize>(content.size()));
  if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  write_file(path, std::span<const std::uint8_t>(
                       reinterpret_cast<const std::uint8_t*>(content.data()), content.size()));
}

// ---- PNG ----

namespace {

png_uint_32 png_format_for(int channels) {
  switch (channels) {
    case 1: return PNG_FORMAT_GRAY;
    case 2: return PNG_FORMAT_GA;
    case 3: return PNG_FORMAT_RGB;
    case 4: return PNG_FORMAT_RGBA;
  }
  fail(ErrorCode::InvalidArgument, "PNG needs 1 to 4 channels");
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Raster<std::uint8_t>& img) {
  if (img.width <= 0 || img.height <= 0) fail(ErrorCode::InvalidArgument, "empty image");
  png_image pi;
  std::memset(&pi, 0, sizeof(pi));
  pi.version = PNG_IMAGE_VERSION;
  pi.width = static_cast<png_uint_32>(img.width);
  pi.height = static_cast<png_uint_32>(img.height);
  pi.format = png_format_for(img.channels);
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&pi, nullptr, &size, 0, img.data.data(), 0, nullptr)) {
    fail(ErrorCode::Io, std::string("PNG encode failed: ") + pi.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&pi, out.data(), &size, 0, img.data.data(), 0, nullptr)) {
    fail(ErrorCode::Io, std::string("PNG encode failed: ") + pi.message);
  }
  out.resize(size);
  return out;
}

Raster<std::uint8_t> decode_png(std::span<const std::uint8_t> bytes) {
  png_image pi;
  std::memset(&pi, 0, sizeof(pi));
  pi.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&pi, bytes.data(), bytes.size())) {
    fail(ErrorCode::Parse, std::string("PNG decode failed: ") + pi.message);
  }
  const int channels = static_cast<int>(PNG_IMAGE_SAMPLE_CHANNELS(pi.format));
  pi.format = png_format_for(channels);
  Raster<std::uint8_t> img(static_cast<int>(pi.width), static_cast<int>(pi.height), channels);
  if (!png_image_finish_read(&pi, nullptr, img.data.data(), 0, nullptr)) {
    fail(ErrorCode::Parse, std::string("PNG decode failed: ") + pi.message);
  }
  return img;
}

void write_png(const std::filesystem::path& path, const Raster<std::uint8_t>& img) {
  write_file(path, encode_png(img));
}

void write_png(const std::filesystem::path& path, const Image& img) {
  write_png(path, quantize(img));
}

Raster<std::uint8_t> read_png_u8(const std::filesystem::path& path) {
  return decode_png(read_file(path));
}

Image read_png(const std::filesystem::path& path) { return dequantize(read_png_u8(path)); }

Raster<std::uint8_t> quantize(const Image& img) {
  Raster<std::uint8_t> out(img.width, img.height, img.channels);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const float v = std::clamp(img.data[i], 0.0f, 1.0f);
    out.data[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  return out;
}

Image dequantize(const Raster<std::uint8_t>& img) {
  Image out(img.width, img.height, img.channels);
  for (std::size_t i = 0; i < img.data.size(); ++i) out.data[i] = img.data[i] / 255.0f;
  return out;
}

Raster<std::uint8_t> mask_to_gray(const Mask& m) {
  Raster<std::uint8_t> g(m.width, m.height, 1);
  for (std::size_t i = 0; i < m.data.size(); ++i) g.data[i] = m.data[i] ? 255 : 0;
  return g;
}

Mask gray_to_mask(const Raster<std::uint8_t>& g) {
  Mask m(g.width, g.height, 1);
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x) m.at(x, y) = g.at(x, y, 0) >= 128 ? 1 : 0;
  return m;
}

// ---- PGM ----

void write_pgm(const std::filesystem::path& path, const Raster<std::uint8_t>& img) {
  if (img.channels != 1) fail(ErrorCode::InvalidArgument, "PGM needs a single channel");
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.data.data()), img.data.size());
  write_file(path, out);
}

Raster<std::uint8_t> read_pgm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  std::size_t pos = 0;
  auto token = [&]() {
    for (;;) {
      while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  if (token() != "P5") fail(ErrorCode::Parse, "not a binary PGM: " + path.string());
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    fail(ErrorCode::Parse, "malformed PGM header: " + path.string());
  }
  if (w <= 0 || h <= 0 || maxval != 255) fail(ErrorCode::Parse, "unsupported PGM header");
  ++pos;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (bytes.size() - pos != n) fail(ErrorCode::Parse, "PGM payload size mismatch");
  Raster<std::uint8_t> img(w, h, 1);
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end(), img.data.begin());
  return img;
}

// ---- cameras ----

namespace {

std::string strip_comment(std::string_view line) {
  const auto hash = line.find('#');
  return std::string(line.substr(0, hash));
}

bool parse_double(std::string_view s, double& out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

bool parse_int(std::string_view s, int& out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string t;
  while (in >> t) out.push_back(t);
  return out;
}

}  // namespace

std::vector<Camera> parse_cameras(std::string_view text) {
  std::vector<Camera> cams;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tok = split_ws(strip_comment(line));
    if (tok.empty()) continue;
    const std::string where = "camera line " + std::to_string(lineno) + ": ";
    if (tok.size() != 23) {
      fail(ErrorCode::Parse, where + "expected 23 fields, got " + std::to_string(tok.size()));
    }
    double v[21];
    for (int i = 0; i < 21; ++i) {
      if (!parse_double(tok[i], v[i]) || !std::isfinite(v[i])) {
        fail(ErrorCode::Parse, where + "bad number '" + tok[i] + "'");
      }
    }
    Camera cam;
    for (int i = 0; i < 9; ++i) cam.K(i / 3, i % 3) = v[i];
    for (int i = 0; i < 9; ++i) cam.R(i / 3, i % 3) = v[9 + i];
    cam.t = {v[18], v[19], v[20]};
    if (!parse_int(tok[21], cam.width) || !parse_int(tok[22], cam.height)) {
      fail(ErrorCode::Parse, where + "bad image size");
    }
    try {
      cam.validate();
    } catch (const Error& e) {
      fail(ErrorCode::Parse, where + e.what());
    }
    cams.push_back(cam);
  }
  return cams;
}

std::string format_cameras(std::span<const Camera> cams) {
  std::ostringstream out;
  out << "# K(9) R(9, camera-to-world) t(3, center) width height\n";
  out.precision(17);
  for (const auto& c : cams) {
    for (int i = 0; i < 9; ++i) out << c.K(i / 3, i % 3) << ' ';
    for (int i = 0; i < 9; ++i) out << c.R(i / 3, i % 3) << ' ';
    for (int i = 0; i < 3; ++i) out << c.t[i] << ' ';
    out << c.width << ' ' << c.height << '\n';
  }
  return out.str();
}

std::vector<Camera> read_cameras(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_cameras(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

void write_cameras(const std::filesystem::path& path, std::span<const Camera> cams) {
  write_file(path, format_cameras(cams));
}

// ---- scribbles ----

ScribbleSet parse_scribbles(std::string_view text) {
  ScribbleSet s;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tok = split_ws(strip_comment(line));
    if (tok.empty()) continue;
    const std::string where = "scribble line " + std::to_string(lineno) + ": ";
    if (tok[0] == "reference_view") {
      if (tok.size() != 2 || !parse_int(tok[1], s.reference_view)) {
        fail(ErrorCode::Parse, where + "expected 'reference_view N'");
      }
      continue;
    }
    if (tok[0] != "fg" && tok[0] != "bg") fail(ErrorCode::Parse, where + "unknown tag '" + tok[0] + "'");
    if (tok.size() < 2) fail(ErrorCode::Parse, where + "stroke without points");
    Stroke stroke;
    for (std::size_t i = 1; i < tok.size(); ++i) {
      const auto comma = tok[i].find(',');
      Pixel p;
      if (comma == std::string::npos ||
          !parse_int(std::string_view(tok[i]).substr(0, comma), p.x) ||
          !parse_int(std::string_view(tok[i]).substr(comma + 1), p.y)) {
        fail(ErrorCode::Parse, where + "bad point '" + tok[i] + "'");
      }
      stroke.push_back(p);
    }
    (tok[0] == "fg" ? s.fg_strokes : s.bg_strokes).push_back(std::move(stroke));
  }
  return s;
}

std::string format_scribbles(const ScribbleSet& s) {
  std::ostringstream out;
  out << "reference_view " << s.reference_view << '\n';
  auto emit = [&](const char* tag, const std::vector<Stroke>& strokes) {
    for (const auto& st : strokes) {
      out << tag;
      for (const auto& p : st) out << ' ' << p.x << ',' << p.y;
      out << '\n';
    }
  };
  emit("fg", s.fg_strokes);
  emit("bg", s.bg_strokes);
  return out.str();
}

ScribbleSet scribbles_from_raster(const Raster<std::uint8_t>& labels) {
  ScribbleSet s;
  for (int y = 0; y < labels.height; ++y) {
    for (int x = 0; x < labels.width; ++x) {
      const std::uint8_t v = labels.at(x, y, 0);
      if (v == 1) {
        s.fg_strokes.push_back({{x, y}});
      } else if (v == 2) {
        s.bg_strokes.push_back({{x, y}});
      } else if (v != 0) {
        fail(ErrorCode::Parse, "unknown label " + std::to_string(v) + " at (" + std::to_string(x) +
                                   ", " + std::to_string(y) + ")");
      }
    }
  }
  return s;
}

ScribbleSet read_scribbles(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".pgm") return scribbles_from_raster(read_pgm(path));
  if (ext == ".png") {
    auto r = read_png_u8(path);
    if (r.channels != 1) fail(ErrorCode::Parse, "scribble raster must be single-channel");
    return scribbles_from_raster(r);
  }
  const auto bytes = read_file(path);
  return parse_scribbles(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

// ---- volumes ----

namespace {
constexpr char kVolumeMagic[4] = {'P', 'V', 'O', 'L'};
constexpr char kLabelsMagic[4] = {'P', 'L', 'B', 'L'};
constexpr char kFeatureMagic[4] = {'P', 'F', 'E', 'A'};
constexpr std::uint32_t kFormatVersion = 1;
}  // namespace

std::vector<std::uint8_t> encode_volume(const PlaneVolume& vol) {
  BinaryWriter w;
  w.bytes(kVolumeMagic, 4);
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(vol.width()));
  w.u32(static_cast<std::uint32_t>(vol.height()));
  w.u32(static_cast<std::uint32_t>(vol.depth()));
  w.u32(static_cast<std::uint32_t>(vol.basis_count()));
  w.u32(static_cast<std::uint32_t>(vol.basis()));
  w.u32(static_cast<std::uint32_t>(vol.planes().spacing));
  w.f64(vol.planes().depths.front());
  w.f64(vol.planes().depths.back());
  w.camera(vol.ref_cam());
  for (double z : vol.planes().depths) w.f64(z);
  w.bytes(vol.raw().data(), vol.raw().size() * sizeof(float));
  return w.buffer();
}

void save_volume(const PlaneVolume& vol, const std::filesystem::path& path) {
  write_file(path, encode_volume(vol));
}

PlaneVolume decode_volume(std::vector<std::uint8_t> bytes) {
  BinaryReader r(std::move(bytes));
  r.expect_magic(kVolumeMagic);
  if (r.u32() != kFormatVersion) fail(ErrorCode::Parse, "unsupported volume version");
  const std::uint32_t w = r.u32(), h = r.u32(), d = r.u32(), n = r.u32();
  const std::uint32_t basis = r.u32(), spacing = r.u32();
  if (basis > 1 || spacing > 2) fail(ErrorCode::Parse, "unknown basis or spacing kind");
  if (basis_size(static_cast<BasisKind>(basis)) != static_cast<int>(n)) {
    fail(ErrorCode::Parse, "basis count does not match basis kind");
  }
  r.f64();  // z_near, z_far are implied by the depth list
  r.f64();
  Camera cam = r.camera();
  if (cam.width != static_cast<int>(w) || cam.height != static_cast<int>(h)) {
    fail(ErrorCode::Parse, "camera size does not match volume size");
  }
  if (d == 0 || d > 100000) fail(ErrorCode::Parse, "bad plane count");
  DepthPlaneSet planes;
  planes.spacing = static_cast<PlaneSpacing>(spacing);
  for (std::uint32_t i = 0; i < d; ++i) planes.depths.push_back(r.f64());
  PlaneVolume vol(cam, planes, static_cast<BasisKind>(basis));
  const std::size_t payload = vol.raw().size() * sizeof(float);
  if (r.remaining() != payload) fail(ErrorCode::Parse, "volume payload size mismatch");
  r.bytes(vol.raw().data(), payload);
  vol.validate();
  return vol;
}

PlaneVolume load_volume(const std::filesystem::path& path) { return decode_volume(read_file(path)); }

void save_labels(const std::vector<std::uint8_t>& labels, int w, int h, int d,
                 const std::filesystem::path& path) {
  if (labels.size() != static_cast<std::size_t>(w) * h * d) {
    fail(ErrorCode::ShapeMismatch, "label count does not match grid");
  }
  BinaryWriter bw;
  bw.bytes(kLabelsMagic, 4);
  bw.u32(kFormatVersion);
  bw.u32(static_cast<std::uint32_t>(w));
  bw.u32(static_cast<std::uint32_t>(h));
  bw.u32(static_cast<std::uint32_t>(d));
  bw.bytes(labels.data(), labels.size());
  bw.save(path);
}

std::vector<std::uint8_t> load_labels(const std::filesystem::path& path, int w, int h, int d) {
  BinaryReader r = BinaryReader::open(path);
  r.expect_magic(kLabelsMagic);
  if (r.u32() != kFormatVersion) fail(ErrorCode::Parse, "unsupported labels version");
  if (r.u32() != static_cast<std::uint32_t>(w) || r.u32() != static_cast<std::uint32_t>(h) ||
      r.u32() != static_cast<std::uint32_t>(d)) {
    fail(ErrorCode::ShapeMismatch, "label grid does not match the volume");
  }
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(w) * h * d);
  if (r.remaining() != labels.size()) fail(ErrorCode::Parse, "labels payload size mismatch");
  r.bytes(labels.data(), labels.size());
  for (auto v : labels)
    if (v > 1) fail(ErrorCode::Parse, "labels must be 0 or 1");
  return labels;
}

void save_features(const FeatureVolume& fv, const std::string& key,
                   const std::filesystem::path& path) {
  BinaryWriter w;
  w.bytes(kFeatureMagic, 4);
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(fv.width));
  w.u32(static_cast<std::uint32_t>(fv.height));
  w.u32(static_cast<std::uint32_t>(fv.depth));
  const FeatureLayout& l = fv.layout;
  for (int v : {l.mvs_offset, l.mvs_width, l.ibr_offset, l.ibr_width, l.xyz_offset, l.xyz_width}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  w.u32(static_cast<std::uint32_t>(key.size()));
  w.bytes(key.data(), key.size());
  w.bytes(fv.data.data(), fv.data.size() * sizeof(float));
  w.save(path);
}

FeatureVolume load_features(const std::filesystem::path& path, std::string* key) {
  BinaryReader r = BinaryReader::open(path);
  r.expect_magic(kFeatureMagic);
  if (r.u32() != kFormatVersion) fail(ErrorCode::Parse, "unsupported feature cache version");
  FeatureVolume fv;
  fv.width = static_cast<int>(r.u32());
  fv.height = static_cast<int>(r.u32());
  fv.depth = static_cast<int>(r.u32());
  FeatureLayout& l = fv.layout;
  for (int* v : {&l.mvs_offset, &l.mvs_width, &l.ibr_offset, &l.ibr_width, &l.xyz_offset, &l.xyz_width}) {
    *v = static_cast<int>(r.u32());
  }
  const std::uint32_t key_len = r.u32();
  if (key_len > 4096) fail(ErrorCode::Parse, "bad cache key length");
  std::string k(key_len, '\0');
  r.bytes(k.data(), key_len);
  if (key) *key = k;
  fv.data.resize(fv.voxel_count() * static_cast<std::size_t>(fv.channels()));
  if (r.remaining() != fv.data.size() * sizeof(float)) {
    fail(ErrorCode::Parse, "feature payload size mismatch");
  }
  r.bytes(fv.data.data(), fv.data.size() * sizeof(float));
  return fv;
}

}  // namespace voxsel
