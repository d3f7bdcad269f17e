#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace voxsel {

enum class ErrorCode {
  InvalidArgument,
  InvalidDepth,
  InvalidCamera,
  OutOfImage,
  BehindCamera,
  NonInvertible,
  ShapeMismatch,
  EmptyInput,
  Overlap,
  Infeasible,
  Parse,
  Io,
  NotFound,
  Conflict,
  Canceled,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

// Interleaved, row-major raster: value(x, y, c) = data[(y * width + x) * channels + c].
template <typename T>
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<T> data;

  Raster() = default;
  Raster(int w, int h, int c, T fill = T{})
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  bool empty() const { return data.empty(); }
  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * width + x) * channels;
  }
  T& at(int x, int y, int c = 0) { return data[offset(x, y) + c]; }
  const T& at(int x, int y, int c = 0) const { return data[offset(x, y) + c]; }
  bool same_shape(const Raster& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

using Image = Raster<float>;           // RGB in [0,1] or generic float maps
using Mask = Raster<std::uint8_t>;     // 0 / 1, single channel

struct Pixel {
  int x = 0;
  int y = 0;
  auto operator<=>(const Pixel&) const = default;
};

// Deterministic RNG helpers. std:: distributions are implementation-defined,
// so sampling goes through these to keep outputs identical across toolchains.
using Rng = std::mt19937_64;
double uniform01(Rng& rng);
double uniform(Rng& rng, double lo, double hi);
int uniform_int(Rng& rng, int lo, int hi_inclusive);
double normal(Rng& rng);
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(i - 1)));
    std::swap(v[i - 1], v[j]);
  }
}

// Worker pool control. Results never depend on the worker count: work is split
// into fixed chunks and every chunk writes disjoint output.
void set_worker_count(int workers);
int worker_count();
void parallel_for(std::size_t count, std::size_t chunk,
                  const std::function<void(std::size_t begin, std::size_t end)>& body);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

template <typename T>
std::string content_hash(const std::vector<T>& values) {
  return sha256_hex(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(values.data()), values.size() * sizeof(T)));
}

}  // namespace voxsel
