#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kbridge {

/// Real-valued single-channel image, row-major. Intensities are never
/// clamped here; clamping happens only when encoding to PGM.
class Image {
 public:
  Image() = default;
  Image(int width, int height, double fill = 0.0);
  Image(int width, int height, std::vector<double> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(int row, int col) { return data_[index(row, col)]; }
  double operator()(int row, int col) const { return data_[index(row, col)]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> pixels() noexcept { return data_; }
  std::span<const double> pixels() const noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool same_shape(const Image& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  double mean() const;
  double min_value() const;
  double max_value() const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int row, int col) const noexcept {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// How neighbor offsets that leave the image are resolved.
///   Reflect:  half-sample symmetric, -1 -> 0, -2 -> 1, n -> n-1.
///   Periodic: wrap around.
enum class Boundary { Reflect, Periodic };

int resolve_index(int i, int n, Boundary boundary) noexcept;

/// Spatial weights h over a square window of offsets (di, dj), |di|,|dj| <= radius.
/// The center weight is kept at zero since a difference with itself vanishes.
class Stencil {
 public:
  struct Tap {
    int di;
    int dj;
    double weight;
  };

  Stencil() : Stencil(0) {}
  explicit Stencil(int radius);

  int radius() const noexcept { return radius_; }
  double weight(int di, int dj) const;
  void set_weight(int di, int dj, double w);

  /// Off-center taps with non-zero weight, in row-major window order.
  const std::vector<Tap>& taps() const noexcept { return taps_; }
  double total_weight() const noexcept;
  bool is_symmetric() const;

 private:
  std::size_t slot(int di, int dj) const;
  void rebuild_taps();

  int radius_;
  std::vector<double> weights_;
  std::vector<Tap> taps_;
};

Stencil make_gaussian_stencil(int radius, double spatial_sigma);
Stencil make_box_stencil(int radius);
/// Horizontal-only box window, for 1D signals stored as 1-row images.
Stencil make_box_stencil_1d(int radius);

struct NoiseSpec {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

/// xoshiro256** seeded through splitmix64. Fixed so noise is reproducible
/// bit-for-bit across runs and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next() noexcept;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;

 private:
  std::uint64_t s_[4];
};

Image add_gaussian_noise(const Image& img, const NoiseSpec& spec);

Image load_pgm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> save_pgm(const Image& img);
Image load_pgm_file(const std::string& path);
/// Writes through a temporary file and renames it into place.
void save_pgm_file(const Image& img, const std::string& path);
void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::string& path, std::string_view text);

/// Sentinel returned by psnr() for identical images.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

double mse(const Image& a, const Image& b);
double psnr(const Image& a, const Image& b, double peak = 255.0);
double l1_filter_distance(std::span<const double> w1, std::span<const double> w2);

/// Deterministic synthetic test images (intensities in [0, 255]).
std::vector<std::string> corpus_names();
Image make_corpus_image(std::string_view name, int size, std::uint64_t seed = 7);

}  // namespace kbridge
