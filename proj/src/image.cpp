#include "kbridge/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>

#include "kbridge/errors.hpp"
#include "kbridge/numeric.hpp"

namespace kbridge {

Image::Image(int width, int height, double fill) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw InvalidArgument("image dimensions must be positive");
  data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

Image::Image(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width <= 0 || height <= 0) throw InvalidArgument("image dimensions must be positive");
  if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw DimensionMismatch("image data length does not equal width*height");
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw InvalidArgument("image samples must be finite");
  }
}

double Image::mean() const {
  if (data_.empty()) return 0.0;
  return pairwise_sum(data_) / static_cast<double>(data_.size());
}

double Image::min_value() const {
  return data_.empty() ? 0.0 : *std::min_element(data_.begin(), data_.end());
}

double Image::max_value() const {
  return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end());
}

int resolve_index(int i, int n, Boundary boundary) noexcept {
  if (i >= 0 && i < n) return i;
  if (boundary == Boundary::Periodic) {
    const int m = i % n;
    return m < 0 ? m + n : m;
  }
  // Half-sample symmetric reflection has period 2n.
  const int period = 2 * n;
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

// ---------------------------------------------------------------------------
// Stencil

Stencil::Stencil(int radius) : radius_(radius) {
  if (radius < 0) throw InvalidArgument("stencil radius must be non-negative");
  const auto side = static_cast<std::size_t>(2 * radius + 1);
  weights_.assign(side * side, 0.0);
}

std::size_t Stencil::slot(int di, int dj) const {
  if (std::abs(di) > radius_ || std::abs(dj) > radius_) {
    throw InvalidArgument("stencil offset outside window");
  }
  const auto side = static_cast<std::size_t>(2 * radius_ + 1);
  return static_cast<std::size_t>(di + radius_) * side + static_cast<std::size_t>(dj + radius_);
}

double Stencil::weight(int di, int dj) const {
  if (std::abs(di) > radius_ || std::abs(dj) > radius_) return 0.0;
  return weights_[slot(di, dj)];
}

void Stencil::set_weight(int di, int dj, double w) {
  if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("stencil weights must be finite and >= 0");
  const std::size_t i = slot(di, dj);
  if (di == 0 && dj == 0) return;
  weights_[i] = w;
  rebuild_taps();
}

void Stencil::rebuild_taps() {
  taps_.clear();
  for (int di = -radius_; di <= radius_; ++di) {
    for (int dj = -radius_; dj <= radius_; ++dj) {
      if (di == 0 && dj == 0) continue;
      const double w = weights_[slot(di, dj)];
      if (w != 0.0) taps_.push_back({di, dj, w});
    }
  }
}

double Stencil::total_weight() const noexcept {
  double s = 0.0;
  for (const auto& t : taps_) s += t.weight;
  return s;
}

bool Stencil::is_symmetric() const {
  for (int di = -radius_; di <= radius_; ++di) {
    for (int dj = -radius_; dj <= radius_; ++dj) {
      if (weight(di, dj) != weight(-di, -dj)) return false;
    }
  }
  return true;
}

Stencil make_gaussian_stencil(int radius, double spatial_sigma) {
  if (!(spatial_sigma > 0.0)) throw InvalidArgument("spatial_sigma must be positive");
  Stencil s(radius);
  const double denom = 2.0 * spatial_sigma * spatial_sigma;
  for (int di = -radius; di <= radius; ++di) {
    for (int dj = -radius; dj <= radius; ++dj) {
      s.set_weight(di, dj, std::exp(-static_cast<double>(di * di + dj * dj) / denom));
    }
  }
  return s;
}

Stencil make_box_stencil(int radius) {
  Stencil s(radius);
  for (int di = -radius; di <= radius; ++di) {
    for (int dj = -radius; dj <= radius; ++dj) s.set_weight(di, dj, 1.0);
  }
  return s;
}

Stencil make_box_stencil_1d(int radius) {
  Stencil s(radius);
  for (int dj = -radius; dj <= radius; ++dj) s.set_weight(0, dj, 1.0);
  return s;
}

// ---------------------------------------------------------------------------
// Noise

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t sm = seed;
  for (auto& s : s_) s = splitmix64(sm);
}

std::uint64_t Rng::next() noexcept {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

Image add_gaussian_noise(const Image& img, const NoiseSpec& spec) {
  if (!(spec.sigma >= 0.0)) throw InvalidArgument("noise sigma must be >= 0");
  Image out = img;
  if (spec.sigma == 0.0) return out;
  Rng rng(spec.seed);
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; i += 2) {
    // Box-Muller: two uniforms per pair of normals; u1 in (0, 1].
    const double u1 = 1.0 - rng.uniform();
    const double u2 = rng.uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    out[i] += spec.sigma * r * std::cos(angle);
    if (i + 1 < n) out[i + 1] += spec.sigma * r * std::sin(angle);
  }
  return out;
}

// ---------------------------------------------------------------------------
// PGM

namespace {

class HeaderReader {
 public:
  HeaderReader(std::span<const std::uint8_t> bytes, std::size_t start)
      : bytes_(bytes), pos_(start) {}

  std::size_t pos() const { return pos_; }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const auto c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long read_uint() {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000'000L) throw ParseError("malformed header: number too large", start);
      ++pos_;
    }
    if (pos_ == start) throw ParseError("malformed header: expected integer", start);
    return value;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_;
};

}  // namespace

Image load_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2) throw ParseError("malformed header: missing magic", 0);
  if (bytes[0] != 'P' || bytes[1] != '5') throw ParseError("unsupported magic", 0);
  HeaderReader reader(bytes, 2);
  const long width = reader.read_uint();
  const long height = reader.read_uint();
  reader.skip_space_and_comments();
  const std::size_t maxval_offset = reader.pos();
  const long maxval = reader.read_uint();
  if (width <= 0 || height <= 0) throw ParseError("malformed header: zero dimension", 2);
  if (maxval <= 0 || maxval > 255) throw ParseError("unsupported maxval", maxval_offset);
  std::size_t pos = reader.pos();
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw ParseError("malformed header: missing separator after maxval", pos);
  }
  ++pos;
  const auto count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() - pos < count) throw ParseError("truncated payload", bytes.size());
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) data[i] = static_cast<double>(bytes[pos + i]);
  return Image(static_cast<int>(width), static_cast<int>(height), std::move(data));
}

std::vector<std::uint8_t> save_pgm(const Image& img) {
  const std::string header = "P5\n" + std::to_string(img.width()) + " " +
                             std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + img.size());
  for (double v : img.pixels()) {
    // std::round rounds half away from zero.
    out.push_back(static_cast<std::uint8_t>(std::round(std::clamp(v, 0.0, 255.0))));
  }
  return out;
}

Image load_pgm_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return load_pgm(bytes);
}

void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes) {
  if (path.empty()) throw IoError("empty output path");
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      out.close();
      std::remove(tmp.c_str());
      throw IoError("write failed for " + tmp);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw IoError("cannot rename " + tmp + " to " + path + ": " + ec.message());
  }
}

void write_file_atomic(const std::string& path, std::string_view text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void save_pgm_file(const Image& img, const std::string& path) {
  const auto bytes = save_pgm(img);
  write_file_atomic(path, std::span<const std::uint8_t>(bytes));
}

// ---------------------------------------------------------------------------
// Metrics

double mse(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw DimensionMismatch("mse: image dimensions differ");
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  return sum_of_squares(diff) / static_cast<double>(a.size());
}

double psnr(const Image& a, const Image& b, double peak) {
  if (!(peak > 0.0)) throw InvalidArgument("psnr peak must be positive");
  const double m = mse(a, b);
  if (m == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(peak * peak / m);
}

double l1_filter_distance(std::span<const double> w1, std::span<const double> w2) {
  if (w1.size() != w2.size()) throw DimensionMismatch("l1_filter_distance: length mismatch");
  std::vector<double> diff(w1.size());
  for (std::size_t i = 0; i < w1.size(); ++i) diff[i] = std::abs(w1[i] - w2[i]);
  return pairwise_sum(diff);
}

// ---------------------------------------------------------------------------
// Synthetic corpus

std::vector<std::string> corpus_names() { return {"blocks", "ramp", "sinus", "texture"}; }

Image make_corpus_image(std::string_view name, int size, std::uint64_t seed) {
  if (size < 4) throw InvalidArgument("corpus size must be >= 4");
  Image img(size, size);
  const double n = static_cast<double>(size);
  if (name == "blocks") {
    for (int r = 0; r < size; ++r) {
      for (int c = 0; c < size; ++c) {
        double v = (c < size / 2) ? 60.0 : 190.0;
        if (r >= size / 2) v -= 40.0;
        if (r >= size / 4 && r < 3 * size / 8 && c >= 3 * size / 8 && c < 5 * size / 8) v = 235.0;
        img(r, c) = v;
      }
    }
  } else if (name == "ramp") {
    for (int r = 0; r < size; ++r) {
      for (int c = 0; c < size; ++c) img(r, c) = 30.0 + 190.0 * (r + c) / (2.0 * (n - 1.0));
    }
  } else if (name == "sinus") {
    const double two_pi = 2.0 * std::numbers::pi;
    for (int r = 0; r < size; ++r) {
      for (int c = 0; c < size; ++c) {
        img(r, c) = 128.0 + 80.0 * std::sin(two_pi * 4.0 * c / n) * std::cos(two_pi * 2.75 * r / n);
      }
    }
  } else if (name == "texture") {
    Rng rng(seed);
    Image raw(size, size);
    for (auto& v : raw.pixels()) v = 255.0 * rng.uniform();
    for (int r = 0; r < size; ++r) {
      for (int c = 0; c < size; ++c) {
        double s = 0.0;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            s += raw(resolve_index(r + dr, size, Boundary::Reflect),
                     resolve_index(c + dc, size, Boundary::Reflect));
          }
        }
        img(r, c) = s / 9.0;
      }
    }
  } else {
    throw InvalidArgument("unknown corpus image '" + std::string(name) + "'");
  }
  return img;
}

}  // namespace kbridge
