#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kbridge/image.hpp"

namespace kbridge {

/// A named input image. Corpus entries are regenerated from (name, size,
/// seed); file entries hold a loaded PGM.
struct ImageSource {
  std::string name;
  Image image;
};

std::vector<ImageSource> corpus_sources(int size, std::uint64_t seed = 7);

struct ExperimentSpec {
  std::vector<ImageSource> inputs;
  /// Sweep over sigma in 8-bit intensity units.
  std::vector<double> sigmas{1, 2, 5, 10, 20, 30, 50};
  /// Fixed noise level; unset means noise sigma follows the sweep.
  std::optional<double> noise_sigma;
  std::uint64_t seed = 1;
  /// Bilateral strengths are swept as alpha = m sigma^2 (unit range) over
  /// these multipliers m; both one-shot relations predict m = 1.
  std::vector<double> alpha_multipliers;
  int threads = 1;
  bool include_timing = false;
};

/// Multipliers used when ExperimentSpec leaves the grid empty: 32 log-spaced
/// points over [0.1, 10].
std::vector<double> default_alpha_multipliers(std::size_t points = 32);

struct SweepRow {
  std::string image;
  std::string family;
  double sigma = 0.0;
  double alpha = 0.0;       // 0 when the experiment has no alpha sweep
  double multiplier = 0.0;  // alpha / sigma^2
  double psnr_first = 0.0;
  double psnr_second = 0.0;
  bool best_first = false;
  bool best_second = false;
  int iterations_first = 0;
  int iterations_second = 0;
  double runtime_ms_reference = 0.0;
  double runtime_ms_first = 0.0;
  double runtime_ms_second = 0.0;
};

struct SweepResult {
  std::string experiment;
  std::vector<SweepRow> rows;
  bool include_timing = false;
};

/// Best (max PSNR) rows per (image, family, sigma) for each order, ties to
/// the smaller alpha. For sweeps without alpha every row is its own best.
struct BestPoint {
  std::string image;
  std::string family;
  double sigma = 0.0;
  double alpha_first = 0.0;
  double alpha_second = 0.0;
  double psnr_first = 0.0;
  double psnr_second = 0.0;
};
std::vector<BestPoint> best_points(const SweepResult& result);

/// Images are divided by 255 before any filtering; sigma and gamma are given
/// in 8-bit units and divided likewise. PSNRs use the unit peak.
SweepResult run_huber_tv_experiment(const ExperimentSpec& spec, double gamma = 5.0, int radius = 5);

/// For each sigma, MAP solves with the first- and second-order losses of the
/// range kernel (Gaussian spatial stencil, radius 5, spatial sigma 10) are
/// compared against division-free bilateral outputs over the alpha sweep.
SweepResult run_bilateral_inversion_experiment(const ExperimentSpec& spec,
                                               const std::string& kernel_family,
                                               double gamma = 20.0);

struct DirichletFigure {
  std::size_t n = 256;
  std::vector<double> sigmas;
  std::vector<double> l1_distance;
  std::vector<std::vector<double>> exact;
  std::vector<std::vector<double>> approx;
};

DirichletFigure run_dirichlet_figure(std::size_t n, const std::vector<double>& sigmas);

using CsvCell = std::variant<std::string, double, long long>;

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<CsvCell>> rows;
};

CsvTable to_table(const SweepResult& result);
/// Long format: sigma, n, exact, approx, l1_distance.
CsvTable to_table(const DirichletFigure& fig);

/// Doubles use 17 significant digits, '.' decimal, and "inf" for the PSNR
/// sentinel. Strings are quoted when they contain a comma, quote or newline.
std::string format_csv(const CsvTable& table);
/// Atomic write of format_csv(table).
void emit_csv(const CsvTable& table, const std::string& path);

}  // namespace kbridge
