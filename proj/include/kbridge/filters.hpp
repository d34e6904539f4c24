#pragma once

#include <span>
#include <vector>

#include "kbridge/image.hpp"
#include "kbridge/kernels.hpp"
#include "kbridge/losses.hpp"

namespace kbridge {

struct FilterConfig {
  double sigma = 1.0;
  double alpha = 1.0;
  double gamma = 1.0;
  Stencil stencil;
  int patch_radius = 0;
  Boundary boundary = Boundary::Reflect;
  /// Worker threads for the per-pixel loop. Output does not depend on it.
  int threads = 1;
};

/// x_i = sum_j K_ij x_j / sum_j K_ij with K_ij = h_ij k(patch distance) and
/// a unit self weight.
Image kernel_filter_normalized(const Image& x, const ScalarKernel& k, const FilterConfig& cfg);

/// x_i - alpha sum_j h_ij k(|x_i - x_j|)(x_i - x_j). Uses cfg.alpha.
Image division_free_bilateral(const Image& x, const ScalarKernel& k, const FilterConfig& cfg);

/// x_k - sigma^2 sum_j h_kj rho'(|d|)/|d| d, with d = x_k - x_j. Uses cfg.sigma.
Image first_order_filter(const Image& x, const ScalarLoss& loss, const FilterConfig& cfg);

/// x_k - sigma^2 sum_j h_kj rho''(|d|) d.
Image second_order_filter(const Image& x, const ScalarLoss& loss, const FilterConfig& cfg);

/// (1 - sigma^2) x, the one-shot version of the l2 MAP map.
Image l2_shrinkage(const Image& x, double sigma);
/// x / (1 + sigma^2), the exact l2 MAP map.
Image l2_exact(const Image& x, double sigma);

/// Impulse response of a cyclic convolution; taps[n] multiplies x[i - n].
struct PeriodicFilter1D {
  std::vector<double> taps;

  std::size_t size() const noexcept { return taps.size(); }
  double dc_gain() const;
};

/// Which 3-tap approximation of the Dirichlet filter to use. Full gives
/// [2s^2, 1 - 4s^2, 2s^2]; Half is the half-strength [s^2, 1 - 2s^2, s^2]
/// kept only for comparison.
enum class TapConvention { Full, Half };

PeriodicFilter1D dirichlet_approx_filter(std::size_t n, double sigma,
                                         TapConvention conv = TapConvention::Full);
std::vector<double> dirichlet_approx_1d(std::span<const double> x, double sigma,
                                        TapConvention conv = TapConvention::Full);
/// True when sigma is below the breakdown point 1/(2 sqrt 2) of the 3-tap filter.
bool dirichlet_approx_stable(double sigma);
/// Decay rate r of the exact impulse response.
double dirichlet_ratio(double sigma);
/// Closed-form impulse response of (I + 2 sigma^2 L0)^-1.
PeriodicFilter1D dirichlet_exact_1d(std::size_t n, double sigma);
/// Same filter by inverse DFT of W_k = 1 / (1 + 4 sigma^2 (1 - cos 2 pi k / N)).
PeriodicFilter1D dirichlet_exact_1d_spectral(std::size_t n, double sigma);
/// Frequency response of a periodic filter at bin k.
double frequency_response(const PeriodicFilter1D& f, std::size_t k);

std::vector<double> cyclic_convolve(const PeriodicFilter1D& f, std::span<const double> x);

struct ErrorBoundReport {
  double lhs = 0.0;  // ||exact - approx||
  double rhs = 0.0;  // sigma^2 M ||exact - x||
  bool holds = false;
};

/// Checks ||exact - approx|| <= sigma^2 M ||exact - x||. The comparison
/// allows a relative 1e-12 margin plus 16 eps ||x|| of rounding, because the
/// bound is an equality for the l2 case.
ErrorBoundReport filter_error_bound_report(std::span<const double> x, std::span<const double> exact,
                                           std::span<const double> approx, double sigma,
                                           double lipschitz);
ErrorBoundReport filter_error_bound_report(const Image& x, const Image& exact, const Image& approx,
                                           double sigma, double lipschitz);

}  // namespace kbridge
