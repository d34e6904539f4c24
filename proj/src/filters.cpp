#include "kbridge/filters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

#include "kbridge/errors.hpp"
#include "kbridge/graph.hpp"
#include "kbridge/numeric.hpp"

namespace kbridge {

namespace {

// Runs fn(row) for every row. Rows are split into contiguous blocks, one per
// worker; each row is written by exactly one worker.
template <typename Fn>
void for_each_row(int height, int threads, Fn fn) {
  const int workers = std::clamp(threads, 1, std::max(1, height));
  if (workers == 1) {
    for (int r = 0; r < height; ++r) fn(r);
    return;
  }
  std::vector<std::jthread> pool;
  for (int t = 0; t < workers; ++t) {
    const int lo = height * t / workers;
    const int hi = height * (t + 1) / workers;
    pool.emplace_back([=, &fn] {
      for (int r = lo; r < hi; ++r) fn(r);
    });
  }
}

void check_config(const FilterConfig& cfg) {
  if (cfg.patch_radius < 0) throw InvalidArgument("patch radius must be >= 0");
  if (!cfg.stencil.is_symmetric()) throw InvalidArgument("stencil must be symmetric");
}

// out_i = x_i - scale * sum_j h_ij c(|x_i - x_j|) (x_i - x_j). Shared by the
// division-free bilateral and the loss-driven filters so that equal
// coefficients give bit-identical output.
template <typename Coeff>
Image difference_filter(const Image& x, const FilterConfig& cfg, double scale, Coeff coeff) {
  check_config(cfg);
  const int w = x.width();
  const int h = x.height();
  Image out(w, h, 0.0);
  const auto& taps = cfg.stencil.taps();
  for_each_row(h, cfg.threads, [&](int r) {
    for (int c = 0; c < w; ++c) {
      const double xi = x(r, c);
      double acc = 0.0;
      for (const auto& tap : taps) {
        const double d = xi - x(resolve_index(r + tap.di, h, cfg.boundary),
                                resolve_index(c + tap.dj, w, cfg.boundary));
        if (d == 0.0) continue;
        acc += tap.weight * coeff(std::abs(d)) * d;
      }
      out(r, c) = xi - scale * acc;
    }
  });
  return out;
}

}  // namespace

Image kernel_filter_normalized(const Image& x, const ScalarKernel& k, const FilterConfig& cfg) {
  check_config(cfg);
  const int w = x.width();
  const int h = x.height();
  Image out(w, h, 0.0);
  const double self = kernel_eval(k, 0.0);
  for_each_row(h, cfg.threads, [&](int r) {
    for (int c = 0; c < w; ++c) {
      double num = self * x(r, c);
      double den = self;
      for (const auto& tap : cfg.stencil.taps()) {
        const int r2 = resolve_index(r + tap.di, h, cfg.boundary);
        const int c2 = resolve_index(c + tap.dj, w, cfg.boundary);
        const double kij = tap.weight * kernel_eval(k, patch_distance(x, r, c, r2, c2, cfg.patch_radius));
        num += kij * x(r2, c2);
        den += kij;
      }
      out(r, c) = den > 0.0 ? num / den : x(r, c);
    }
  });
  return out;
}

Image division_free_bilateral(const Image& x, const ScalarKernel& k, const FilterConfig& cfg) {
  if (!(cfg.alpha >= 0.0)) throw InvalidArgument("alpha must be >= 0");
  return difference_filter(x, cfg, cfg.alpha, [&k](double t) { return kernel_eval(k, t); });
}

Image first_order_filter(const Image& x, const ScalarLoss& loss, const FilterConfig& cfg) {
  if (!(cfg.sigma >= 0.0)) throw InvalidArgument("sigma must be >= 0");
  return difference_filter(x, cfg, cfg.sigma * cfg.sigma,
                           [&loss](double t) { return influence(loss, t); });
}

Image second_order_filter(const Image& x, const ScalarLoss& loss, const FilterConfig& cfg) {
  if (!(cfg.sigma >= 0.0)) throw InvalidArgument("sigma must be >= 0");
  return difference_filter(x, cfg, cfg.sigma * cfg.sigma,
                           [&loss](double t) { return rho_second(loss, t); });
}

Image l2_shrinkage(const Image& x, double sigma) {
  Image out = x;
  const double f = 1.0 - sigma * sigma;
  for (auto& v : out.pixels()) v *= f;
  return out;
}

Image l2_exact(const Image& x, double sigma) {
  Image out = x;
  const double f = 1.0 + sigma * sigma;
  for (auto& v : out.pixels()) v /= f;
  return out;
}

double PeriodicFilter1D::dc_gain() const { return pairwise_sum(taps); }

PeriodicFilter1D dirichlet_approx_filter(std::size_t n, double sigma, TapConvention conv) {
  if (n < 3) throw InvalidArgument("periodic filter needs n >= 3");
  const double s2 = sigma * sigma;
  const double side = conv == TapConvention::Full ? 2.0 * s2 : s2;
  PeriodicFilter1D f{std::vector<double>(n, 0.0)};
  f.taps[0] = 1.0 - 2.0 * side;
  f.taps[1] = side;
  f.taps[n - 1] = side;
  return f;
}

std::vector<double> dirichlet_approx_1d(std::span<const double> x, double sigma, TapConvention conv) {
  return cyclic_convolve(dirichlet_approx_filter(x.size(), sigma, conv), x);
}

bool dirichlet_approx_stable(double sigma) {
  return sigma <= 1.0 / (2.0 * std::numbers::sqrt2);
}

double dirichlet_ratio(double sigma) {
  // 1 + (1 - sqrt(1 + 8 s^2)) / (4 s^2), rewritten without the cancellation.
  return 1.0 - 2.0 / (1.0 + std::sqrt(1.0 + 8.0 * sigma * sigma));
}

PeriodicFilter1D dirichlet_exact_1d(std::size_t n, double sigma) {
  if (n < 2) throw InvalidArgument("periodic filter needs n >= 2");
  if (!(sigma >= 0.0)) throw InvalidArgument("sigma must be >= 0");
  const double r = dirichlet_ratio(sigma);
  const double N = static_cast<double>(n);
  const double front = (1.0 - r) / ((1.0 + r) * (1.0 - std::pow(r, N)));
  PeriodicFilter1D f{std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const double k = static_cast<double>(i);
    f.taps[i] = front * (std::pow(r, k) + std::pow(r, N - k));
  }
  return f;
}

PeriodicFilter1D dirichlet_exact_1d_spectral(std::size_t n, double sigma) {
  if (n < 2) throw InvalidArgument("periodic filter needs n >= 2");
  const double N = static_cast<double>(n);
  std::vector<double> W(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double omega = 2.0 * std::numbers::pi * static_cast<double>(k) / N;
    W[k] = 1.0 / (1.0 + 4.0 * sigma * sigma * (1.0 - std::cos(omega)));
  }
  // W is real and even, so the inverse DFT is a cosine sum.
  PeriodicFilter1D f{std::vector<double>(n)};
  std::vector<double> terms(n);
  for (std::size_t m = 0; m < n; ++m) {
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t phase = (k * m) % n;
      terms[k] = W[k] * std::cos(2.0 * std::numbers::pi * static_cast<double>(phase) / N);
    }
    f.taps[m] = pairwise_sum(terms) / N;
  }
  return f;
}

double frequency_response(const PeriodicFilter1D& f, std::size_t k) {
  const double N = static_cast<double>(f.size());
  std::vector<double> re(f.size());
  for (std::size_t m = 0; m < f.size(); ++m) {
    const std::size_t phase = (k * m) % f.size();
    re[m] = f.taps[m] * std::cos(2.0 * std::numbers::pi * static_cast<double>(phase) / N);
  }
  return pairwise_sum(re);
}

std::vector<double> cyclic_convolve(const PeriodicFilter1D& f, std::span<const double> x) {
  const std::size_t n = x.size();
  if (f.size() != n) throw DimensionMismatch("filter length differs from signal length");
  std::vector<double> out(n, 0.0);
  std::vector<std::size_t> support;
  for (std::size_t m = 0; m < n; ++m) {
    if (f.taps[m] != 0.0) support.push_back(m);
  }
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t m : support) acc += f.taps[m] * x[(i + n - m) % n];
    out[i] = acc;
  }
  return out;
}

ErrorBoundReport filter_error_bound_report(std::span<const double> x, std::span<const double> exact,
                                           std::span<const double> approx, double sigma,
                                           double lipschitz) {
  if (x.size() != exact.size() || x.size() != approx.size()) {
    throw DimensionMismatch("error bound inputs differ in size");
  }
  std::vector<double> gap(x.size());
  std::vector<double> residual(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    gap[i] = exact[i] - approx[i];
    residual[i] = exact[i] - x[i];
  }
  ErrorBoundReport rep;
  rep.lhs = std::sqrt(sum_of_squares(gap));
  rep.rhs = sigma * sigma * lipschitz * std::sqrt(sum_of_squares(residual));
  // The l2 case is an equality, and exact - approx cancels to about eps ||x||,
  // so the margin has to cover that rounding as well as the relative slack.
  const double rounding = 16.0 * std::numeric_limits<double>::epsilon() * std::sqrt(sum_of_squares(x));
  rep.holds = rep.lhs <= rep.rhs * (1.0 + 1e-12) + rounding;
  return rep;
}

ErrorBoundReport filter_error_bound_report(const Image& x, const Image& exact, const Image& approx,
                                           double sigma, double lipschitz) {
  if (!x.same_shape(exact) || !x.same_shape(approx)) {
    throw DimensionMismatch("error bound inputs differ in shape");
  }
  return filter_error_bound_report(x.pixels(), exact.pixels(), approx.pixels(), sigma, lipschitz);
}

}  // namespace kbridge
