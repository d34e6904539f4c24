#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace kbridge {

/// Pairwise (tree) summation. Fixed association order, so results do not
/// depend on how callers chunk the work.
double pairwise_sum(std::span<const double> values);
double sum_of_squares(std::span<const double> values);
double max_abs(std::span<const double> values);

struct QuadratureOptions {
  double abs_tol = 1e-10;
  int max_depth = 40;
};

/// Adaptive Simpson with Richardson correction on [a, b]. Throws
/// QuadratureError when an interval fails to converge at max_depth.
double integrate(const std::function<double(double)>& f, double a, double b,
                 const QuadratureOptions& opts = {});

/// Same, but splits [a, b] at every breakpoint strictly inside it so
/// discontinuities never sit inside a Simpson panel.
double integrate_piecewise(const std::function<double(double)>& f, double a, double b,
                           std::span<const double> breakpoints,
                           const QuadratureOptions& opts = {});

/// Evenly spaced values from lo to hi inclusive.
std::vector<double> linspace(double lo, double hi, std::size_t n);
/// Log-spaced values from lo to hi inclusive.
std::vector<double> logspace(double lo, double hi, std::size_t n);

}  // namespace kbridge
