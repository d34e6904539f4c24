#include "kbridge/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kbridge/errors.hpp"

namespace kbridge {

namespace {

double pairwise_sum_impl(const double* p, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += p[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum_impl(p, half) + pairwise_sum_impl(p + half, n - half);
}

struct Panel {
  double a, b, fa, fm, fb, whole;
};

double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive(const std::function<double(double)>& f, const Panel& p, double tol,
                int depth, int max_depth) {
  const double m = 0.5 * (p.a + p.b);
  const double lm = 0.5 * (p.a + m);
  const double rm = 0.5 * (m + p.b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(p.a, m, p.fa, flm, p.fm);
  const double right = simpson(m, p.b, p.fm, frm, p.fb);
  const double delta = left + right - p.whole;
  if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  if (depth >= max_depth) {
    throw QuadratureError("quadrature did not converge on [" + std::to_string(p.a) + ", " +
                          std::to_string(p.b) + "]");
  }
  return adaptive(f, {p.a, m, p.fa, flm, p.fm, left}, 0.5 * tol, depth + 1, max_depth) +
         adaptive(f, {m, p.b, p.fm, frm, p.fb, right}, 0.5 * tol, depth + 1, max_depth);
}

}  // namespace

double pairwise_sum(std::span<const double> values) {
  return pairwise_sum_impl(values.data(), values.size());
}

double sum_of_squares(std::span<const double> values) {
  std::vector<double> sq(values.size());
  std::transform(values.begin(), values.end(), sq.begin(), [](double v) { return v * v; });
  return pairwise_sum(sq);
}

double max_abs(std::span<const double> values) {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

namespace {

// Endpoint values come from just inside [a, b], so a jump sitting exactly
// on an endpoint contributes its one-sided limit.
double integrate_open(const std::function<double(double)>& f, double a, double b,
                      const QuadratureOptions& opts) {
  const double fa = f(std::nextafter(a, b));
  const double fb = f(std::nextafter(b, a));
  const double fm = f(0.5 * (a + b));
  const Panel root{a, b, fa, fm, fb, simpson(a, b, fa, fm, fb)};
  const double value = adaptive(f, root, opts.abs_tol, 0, opts.max_depth);
  if (!std::isfinite(value)) throw QuadratureError("quadrature produced a non-finite value");
  return value;
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b,
                 const QuadratureOptions& opts) {
  if (a == b) return 0.0;
  if (b < a) return -integrate(f, b, a, opts);
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const Panel root{a, b, fa, fm, fb, simpson(a, b, fa, fm, fb)};
  const double value = adaptive(f, root, opts.abs_tol, 0, opts.max_depth);
  if (!std::isfinite(value)) throw QuadratureError("quadrature produced a non-finite value");
  return value;
}

double integrate_piecewise(const std::function<double(double)>& f, double a, double b,
                           std::span<const double> breakpoints,
                           const QuadratureOptions& opts) {
  if (b < a) return -integrate_piecewise(f, b, a, breakpoints, opts);
  std::vector<double> cuts{a};
  for (double p : breakpoints) {
    if (p > a && p < b) cuts.push_back(p);
  }
  std::sort(cuts.begin() + 1, cuts.end());
  cuts.push_back(b);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] > cuts[i]) total += integrate_open(f, cuts[i], cuts[i + 1], opts);
  }
  return total;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  out.back() = hi;
  return out;
}

std::vector<double> logspace(double lo, double hi, std::size_t n) {
  if (lo <= 0.0 || hi <= 0.0) throw InvalidArgument("logspace bounds must be positive");
  auto exps = linspace(std::log(lo), std::log(hi), n);
  for (auto& e : exps) e = std::exp(e);
  if (n > 0) {
    exps.front() = lo;
    exps.back() = hi;
  }
  return exps;
}

}  // namespace kbridge
