#include "kbridge/solvers.hpp"

#include <algorithm>
#include <cmath>

#include "kbridge/errors.hpp"
#include "kbridge/filters.hpp"
#include "kbridge/graph.hpp"
#include "kbridge/numeric.hpp"

namespace kbridge {

namespace {

void validate(const MapProblem& p) {
  if (!(p.sigma > 0.0) || !std::isfinite(p.sigma)) throw InvalidArgument("sigma must be positive");
  if (p.observed.empty()) throw InvalidArgument("observed image is empty");
  if (p.kind == RegularizerKind::Pairwise && !p.stencil.is_symmetric()) {
    throw InvalidArgument("stencil must be symmetric");
  }
}

// Regularizer gradient for the pairwise form. With periodic neighbors the
// ordered pairs (i, i+o) and (i+o, i) both occur, so each unordered pair is
// evaluated once and h rho'(d) is scattered to both ends. Reflected
// neighbors break that mirror symmetry at the borders, so there every ordered
// pair is scattered with half weight instead.
void pairwise_gradient(const MapProblem& p, const Image& u, Image& g) {
  if (p.boundary != Boundary::Periodic) {
    const Image reg = pairwise_energy_gradient(u, p.loss, p.stencil, p.boundary);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += reg[i];
    return;
  }
  const int w = u.width();
  const int h = u.height();
  std::vector<Stencil::Tap> half;
  for (const auto& tap : p.stencil.taps()) {
    if (tap.di > 0 || (tap.di == 0 && tap.dj > 0)) half.push_back(tap);
  }
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double ui = u(r, c);
      for (const auto& tap : half) {
        const int r2 = resolve_index(r + tap.di, h, p.boundary);
        const int c2 = resolve_index(c + tap.dj, w, p.boundary);
        const double d = ui - u(r2, c2);
        if (d == 0.0) continue;
        const double f = tap.weight * rho_prime(p.loss, d);
        g(r, c) += f;
        g(r2, c2) -= f;
      }
    }
  }
}

double inf_norm(const Image& g) { return max_abs(g.pixels()); }

SolveResult run(const MapProblem& p, const SolverConfig& cfg, double momentum) {
  validate(p);
  if (cfg.max_iters <= 0) throw InvalidArgument("max_iters must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("momentum must lie in [0, 1)");
  SolveResult res;
  res.step = cfg.step > 0.0 ? cfg.step : default_step(p);
  res.momentum = momentum;
  const double tol = cfg.grad_tol > 0.0 ? cfg.grad_tol : default_grad_tol(p, cfg);
  {
    const double hsum = p.kind == RegularizerKind::Pointwise ? 1.0 : p.stencil.total_weight();
    const double lip = 1.0 / (p.sigma * p.sigma) + hsum * curvature_bound(p.loss);
    if (res.step * lip > 2.0) {
      res.warnings.push_back("step exceeds the stability bound 2 / L; iterates may diverge");
    }
  }

  Image u = p.observed;
  Image prev = u;
  for (int it = 0; it < cfg.max_iters; ++it) {
    const Image g = gradient(p, u);
    const double gn = inf_norm(g);
    ++res.iterations;
    TraceRow row{it, 0.0, gn};
    if (cfg.objective_log) row.objective = objective(p, u);
    if (!std::isfinite(gn) || !std::isfinite(row.objective)) throw DivergenceError(it);
    res.trace.push_back(row);
    if (gn <= tol) {
      res.converged = true;
      break;
    }
    if (momentum == 0.0) {
      for (std::size_t i = 0; i < u.size(); ++i) u[i] -= res.step * g[i];
    } else {
      for (std::size_t i = 0; i < u.size(); ++i) {
        const double next = u[i] - res.step * g[i] + momentum * (u[i] - prev[i]);
        prev[i] = u[i];
        u[i] = next;
      }
    }
  }
  for (double v : u.pixels()) {
    if (!std::isfinite(v)) throw DivergenceError(res.iterations);
  }
  res.u = std::move(u);
  return res;
}

}  // namespace

double objective(const MapProblem& p, const Image& u) {
  validate(p);
  if (!u.same_shape(p.observed)) throw DimensionMismatch("iterate and observed image differ in shape");
  std::vector<double> diff(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) diff[i] = u[i] - p.observed[i];
  const double data = sum_of_squares(diff) / (2.0 * p.sigma * p.sigma);
  if (p.kind == RegularizerKind::Pointwise) {
    std::vector<double> terms(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) terms[i] = rho(p.loss, u[i]);
    return data + pairwise_sum(terms);
  }
  return data + pairwise_energy(u, p.loss, p.stencil, p.boundary);
}

Image gradient(const MapProblem& p, const Image& u) {
  validate(p);
  if (!u.same_shape(p.observed)) throw DimensionMismatch("iterate and observed image differ in shape");
  Image g(u.width(), u.height(), 0.0);
  const double inv = 1.0 / (p.sigma * p.sigma);
  for (std::size_t i = 0; i < u.size(); ++i) g[i] = (u[i] - p.observed[i]) * inv;
  if (p.kind == RegularizerKind::Pointwise) {
    for (std::size_t i = 0; i < u.size(); ++i) g[i] += rho_prime(p.loss, u[i]);
  } else {
    pairwise_gradient(p, u, g);
  }
  return g;
}

double default_step(const MapProblem& p) {
  const double hsum = p.kind == RegularizerKind::Pointwise ? 1.0 : p.stencil.total_weight();
  const double L = hsum * curvature_bound(p.loss);
  const double s2 = p.sigma * p.sigma;
  return s2 / (1.0 + s2 * L);
}

double auto_momentum(const MapProblem& p, double step) {
  const double q = std::sqrt(std::clamp(step / (p.sigma * p.sigma), 0.0, 1.0));
  return (1.0 - q) * (1.0 - q);
}

double default_grad_tol(const MapProblem& p, const SolverConfig& cfg) {
  double range = cfg.dynamic_range;
  if (!(range > 0.0)) range = p.observed.max_value() - p.observed.min_value();
  if (!(range > 0.0)) range = 1.0;
  return 1e-6 / (p.sigma * p.sigma) * range;
}

SolveResult solve_gd(const MapProblem& p, const SolverConfig& cfg) { return run(p, cfg, 0.0); }

SolveResult solve_heavy_ball(const MapProblem& p, const SolverConfig& cfg) {
  if (!is_convex(p.loss) && cfg.momentum != 0.0) {
    SolveResult res = run(p, cfg, 0.0);
    res.warnings.push_back("loss '" + to_string(p.loss) +
                           "' is not convex; ran plain gradient descent");
    return res;
  }
  double momentum = cfg.momentum;
  if (momentum < 0.0) momentum = auto_momentum(p, cfg.step > 0.0 ? cfg.step : default_step(p));
  return run(p, cfg, momentum);
}

MapVsOneShotReport map_vs_oneshot_report(const MapProblem& p, const SolverConfig& cfg, double peak) {
  MapVsOneShotReport rep;
  rep.map = solve_heavy_ball(p, cfg);
  FilterConfig fc;
  fc.sigma = p.sigma;
  fc.stencil = p.stencil;
  fc.boundary = p.boundary;
  fc.threads = cfg.threads;
  rep.first = first_order_filter(p.observed, p.loss, fc);
  rep.second = second_order_filter(p.observed, p.loss, fc);
  rep.psnr_first = psnr(rep.first, rep.map.u, peak);
  rep.psnr_second = psnr(rep.second, rep.map.u, peak);
  return rep;
}

}  // namespace kbridge
