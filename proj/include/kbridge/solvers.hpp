#pragma once

#include <string>
#include <vector>

#include "kbridge/image.hpp"
#include "kbridge/losses.hpp"

namespace kbridge {

/// Pairwise: phi(u) = 1/2 sum_i sum_j h_ij rho(u_i - u_j) over the stencil.
/// Pointwise: phi(u) = sum_i rho(u_i), e.g. 1/2 ||u||^2 for the l2 prior.
enum class RegularizerKind { Pairwise, Pointwise };

struct MapProblem {
  Image observed;
  ScalarLoss loss = ScalarLoss::quadratic();
  Stencil stencil;
  double sigma = 1.0;
  RegularizerKind kind = RegularizerKind::Pairwise;
  Boundary boundary = Boundary::Reflect;
};

struct SolverConfig {
  int max_iters = 5000;
  /// 0 selects sigma^2 / (1 + sigma^2 L) with L = sum(h) * curvature bound.
  double step = 0.0;
  /// Negative selects auto_momentum for the chosen step.
  double momentum = 0.9;
  /// 0 selects 1e-6 / sigma^2 * dynamic_range.
  double grad_tol = 0.0;
  /// 0 takes max - min of the observed image (1 when the image is flat).
  double dynamic_range = 0.0;
  bool objective_log = true;
  /// Worker threads for the one-shot filters in map_vs_oneshot_report.
  int threads = 1;
};

struct TraceRow {
  int iter = 0;
  double objective = 0.0;
  double grad_norm = 0.0;  // infinity norm
};

struct SolveResult {
  Image u;
  std::vector<TraceRow> trace;
  /// Gradient evaluations performed, including the final converged one.
  int iterations = 0;
  bool converged = false;
  double step = 0.0;
  double momentum = 0.0;
  std::vector<std::string> warnings;
};

double objective(const MapProblem& p, const Image& u);
Image gradient(const MapProblem& p, const Image& u);

double default_step(const MapProblem& p);
/// (1 - sqrt(step / sigma^2))^2: the heavy-ball momentum matched to `step`
/// when the smallest Hessian eigenvalue is the data term's 1 / sigma^2.
double auto_momentum(const MapProblem& p, double step);
double default_grad_tol(const MapProblem& p, const SolverConfig& cfg);

/// Gradient descent from the observed image. Throws DivergenceError when an
/// iterate stops being finite.
SolveResult solve_gd(const MapProblem& p, const SolverConfig& cfg);
/// Heavy-ball: u+ = u - step grad + momentum (u - u-). Non-convex losses run
/// plain GD instead and record a warning.
SolveResult solve_heavy_ball(const MapProblem& p, const SolverConfig& cfg);

struct MapVsOneShotReport {
  SolveResult map;
  Image first;
  Image second;
  double psnr_first = 0.0;
  double psnr_second = 0.0;
};

/// Converged MAP solution against the first- and second-order one-shot
/// filters on the same problem. Uses heavy-ball for convex losses.
MapVsOneShotReport map_vs_oneshot_report(const MapProblem& p, const SolverConfig& cfg,
                                         double peak = 255.0);

}  // namespace kbridge
