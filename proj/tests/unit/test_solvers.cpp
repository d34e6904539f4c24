#include <doctest.h>

#include <cmath>
#include <random>

#include "kbridge/errors.hpp"
#include "kbridge/filters.hpp"
#include "kbridge/numeric.hpp"
#include "kbridge/solvers.hpp"

using namespace kbridge;

namespace {

Image random_image(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  Image img(w, h);
  for (auto& v : img.pixels()) v = d(gen);
  return img;
}

MapProblem dirichlet_problem(const Image& x, double sigma) {
  MapProblem p;
  p.observed = x;
  p.loss = ScalarLoss::dirichlet();
  p.stencil = make_box_stencil_1d(1);
  p.sigma = sigma;
  p.boundary = Boundary::Periodic;
  return p;
}

MapProblem huber_problem(const Image& x, double sigma) {
  MapProblem p;
  p.observed = x;
  p.loss = ScalarLoss::huber(5.0);
  p.stencil = make_box_stencil(1);
  p.sigma = sigma;
  return p;
}

}  // namespace

TEST_CASE("objective") {
  const Image flat(6, 6, 5.0);
  auto p = huber_problem(flat, 2.0);
  CHECK(objective(p, flat) == 0.0);
  CHECK(max_abs(gradient(p, flat).pixels()) == 0.0);

  const Image x = random_image(6, 5, 1, 0.0, 255.0);
  const Image u = random_image(6, 5, 2, 0.0, 255.0);
  p = huber_problem(x, 3.0);
  Image xs = x, us = u;
  for (auto& v : xs.pixels()) v += 40.0;
  for (auto& v : us.pixels()) v += 40.0;
  auto ps = huber_problem(xs, 3.0);
  CHECK(objective(ps, us) == doctest::Approx(objective(p, u)).epsilon(1e-12));

  // Hand count on a 2x1 periodic problem: both ordered pairs see d = 4, so
  // phi = 1/2 (rho(4) + rho(-4)) per offset direction.
  MapProblem tiny;
  tiny.observed = Image(2, 1, std::vector<double>{0.0, 0.0});
  tiny.loss = ScalarLoss::quadratic();
  tiny.stencil = make_box_stencil_1d(1);
  tiny.sigma = 1.0;
  tiny.boundary = Boundary::Periodic;
  const Image v(2, 1, std::vector<double>{4.0, 0.0});
  // data 8; each pixel has two neighbours (both the other pixel): 1/2 * 4 * 8 = 16
  CHECK(objective(tiny, v) == doctest::Approx(8.0 + 16.0));
}

TEST_CASE("gradient matches finite differences") {
  const Image x = random_image(8, 8, 3, 0.0, 255.0);
  const Image u = random_image(8, 8, 4, 0.0, 255.0);
  for (auto b : {Boundary::Reflect, Boundary::Periodic}) {
    auto p = huber_problem(x, 10.0);
    p.boundary = b;
    p.stencil = make_gaussian_stencil(2, 1.5);
    const Image g = gradient(p, u);
    double sum = 0.0, data = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      Image up = u, um = u;
      const double h = 1e-4;
      up[i] += h;
      um[i] -= h;
      const double fd = (objective(p, up) - objective(p, um)) / (2 * h);
      CHECK(std::abs(fd - g[i]) <= 1e-6 * std::max(1.0, std::abs(fd)));
      sum += g[i];
      data += (u[i] - x[i]) / 100.0;
    }
    CHECK(sum == doctest::Approx(data).epsilon(1e-9));
  }
}

TEST_CASE("l2 problem reaches the closed form") {
  MapProblem p;
  p.observed = random_image(9, 7, 5, -2.0, 2.0);
  p.loss = ScalarLoss::quadratic();
  p.kind = RegularizerKind::Pointwise;
  p.sigma = 0.5;
  SolverConfig cfg;
  cfg.grad_tol = 1e-12;
  const auto r = solve_gd(p, cfg);
  CHECK(r.converged);
  const Image ref = l2_exact(p.observed, 0.5);
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(r.u[i] - ref[i]) <= 1e-8);
}

TEST_CASE("zero regularizer stops after one gradient") {
  MapProblem p;
  p.observed = random_image(5, 5, 6);
  p.loss = ScalarLoss::quadratic().scaled(0.0);
  p.stencil = make_box_stencil(1);
  p.sigma = 1.0;
  const auto r = solve_gd(p, SolverConfig{});
  CHECK(r.iterations == 1);
  CHECK(r.u == p.observed);
}

TEST_CASE("gradient descent decreases a convex objective") {
  const auto p = huber_problem(random_image(10, 10, 7, 0.0, 255.0), 3.0);
  SolverConfig cfg;
  cfg.max_iters = 200;
  const auto r = solve_gd(p, cfg);
  for (std::size_t i = 1; i < r.trace.size(); ++i) {
    CHECK(r.trace[i].objective <= r.trace[i - 1].objective * (1 + 1e-14));
  }
  CHECK(r.warnings.empty());
}

TEST_CASE("dirichlet problem: heavy-ball hits the exact filter faster") {
  const std::size_t n = 64;
  const double sigma = 0.35;
  const Image x = random_image(static_cast<int>(n), 1, 8, -1.0, 1.0);
  const auto p = dirichlet_problem(x, sigma);
  SolverConfig cfg;
  cfg.grad_tol = 1e-9;
  cfg.max_iters = 20000;
  cfg.step = default_step(p);
  const auto gd = solve_gd(p, cfg);
  cfg.momentum = -1.0;
  const auto hb = solve_heavy_ball(p, cfg);
  const auto ref = cyclic_convolve(dirichlet_exact_1d(n, sigma), x.pixels());
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(std::abs(hb.u[i] - ref[i]) <= 1e-7);
    CHECK(std::abs(gd.u[i] - ref[i]) <= 1e-7);
  }
  CHECK(hb.converged);
  CHECK(hb.iterations < gd.iterations);
  CHECK(hb.momentum == doctest::Approx(auto_momentum(p, cfg.step)));
}

TEST_CASE("zero momentum reproduces gradient descent bit for bit") {
  const auto p = huber_problem(random_image(12, 9, 9, 0.0, 255.0), 4.0);
  SolverConfig cfg;
  cfg.max_iters = 50;
  cfg.momentum = 0.0;
  const auto a = solve_gd(p, cfg);
  const auto b = solve_heavy_ball(p, cfg);
  CHECK(a.u == b.u);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) CHECK(a.trace[i].objective == b.trace[i].objective);
}

TEST_CASE("shift equivariance") {
  const Image x = random_image(8, 8, 10, 0.0, 255.0);
  Image xs = x;
  for (auto& v : xs.pixels()) v += 30.0;
  SolverConfig cfg;
  cfg.grad_tol = 1e-9;
  const auto a = solve_heavy_ball(huber_problem(x, 3.0), cfg);
  const auto b = solve_heavy_ball(huber_problem(xs, 3.0), cfg);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(b.u[i] - a.u[i] == doctest::Approx(30.0).epsilon(1e-9));
}

TEST_CASE("divergence and validation") {
  const auto p = huber_problem(random_image(8, 8, 11, 0.0, 255.0), 10.0);
  SolverConfig cfg;
  cfg.step = 1e4;
  cfg.momentum = 0.0;
  std::vector<std::string> warnings;
  CHECK_THROWS_WITH_AS(solve_gd(p, cfg), doctest::Contains("divergence at iteration"), DivergenceError);
  cfg.max_iters = 0;
  CHECK_THROWS_AS(solve_gd(p, cfg), InvalidArgument);
  cfg.max_iters = 10;
  cfg.step = 0.0;
  cfg.momentum = 1.0;
  CHECK_THROWS_AS(solve_heavy_ball(p, cfg), InvalidArgument);
  auto bad = p;
  bad.sigma = 0.0;
  CHECK_THROWS_AS(objective(bad, p.observed), InvalidArgument);
}

TEST_CASE("unsafe step is flagged") {
  const auto p = huber_problem(random_image(8, 8, 12, 0.0, 255.0), 1.0);
  SolverConfig cfg;
  cfg.max_iters = 2;
  cfg.step = 2.5;
  cfg.momentum = 0.0;
  CHECK_FALSE(solve_gd(p, cfg).warnings.empty());
}

TEST_CASE("non-convex losses fall back to gradient descent") {
  auto p = huber_problem(random_image(8, 8, 13, 0.0, 255.0), 2.0);
  p.loss = ScalarLoss::welsch(20.0);
  SolverConfig cfg;
  cfg.max_iters = 300;
  const auto r = solve_heavy_ball(p, cfg);
  CHECK(r.momentum == 0.0);
  CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("one-shot filters approach the MAP solution for small sigma") {
  for (const auto& name : corpus_names()) {
    MapProblem p;
    p.observed = add_gaussian_noise(make_corpus_image(name, 32), {10.0, 3});
    p.loss = ScalarLoss::huber(5.0);
    p.stencil = make_box_stencil(5);
    p.sigma = 0.01;
    const auto rep = map_vs_oneshot_report(p, SolverConfig{});
    CHECK(rep.psnr_first > 60.0);
    CHECK(rep.psnr_second > 60.0);
  }
}
