#include "kbridge/experiments.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <map>
#include <tuple>

#include "kbridge/errors.hpp"
#include "kbridge/filters.hpp"
#include "kbridge/kernels.hpp"
#include "kbridge/numeric.hpp"
#include "kbridge/solvers.hpp"

namespace kbridge {

namespace {

constexpr double kUnit = 255.0;
// MAP references stop at ||grad|| <= kMapGradTol / sigma^2, i.e. pixel errors
// near 1e-12. At small sigma the one-shot filters agree with the MAP solution
// to ~1e-9, so a looser stop would make the PSNR measure the solver instead.
constexpr double kMapGradTol = 1e-12;

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Image to_unit(const Image& img) {
  Image out = img;
  for (auto& v : out.pixels()) v /= kUnit;
  return out;
}

void check_spec(const ExperimentSpec& spec) {
  if (spec.inputs.empty()) throw InvalidArgument("experiment needs at least one input image");
  if (spec.sigmas.empty()) throw InvalidArgument("sigma grid is empty");
  for (std::size_t i = 0; i < spec.sigmas.size(); ++i) {
    if (!(spec.sigmas[i] > 0.0)) throw InvalidArgument("sigma grid values must be positive");
    if (i > 0 && !(spec.sigmas[i] > spec.sigmas[i - 1])) {
      throw InvalidArgument("sigma grid must be strictly increasing");
    }
  }
  if (spec.noise_sigma && !(*spec.noise_sigma >= 0.0)) throw InvalidArgument("noise sigma must be >= 0");
}

void check_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw InvalidArgument("alpha grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0)) throw InvalidArgument("alpha grid values must be positive");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw InvalidArgument("alpha grid must be strictly increasing");
  }
}

// Noisy observation on the unit range. The seed is mixed with the image index
// and sigma index so every (image, sigma) pair draws independent noise.
Image noisy_unit(const ImageSource& src, std::size_t image_index, std::size_t sigma_index,
                 double sigma8, const ExperimentSpec& spec) {
  const double noise = spec.noise_sigma ? *spec.noise_sigma : sigma8;
  const std::uint64_t seed = spec.seed * 0x9E3779B97F4A7C15ULL + image_index * 1000003ULL + sigma_index;
  return to_unit(add_gaussian_noise(src.image, NoiseSpec{noise, seed}));
}

ScalarKernel range_kernel(const std::string& family, double gamma) {
  if (family == "gaussian") return ScalarKernel::gaussian(gamma);
  if (family == "boxcar") return ScalarKernel::boxcar(gamma);
  if (family == "exponential") return ScalarKernel::exponential(gamma);
  throw InvalidArgument("bilateral inversion kernel must be gaussian, boxcar or exponential (got '" +
                        family + "')");
}

void mark_best(std::vector<SweepRow>& rows, std::size_t begin) {
  std::size_t bf = begin;
  std::size_t bs = begin;
  for (std::size_t i = begin; i < rows.size(); ++i) {
    // Strict comparison keeps the earliest (smallest alpha) row on ties.
    if (rows[i].psnr_first > rows[bf].psnr_first) bf = i;
    if (rows[i].psnr_second > rows[bs].psnr_second) bs = i;
  }
  rows[bf].best_first = true;
  rows[bs].best_second = true;
}

}  // namespace

std::vector<ImageSource> corpus_sources(int size, std::uint64_t seed) {
  std::vector<ImageSource> out;
  for (const auto& name : corpus_names()) out.push_back({name, make_corpus_image(name, size, seed)});
  return out;
}

std::vector<double> default_alpha_multipliers(std::size_t points) { return logspace(0.1, 10.0, points); }

SweepResult run_huber_tv_experiment(const ExperimentSpec& spec, double gamma, int radius) {
  check_spec(spec);
  SweepResult result{"huber-tv", {}, spec.include_timing};
  const ScalarLoss loss = ScalarLoss::huber(gamma / kUnit);
  const Stencil stencil = make_box_stencil(radius);
  for (std::size_t ii = 0; ii < spec.inputs.size(); ++ii) {
    for (std::size_t si = 0; si < spec.sigmas.size(); ++si) {
      const double sigma8 = spec.sigmas[si];
      MapProblem p;
      p.observed = noisy_unit(spec.inputs[ii], ii, si, sigma8, spec);
      p.loss = loss;
      p.stencil = stencil;
      p.sigma = sigma8 / kUnit;
      p.boundary = Boundary::Periodic;
      SolverConfig cfg;
      cfg.objective_log = false;
      cfg.threads = spec.threads;
      cfg.dynamic_range = 1.0;
      cfg.momentum = -1.0;
      cfg.grad_tol = kMapGradTol / (p.sigma * p.sigma);

      SweepRow row;
      row.image = spec.inputs[ii].name;
      row.family = "huber";
      row.sigma = sigma8;
      auto t0 = Clock::now();
      const SolveResult map = solve_heavy_ball(p, cfg);
      row.runtime_ms_reference = elapsed_ms(t0);
      FilterConfig fc;
      fc.sigma = p.sigma;
      fc.stencil = stencil;
      fc.boundary = p.boundary;
      fc.threads = spec.threads;
      t0 = Clock::now();
      const Image first = first_order_filter(p.observed, loss, fc);
      row.runtime_ms_first = elapsed_ms(t0);
      t0 = Clock::now();
      const Image second = second_order_filter(p.observed, loss, fc);
      row.runtime_ms_second = elapsed_ms(t0);
      row.psnr_first = psnr(first, map.u, 1.0);
      row.psnr_second = psnr(second, map.u, 1.0);
      row.iterations_first = map.iterations;
      row.iterations_second = map.iterations;
      row.best_first = row.best_second = true;
      result.rows.push_back(row);
    }
  }
  return result;
}

SweepResult run_bilateral_inversion_experiment(const ExperimentSpec& spec,
                                               const std::string& kernel_family, double gamma) {
  check_spec(spec);
  const auto grid = spec.alpha_multipliers.empty() ? default_alpha_multipliers() : spec.alpha_multipliers;
  check_grid(grid);

  const ScalarKernel k = range_kernel(kernel_family, gamma / kUnit);
  const ScalarLoss loss1 = loss_from_kernel_first_order(k);
  const ScalarLoss loss2 = loss_from_kernel_second_order(k);
  const Stencil stencil = make_gaussian_stencil(5, 10.0);

  SweepResult result{"bilateral-inversion", {}, spec.include_timing};
  for (std::size_t ii = 0; ii < spec.inputs.size(); ++ii) {
    for (std::size_t si = 0; si < spec.sigmas.size(); ++si) {
      const double sigma8 = spec.sigmas[si];
      const double sigma = sigma8 / kUnit;
      const Image x = noisy_unit(spec.inputs[ii], ii, si, sigma8, spec);

      const auto solve = [&](const ScalarLoss& loss, double& ms, int& iters) {
        MapProblem p;
        p.observed = x;
        p.loss = loss;
        p.stencil = stencil;
        p.sigma = sigma;
        p.boundary = Boundary::Periodic;
        SolverConfig cfg;
        cfg.objective_log = false;
        cfg.dynamic_range = 1.0;
        cfg.momentum = -1.0;
        cfg.grad_tol = kMapGradTol / (p.sigma * p.sigma);
        const auto start = Clock::now();
        SolveResult r = solve_heavy_ball(p, cfg);
        ms = elapsed_ms(start);
        iters = r.iterations;
        return std::move(r.u);
      };
      SweepRow proto;
      proto.image = spec.inputs[ii].name;
      proto.family = kernel_family;
      proto.sigma = sigma8;
      const Image map1 = solve(loss1, proto.runtime_ms_first, proto.iterations_first);
      const Image map2 = solve(loss2, proto.runtime_ms_second, proto.iterations_second);

      const std::size_t begin = result.rows.size();
      for (double m : grid) {
        SweepRow row = proto;
        row.multiplier = m;
        row.alpha = m * sigma * sigma;
        FilterConfig fc;
        fc.alpha = row.alpha;
        fc.stencil = stencil;
        fc.boundary = Boundary::Periodic;
        fc.threads = spec.threads;
        const auto t0 = Clock::now();
        const Image reference = division_free_bilateral(x, k, fc);
        row.runtime_ms_reference = elapsed_ms(t0);
        row.psnr_first = psnr(map1, reference, 1.0);
        row.psnr_second = psnr(map2, reference, 1.0);
        result.rows.push_back(row);
      }
      mark_best(result.rows, begin);
    }
  }
  return result;
}

std::vector<BestPoint> best_points(const SweepResult& result) {
  std::vector<BestPoint> out;
  std::map<std::tuple<std::string, std::string, double>, std::size_t> index;
  for (const auto& row : result.rows) {
    const auto key = std::make_tuple(row.image, row.family, row.sigma);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      out.push_back({row.image, row.family, row.sigma, 0.0, 0.0, 0.0, 0.0});
    }
    auto& bp = out[it->second];
    if (row.best_first) {
      bp.alpha_first = row.alpha;
      bp.psnr_first = row.psnr_first;
    }
    if (row.best_second) {
      bp.alpha_second = row.alpha;
      bp.psnr_second = row.psnr_second;
    }
  }
  return out;
}

DirichletFigure run_dirichlet_figure(std::size_t n, const std::vector<double>& sigmas) {
  if (sigmas.empty()) throw InvalidArgument("sigma grid is empty");
  DirichletFigure fig;
  fig.n = n;
  fig.sigmas = sigmas;
  for (double s : sigmas) {
    const auto exact = dirichlet_exact_1d(n, s);
    const auto approx = dirichlet_approx_filter(n, s);
    fig.l1_distance.push_back(l1_filter_distance(exact.taps, approx.taps));
    fig.exact.push_back(exact.taps);
    fig.approx.push_back(approx.taps);
  }
  return fig;
}

CsvTable to_table(const SweepResult& result) {
  CsvTable t;
  const bool has_alpha = result.experiment == "bilateral-inversion";
  t.header = {"image", "family", "sigma"};
  if (has_alpha) {
    t.header.emplace_back("alpha");
    t.header.emplace_back("alpha_over_sigma2");
  }
  for (const char* c : {"psnr_first", "psnr_second"}) t.header.emplace_back(c);
  if (has_alpha) {
    t.header.emplace_back("best_first");
    t.header.emplace_back("best_second");
    t.header.emplace_back("iterations_first");
    t.header.emplace_back("iterations_second");
  } else {
    t.header.emplace_back("iterations_map");
  }
  if (result.include_timing) {
    for (const char* c : {"runtime_ms_reference", "runtime_ms_first", "runtime_ms_second"}) {
      t.header.emplace_back(c);
    }
  }
  for (const auto& r : result.rows) {
    std::vector<CsvCell> row{r.image, r.family, r.sigma};
    if (has_alpha) {
      row.emplace_back(r.alpha);
      row.emplace_back(r.multiplier);
    }
    row.emplace_back(r.psnr_first);
    row.emplace_back(r.psnr_second);
    if (has_alpha) {
      row.emplace_back(static_cast<long long>(r.best_first));
      row.emplace_back(static_cast<long long>(r.best_second));
      row.emplace_back(static_cast<long long>(r.iterations_first));
      row.emplace_back(static_cast<long long>(r.iterations_second));
    } else {
      row.emplace_back(static_cast<long long>(r.iterations_first));
    }
    if (result.include_timing) {
      row.emplace_back(r.runtime_ms_reference);
      row.emplace_back(r.runtime_ms_first);
      row.emplace_back(r.runtime_ms_second);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable to_table(const DirichletFigure& fig) {
  CsvTable t;
  t.header = {"sigma", "n", "exact", "approx", "l1_distance"};
  for (std::size_t s = 0; s < fig.sigmas.size(); ++s) {
    for (std::size_t i = 0; i < fig.n; ++i) {
      t.rows.push_back({fig.sigmas[s], static_cast<long long>(i), fig.exact[s][i], fig.approx[s][i],
                        fig.l1_distance[s]});
    }
  }
  return t;
}

namespace {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
  if (ec != std::errc()) throw Error("number formatting failed");
  return std::string(buf.data(), ptr);
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string format_csv(const CsvTable& table) {
  std::string out;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) out += ',';
    out += quote(table.header[i]);
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      std::visit(
          [&out](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::string>) out += quote(v);
            else if constexpr (std::is_same_v<T, double>) out += format_double(v);
            else out += std::to_string(v);
          },
          row[i]);
    }
    out += '\n';
  }
  return out;
}

void emit_csv(const CsvTable& table, const std::string& path) {
  if (path.empty()) throw IoError("empty output path");
  write_file_atomic(path, format_csv(table));
}

}  // namespace kbridge
