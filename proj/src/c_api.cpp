#include "kbridge/kbridge.h"

#include <cmath>
#include <exception>
#include <memory>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "kbridge/errors.hpp"
#include "kbridge/experiments.hpp"
#include "kbridge/filters.hpp"
#include "kbridge/graph.hpp"
#include "kbridge/image.hpp"
#include "kbridge/kernels.hpp"
#include "kbridge/losses.hpp"
#include "kbridge/solvers.hpp"

struct kb_image {
  kbridge::Image img;
};
struct kb_loss {
  kbridge::ScalarLoss loss;
};
struct kb_kernel {
  kbridge::ScalarKernel k;
};
struct kb_stencil {
  kbridge::Stencil s;
};
struct kb_trace {
  std::vector<kbridge::TraceRow> rows;
  int iterations = 0;
  bool converged = false;
  double step = 0.0;
  double momentum = 0.0;
  std::vector<std::string> warnings;
};
struct kb_buffer {
  std::string text;
};

namespace {

thread_local std::string g_last_error;

kb_status fail(kb_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

// Exception types map one-to-one onto status codes. Order matters: the more
// derived numeric errors are caught first.
template <class F>
kb_status guard(F&& body) {
  try {
    body();
    return KB_OK;
  } catch (const kbridge::DivergenceError& e) {
    return fail(KB_ERR_DIVERGENCE, e.what());
  } catch (const kbridge::QuadratureError& e) {
    return fail(KB_ERR_QUADRATURE, e.what());
  } catch (const kbridge::NumericError& e) {
    return fail(KB_ERR_NUMERIC, e.what());
  } catch (const kbridge::InvalidArgument& e) {
    return fail(KB_ERR_INVALID_ARGUMENT, e.what());
  } catch (const kbridge::DimensionMismatch& e) {
    return fail(KB_ERR_DIMENSION_MISMATCH, e.what());
  } catch (const kbridge::ParseError& e) {
    return fail(KB_ERR_PARSE, e.what());
  } catch (const kbridge::IoError& e) {
    return fail(KB_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(KB_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(KB_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(KB_ERR_INTERNAL, "unknown error");
  }
}

template <class T>
void need(const T* p, const char* what) {
  if (p == nullptr) throw kbridge::InvalidArgument(std::string(what) + " is null");
}

kbridge::Boundary boundary(int periodic) {
  return periodic ? kbridge::Boundary::Periodic : kbridge::Boundary::Reflect;
}

kbridge::FilterConfig filter_config(const kb_stencil* s, const kb_filter_params* p) {
  need(p, "filter params");
  kbridge::FilterConfig cfg;
  cfg.sigma = p->sigma;
  cfg.alpha = p->alpha;
  if (s != nullptr) cfg.stencil = s->s;
  cfg.patch_radius = p->patch_radius;
  cfg.boundary = boundary(p->periodic);
  cfg.threads = p->threads;
  return cfg;
}

template <class Make>
kb_status emit_image(kb_image** out, Make&& make) {
  return guard([&] {
    need(out, "output");
    *out = nullptr;
    auto img = std::make_unique<kb_image>(kb_image{make()});
    *out = img.release();
  });
}

std::vector<std::string> split_names(const char* list) {
  std::vector<std::string> names;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) names.push_back(item);
  }
  return names;
}

}  // namespace

extern "C" {

const char* kb_version(void) { return "0.1.0"; }

const char* kb_last_error(void) { return g_last_error.c_str(); }

const char* kb_status_name(kb_status status) {
  switch (status) {
    case KB_OK: return "ok";
    case KB_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case KB_ERR_DIMENSION_MISMATCH: return "dimension_mismatch";
    case KB_ERR_PARSE: return "parse";
    case KB_ERR_NUMERIC: return "numeric";
    case KB_ERR_QUADRATURE: return "quadrature";
    case KB_ERR_DIVERGENCE: return "divergence";
    case KB_ERR_IO: return "io";
    case KB_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

kb_status kb_image_create(int width, int height, const double* data, kb_image** out) {
  return emit_image(out, [&] {
    if (width <= 0 || height <= 0) throw kbridge::InvalidArgument("image size must be positive");
    if (data == nullptr) return kbridge::Image(width, height);
    const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    return kbridge::Image(width, height, std::vector<double>(data, data + n));
  });
}

kb_status kb_image_load_pgm(const char* path, kb_image** out) {
  return emit_image(out, [&] {
    need(path, "path");
    return kbridge::load_pgm_file(path);
  });
}

kb_status kb_image_save_pgm(const kb_image* img, const char* path) {
  return guard([&] {
    need(img, "image");
    need(path, "path");
    kbridge::save_pgm_file(img->img, path);
  });
}

kb_status kb_corpus_image(const char* name, int size, uint64_t seed, kb_image** out) {
  return emit_image(out, [&] {
    need(name, "name");
    return kbridge::make_corpus_image(name, size, seed);
  });
}

const char* kb_corpus_names(void) {
  static const std::string names = [] {
    std::string s;
    for (const auto& n : kbridge::corpus_names()) s += (s.empty() ? "" : " ") + n;
    return s;
  }();
  return names.c_str();
}

void kb_image_free(kb_image* img) { delete img; }
int kb_image_width(const kb_image* img) { return img ? img->img.width() : 0; }
int kb_image_height(const kb_image* img) { return img ? img->img.height() : 0; }
const double* kb_image_data(const kb_image* img) { return img ? img->img.data().data() : nullptr; }

kb_status kb_image_scale(const kb_image* img, double factor, kb_image** out) {
  return emit_image(out, [&] {
    need(img, "image");
    if (!std::isfinite(factor)) throw kbridge::InvalidArgument("scale factor must be finite");
    kbridge::Image r = img->img;
    for (auto& v : r.pixels()) v *= factor;
    return r;
  });
}

kb_status kb_add_noise(const kb_image* img, double sigma, uint64_t seed, kb_image** out) {
  return emit_image(out, [&] {
    need(img, "image");
    return kbridge::add_gaussian_noise(img->img, kbridge::NoiseSpec{sigma, seed});
  });
}

kb_status kb_psnr(const kb_image* a, const kb_image* b, double peak, double* out) {
  return guard([&] {
    need(a, "image");
    need(b, "image");
    need(out, "output");
    *out = kbridge::psnr(a->img, b->img, peak);
  });
}

kb_status kb_loss_parse(const char* spec, kb_loss** out) {
  return guard([&] {
    need(spec, "spec");
    need(out, "output");
    *out = new kb_loss{kbridge::parse_loss(spec)};
  });
}

void kb_loss_free(kb_loss* loss) { delete loss; }

kb_status kb_loss_rescale(const kb_loss* loss, double factor, kb_loss** out) {
  return guard([&] {
    need(loss, "loss");
    need(out, "output");
    *out = new kb_loss{kbridge::rescale_units(loss->loss, factor)};
  });
}

kb_status kb_loss_eval(const kb_loss* loss, double t, double* rho, double* rho_prime,
                       double* rho_second) {
  return guard([&] {
    need(loss, "loss");
    if (rho) *rho = kbridge::rho(loss->loss, t);
    if (rho_prime) *rho_prime = kbridge::rho_prime(loss->loss, t);
    if (rho_second) *rho_second = kbridge::rho_second(loss->loss, t);
  });
}

int kb_loss_is_convex(const kb_loss* loss) { return loss && kbridge::is_convex(loss->loss) ? 1 : 0; }

kb_status kb_kernel_parse(const char* spec, kb_kernel** out) {
  return guard([&] {
    need(spec, "spec");
    need(out, "output");
    *out = new kb_kernel{kbridge::parse_kernel(spec)};
  });
}

void kb_kernel_free(kb_kernel* k) { delete k; }

kb_status kb_kernel_rescale(const kb_kernel* k, double factor, kb_kernel** out) {
  return guard([&] {
    need(k, "kernel");
    need(out, "output");
    *out = new kb_kernel{kbridge::rescale_units(k->k, factor)};
  });
}

kb_status kb_kernel_eval(const kb_kernel* k, double t, double* out) {
  return guard([&] {
    need(k, "kernel");
    need(out, "output");
    *out = kbridge::kernel_eval(k->k, t);
  });
}

int kb_kernel_non_psd(const kb_kernel* k) { return k && k->k.non_psd() ? 1 : 0; }

kb_status kb_kernel_from_loss(const kb_loss* loss, int order, const kb_scale* scale,
                              kb_kernel** out) {
  return guard([&] {
    need(loss, "loss");
    need(out, "output");
    kbridge::TranslationScale ts;
    if (scale) ts = {scale->sigma, scale->alpha, scale->h};
    if (order == 1) {
      *out = new kb_kernel{kbridge::kernel_from_loss_first_order(loss->loss, ts)};
    } else if (order == 2) {
      *out = new kb_kernel{kbridge::kernel_from_loss_second_order(loss->loss, ts)};
    } else {
      throw kbridge::InvalidArgument("order must be 1 or 2");
    }
  });
}

kb_status kb_loss_from_kernel(const kb_kernel* k, int order, kb_loss** out) {
  return guard([&] {
    need(k, "kernel");
    need(out, "output");
    if (order == 1) {
      *out = new kb_loss{kbridge::loss_from_kernel_first_order(k->k)};
    } else if (order == 2) {
      *out = new kb_loss{kbridge::loss_from_kernel_second_order(k->k)};
    } else {
      throw kbridge::InvalidArgument("order must be 1 or 2");
    }
  });
}

kb_status kb_stencil_box(int radius, kb_stencil** out) {
  return guard([&] {
    need(out, "output");
    *out = new kb_stencil{kbridge::make_box_stencil(radius)};
  });
}

kb_status kb_stencil_gaussian(int radius, double spatial_sigma, kb_stencil** out) {
  return guard([&] {
    need(out, "output");
    *out = new kb_stencil{kbridge::make_gaussian_stencil(radius, spatial_sigma)};
  });
}

void kb_stencil_free(kb_stencil* s) { delete s; }

void kb_filter_params_default(kb_filter_params* p) {
  if (p) *p = kb_filter_params{1.0, 1.0, 0, 0, 1};
}

kb_status kb_filter_normalized(const kb_image* x, const kb_kernel* k, const kb_stencil* s,
                               const kb_filter_params* p, kb_image** out) {
  return emit_image(out, [&] {
    need(x, "image");
    need(k, "kernel");
    return kbridge::kernel_filter_normalized(x->img, k->k, filter_config(s, p));
  });
}

kb_status kb_filter_bilateral_df(const kb_image* x, const kb_kernel* k, const kb_stencil* s,
                                 const kb_filter_params* p, kb_image** out) {
  return emit_image(out, [&] {
    need(x, "image");
    need(k, "kernel");
    return kbridge::division_free_bilateral(x->img, k->k, filter_config(s, p));
  });
}

kb_status kb_filter_first_order(const kb_image* x, const kb_loss* loss, const kb_stencil* s,
                                const kb_filter_params* p, kb_image** out) {
  return emit_image(out, [&] {
    need(x, "image");
    need(loss, "loss");
    return kbridge::first_order_filter(x->img, loss->loss, filter_config(s, p));
  });
}

kb_status kb_filter_second_order(const kb_image* x, const kb_loss* loss, const kb_stencil* s,
                                 const kb_filter_params* p, kb_image** out) {
  return emit_image(out, [&] {
    need(x, "image");
    need(loss, "loss");
    return kbridge::second_order_filter(x->img, loss->loss, filter_config(s, p));
  });
}

kb_status kb_filter_l2(const kb_image* x, double sigma, int exact, kb_image** out) {
  return emit_image(out, [&] {
    need(x, "image");
    return exact ? kbridge::l2_exact(x->img, sigma) : kbridge::l2_shrinkage(x->img, sigma);
  });
}

kb_status kb_filter_dirichlet_rows(const kb_image* x, double sigma, int exact, int half_taps,
                                   kb_image** out) {
  return emit_image(out, [&] {
    need(x, "image");
    const auto& img = x->img;
    const auto w = static_cast<std::size_t>(img.width());
    const auto conv =
        half_taps ? kbridge::TapConvention::Half : kbridge::TapConvention::Full;
    const kbridge::PeriodicFilter1D f =
        exact ? kbridge::dirichlet_exact_1d(w, sigma) : kbridge::dirichlet_approx_filter(w, sigma, conv);
    kbridge::Image r(img.width(), img.height());
    for (int row = 0; row < img.height(); ++row) {
      const auto line = img.pixels().subspan(static_cast<std::size_t>(row) * w, w);
      const auto y = kbridge::cyclic_convolve(f, line);
      for (std::size_t c = 0; c < w; ++c) r(row, static_cast<int>(c)) = y[c];
    }
    return r;
  });
}

void kb_solver_params_default(kb_solver_params* p) {
  if (p) *p = kb_solver_params{5000, 0.0, 0.9, 0.0, 0.0, 0, 0, 0};
}

kb_status kb_solve_map(const kb_image* observed, const kb_loss* loss, const kb_stencil* s,
                       double sigma, const kb_solver_params* p, kb_image** out, kb_trace** trace) {
  return guard([&] {
    need(observed, "image");
    need(loss, "loss");
    need(p, "solver params");
    need(out, "output");
    *out = nullptr;
    if (trace) *trace = nullptr;
    kbridge::MapProblem prob;
    prob.observed = observed->img;
    prob.loss = loss->loss;
    if (s) prob.stencil = s->s;
    prob.sigma = sigma;
    prob.kind = p->pointwise ? kbridge::RegularizerKind::Pointwise : kbridge::RegularizerKind::Pairwise;
    prob.boundary = boundary(p->periodic);
    kbridge::SolverConfig cfg;
    cfg.max_iters = p->max_iters;
    cfg.step = p->step;
    cfg.momentum = p->momentum;
    cfg.grad_tol = p->grad_tol;
    cfg.dynamic_range = p->dynamic_range;
    kbridge::SolveResult res = p->heavy_ball ? kbridge::solve_heavy_ball(prob, cfg)
                                             : kbridge::solve_gd(prob, cfg);
    auto img = std::make_unique<kb_image>(kb_image{std::move(res.u)});
    if (trace) {
      *trace = new kb_trace{std::move(res.trace), res.iterations, res.converged,
                            res.step,            res.momentum,   std::move(res.warnings)};
    }
    *out = img.release();
  });
}

void kb_trace_free(kb_trace* t) { delete t; }
size_t kb_trace_size(const kb_trace* t) { return t ? t->rows.size() : 0; }

kb_status kb_trace_row(const kb_trace* t, size_t i, int* iter, double* objective, double* grad_norm) {
  return guard([&] {
    need(t, "trace");
    if (i >= t->rows.size()) throw kbridge::InvalidArgument("trace row out of range");
    const auto& r = t->rows[i];
    if (iter) *iter = r.iter;
    if (objective) *objective = r.objective;
    if (grad_norm) *grad_norm = r.grad_norm;
  });
}

int kb_trace_iterations(const kb_trace* t) { return t ? t->iterations : 0; }
int kb_trace_converged(const kb_trace* t) { return t && t->converged ? 1 : 0; }
double kb_trace_step(const kb_trace* t) { return t ? t->step : 0.0; }
double kb_trace_momentum(const kb_trace* t) { return t ? t->momentum : 0.0; }
size_t kb_trace_warning_count(const kb_trace* t) { return t ? t->warnings.size() : 0; }
const char* kb_trace_warning(const kb_trace* t, size_t i) {
  return t && i < t->warnings.size() ? t->warnings[i].c_str() : nullptr;
}

kb_status kb_graph_check(const kb_image* x, const kb_kernel* k, const kb_stencil* s,
                         int patch_radius, double sigma, kb_graph_report* out) {
  return guard([&] {
    need(x, "image");
    need(k, "kernel");
    need(s, "stencil");
    need(out, "output");
    const auto A = kbridge::build_affinity(x->img, k->k, s->s, patch_radius);
    const auto B = kbridge::make_laplacians(A);
    kb_graph_report r{};
    r.nodes = static_cast<int>(A.n());
    r.alpha_exact = kbridge::alpha_exact(A);
    r.alpha_mean_degree = kbridge::alpha_mean_degree(A);
    r.alpha_rel_gap = std::abs(r.alpha_exact - r.alpha_mean_degree) / r.alpha_exact;
    r.residual_exact = kbridge::frobenius_residual(A, r.alpha_exact);
    r.residual_mean_degree = kbridge::frobenius_residual(A, r.alpha_mean_degree);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(A.n());
    r.row_sum_max_dev = (B.W * ones - ones).cwiseAbs().maxCoeff();
    r.null_norm_max = (B.L_norm * ones).cwiseAbs().maxCoeff();
    r.null_unnorm_max = (B.L_unnorm * ones).cwiseAbs().maxCoeff();
    r.degree_identity_max =
        kbridge::degree_identity_report(A, r.alpha_mean_degree, sigma, 1.0).max_abs_mismatch;
    *out = r;
  });
}

void kb_experiment_params_default(kb_experiment_params* p) {
  if (!p) return;
  *p = kb_experiment_params{};
  p->name = "huber-tv";
  p->family = "all";
  p->seed = 1;
  p->size = 64;
  p->noise_sigma = -1.0;
  p->n = 256;
  p->threads = 1;
}

kb_status kb_experiment_csv(const kb_experiment_params* p, kb_buffer** out) {
  return guard([&] {
    need(p, "experiment params");
    need(p->name, "experiment name");
    need(out, "output");
    *out = nullptr;
    const std::string name = p->name;
    std::string text;
    if (name == "dirichlet") {
      std::vector<double> sigmas{0.05, 0.1, 0.2, 0.35, 0.5};
      if (p->sigma_count > 0) sigmas.assign(p->sigmas, p->sigmas + p->sigma_count);
      if (p->n < 3) throw kbridge::InvalidArgument("dirichlet signal length must be >= 3");
      text = kbridge::format_csv(
          kbridge::to_table(kbridge::run_dirichlet_figure(static_cast<std::size_t>(p->n), sigmas)));
    } else if (name == "huber-tv" || name == "bilateral-inversion") {
      kbridge::ExperimentSpec spec;
      spec.seed = p->seed;
      spec.threads = p->threads;
      spec.include_timing = p->include_timing != 0;
      if (p->sigma_count > 0) spec.sigmas.assign(p->sigmas, p->sigmas + p->sigma_count);
      if (p->noise_sigma >= 0.0) spec.noise_sigma = p->noise_sigma;
      if (p->alpha_points > 0) spec.alpha_multipliers = kbridge::default_alpha_multipliers(p->alpha_points);
      if (p->input) {
        spec.inputs.push_back({p->input, kbridge::load_pgm_file(p->input)});
      } else {
        const auto all = kbridge::corpus_sources(p->size);
        if (p->images) {
          for (const auto& want : split_names(p->images)) {
            bool found = false;
            for (const auto& src : all) {
              if (src.name == want) {
                spec.inputs.push_back(src);
                found = true;
              }
            }
            if (!found) throw kbridge::InvalidArgument("unknown corpus image: " + want);
          }
        } else {
          spec.inputs = all;
        }
      }
      if (name == "huber-tv") {
        const double gamma = p->gamma > 0.0 ? p->gamma : 5.0;
        text = kbridge::format_csv(kbridge::to_table(kbridge::run_huber_tv_experiment(spec, gamma)));
      } else {
        const double gamma = p->gamma > 0.0 ? p->gamma : 20.0;
        const std::string family = p->family ? p->family : "all";
        std::vector<std::string> families;
        if (family == "all") {
          families = {"gaussian", "boxcar", "exponential"};
        } else {
          families = {family};
        }
        kbridge::SweepResult merged;
        for (const auto& f : families) {
          auto r = kbridge::run_bilateral_inversion_experiment(spec, f, gamma);
          merged.experiment = r.experiment;
          merged.include_timing = r.include_timing;
          for (auto& row : r.rows) merged.rows.push_back(std::move(row));
        }
        text = kbridge::format_csv(kbridge::to_table(merged));
      }
    } else {
      throw kbridge::InvalidArgument("unknown experiment: " + name);
    }
    *out = new kb_buffer{std::move(text)};
  });
}

const char* kb_buffer_data(const kb_buffer* b) { return b ? b->text.data() : nullptr; }
size_t kb_buffer_size(const kb_buffer* b) { return b ? b->text.size() : 0; }
void kb_buffer_free(kb_buffer* b) { delete b; }

kb_status kb_write_file_atomic(const char* path, const char* data, size_t size) {
  return guard([&] {
    need(path, "path");
    if (size > 0) need(data, "data");
    kbridge::write_file_atomic(path, std::string_view(data ? data : "", size));
  });
}

}  // extern "C"
