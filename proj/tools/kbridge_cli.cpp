// Command-line front end. Talks to the library only through kbridge.h.

#include <kbridge/kbridge.h>

#include <CLI11.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

const char* const kGrammar = R"(Loss grammar (--loss):
  family[:key=value[,key=value]...]
  families: quadratic | l2 | dirichlet | tv | huber | welsch | lorentzian |
            clipped | exponential | barron
  keys:     gamma, beta (barron; -inf allowed), eps (tv, exponential), weight
  examples: huber:gamma=5   barron:beta=0,gamma=1   tv   welsch:gamma=2

Kernel grammar (--kernel):
  constant | boxcar:gamma=G | gaussian:gamma=G | cauchy:gamma=G |
  exponential:gamma=G

Intensity units: denoise and graph-check divide pixels, --sigma, --gamma and
loss/kernel gammas by --range (default 255) before filtering and scale the
result back. Pass --range 1 to work in raw units.

Exit codes: 0 success, 1 runtime or numeric failure, 2 usage error.)";

// ---- diagnostics -----------------------------------------------------------

std::string quote_value(const std::string& v) {
  bool plain = !v.empty();
  for (char c : v) {
    if (c == ' ' || c == '"' || c == '=' || c == '\n' || c == '\t') plain = false;
  }
  if (plain) return v;
  std::string out = "\"";
  for (char c : v) {
    if (c == '"' || c == '\\') out += '\\';
    out += (c == '\n') ? ' ' : c;
  }
  return out + "\"";
}

using KeyValues = std::vector<std::pair<std::string, std::string>>;

void diag(const KeyValues& kv) {
  std::string line;
  for (const auto& [k, v] : kv) {
    if (!line.empty()) line += ' ';
    line += k + "=" + quote_value(v);
  }
  std::cerr << line << '\n';
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

bool g_verbose = false;

void say(const std::string& prose) {
  if (g_verbose) std::cerr << "# " << prose << '\n';
}

// A library call failed. Carries enough context for the error line.
struct Failure {
  std::string stage;
  kb_status status;
  std::string message;
};

// A flag combination the parser cannot reject on its own.
struct UsageFailure {
  std::string message;
};

void check(kb_status s, const std::string& stage) {
  if (s != KB_OK) throw Failure{stage, s, kb_last_error()};
}

// ---- handles ---------------------------------------------------------------

struct ImageDel {
  void operator()(kb_image* p) const { kb_image_free(p); }
};
struct LossDel {
  void operator()(kb_loss* p) const { kb_loss_free(p); }
};
struct KernelDel {
  void operator()(kb_kernel* p) const { kb_kernel_free(p); }
};
struct StencilDel {
  void operator()(kb_stencil* p) const { kb_stencil_free(p); }
};
struct TraceDel {
  void operator()(kb_trace* p) const { kb_trace_free(p); }
};
struct BufferDel {
  void operator()(kb_buffer* p) const { kb_buffer_free(p); }
};
using ImagePtr = std::unique_ptr<kb_image, ImageDel>;
using LossPtr = std::unique_ptr<kb_loss, LossDel>;
using KernelPtr = std::unique_ptr<kb_kernel, KernelDel>;
using StencilPtr = std::unique_ptr<kb_stencil, StencilDel>;
using TracePtr = std::unique_ptr<kb_trace, TraceDel>;
using BufferPtr = std::unique_ptr<kb_buffer, BufferDel>;

// "corpus:NAME" selects a generated test image, anything else is a PGM path.
ImagePtr load_input(const std::string& spec, int size) {
  kb_image* raw = nullptr;
  if (spec.rfind("corpus:", 0) == 0) {
    check(kb_corpus_image(spec.substr(7).c_str(), size, 7, &raw), "load");
  } else {
    check(kb_image_load_pgm(spec.c_str(), &raw), "load");
  }
  return ImagePtr(raw);
}

ImagePtr scaled(const kb_image* img, double factor, const std::string& stage) {
  kb_image* raw = nullptr;
  check(kb_image_scale(img, factor, &raw), stage);
  return ImagePtr(raw);
}

// Folds --gamma / --beta into a family string, refusing duplicates.
std::string with_params(std::string spec, const std::optional<double>& gamma,
                        const std::optional<double>& beta) {
  auto add = [&](const char* key, double v) {
    if (spec.find(std::string(key) + "=") != std::string::npos) {
      throw UsageFailure{std::string("--") + key + " conflicts with " + key + "= in '" + spec + "'"};
    }
    spec += (spec.find(':') == std::string::npos ? ":" : ",");
    spec += std::string(key) + "=" + fmt(v);
  };
  if (gamma) add("gamma", *gamma);
  if (beta) add("beta", *beta);
  return spec;
}

LossPtr make_loss(const std::string& spec, double unit_factor) {
  kb_loss* raw = nullptr;
  check(kb_loss_parse(spec.c_str(), &raw), "parse-loss");
  LossPtr loss(raw);
  if (unit_factor == 1.0) return loss;
  check(kb_loss_rescale(loss.get(), unit_factor, &raw), "parse-loss");
  return LossPtr(raw);
}

KernelPtr make_kernel(const std::string& spec, double unit_factor) {
  kb_kernel* raw = nullptr;
  check(kb_kernel_parse(spec.c_str(), &raw), "parse-kernel");
  KernelPtr k(raw);
  if (unit_factor == 1.0) return k;
  check(kb_kernel_rescale(k.get(), unit_factor, &raw), "parse-kernel");
  return KernelPtr(raw);
}

StencilPtr make_stencil(int radius, const std::optional<double>& spatial_sigma) {
  kb_stencil* raw = nullptr;
  if (spatial_sigma) {
    check(kb_stencil_gaussian(radius, *spatial_sigma, &raw), "stencil");
  } else {
    check(kb_stencil_box(radius, &raw), "stencil");
  }
  return StencilPtr(raw);
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  check(kb_write_file_atomic(path.c_str(), text.data(), text.size()), "write");
}

// ---- options shared by several subcommands ---------------------------------

struct Common {
  int threads = 1;
};

struct NoiseArgs {
  std::string input, output;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  int size = 64;
};

struct DenoiseArgs {
  std::string method, input, output;
  double sigma = 10.0;
  std::optional<double> gamma, beta, alpha, spatial_sigma;
  int radius = 1;
  int patch_radius = 0;
  std::string loss = "huber:gamma=5";
  std::string kernel = "gaussian:gamma=20";
  std::string boundary = "reflect";
  std::string taps = "full";
  double range = 255.0;
  int size = 64;
  int max_iters = 5000;
  double step = 0.0;
  double momentum = 0.9;
  double grad_tol = 0.0;
  bool pointwise = false;
  std::string trace;
};

struct TranslateArgs {
  std::optional<std::string> loss, kernel;
  std::string direction;
  std::string order = "both";
  std::optional<double> gamma, beta;
  double sigma = 1.0, alpha = 2.0, h = 1.0;
  double t_min = 0.0;
  std::optional<double> t_max;
  int points = 101;
  std::string out;
};

struct GraphArgs {
  std::string input = "corpus:blocks";
  int size = 16;
  std::string kernel = "gaussian:gamma=20";
  std::optional<double> gamma, spatial_sigma;
  int radius = 2;
  int patch_radius = 0;
  double sigma = 10.0;
  double range = 255.0;
  std::string out;
};

struct ExperimentArgs {
  std::string name;
  std::uint64_t seed = 1;
  std::string out;
  int size = 64;
  std::string images;
  std::string input;
  std::vector<double> sigmas;
  std::optional<double> noise_sigma;
  std::string family = "all";
  std::optional<double> gamma;
  std::size_t alpha_points = 0;
  int n = 256;
  bool timing = false;
};

// ---- subcommands -----------------------------------------------------------

int run_add_noise(const NoiseArgs& a) {
  auto img = load_input(a.input, a.size);
  kb_image* raw = nullptr;
  check(kb_add_noise(img.get(), a.sigma, a.seed, &raw), "noise");
  ImagePtr noisy(raw);
  check(kb_image_save_pgm(noisy.get(), a.output.c_str()), "write");
  diag({{"status", "ok"}, {"subcommand", "add-noise"}, {"sigma", fmt(a.sigma)},
        {"seed", std::to_string(a.seed)}, {"output", a.output}});
  return 0;
}

int run_denoise(const DenoiseArgs& a, const Common& c) {
  const double u = 1.0 / a.range;
  const double sigma = a.sigma * u;
  const bool periodic = a.boundary == "periodic";
  const std::string& m = a.method;
  const bool uses_loss = m == "first-order" || m == "second-order" || m == "map-gd" || m == "map-heavy-ball";
  const bool uses_kernel = m == "nlm" || m == "bilateral-df";
  if (a.beta && !uses_loss) throw UsageFailure{"--beta only applies to loss-based methods"};

  auto input = load_input(a.input, a.size);
  auto x = scaled(input.get(), u, "load");
  say("denoising " + a.input + " with " + m);

  ImagePtr result;
  TracePtr trace;
  kb_image* raw = nullptr;
  KeyValues extra;

  kb_filter_params fp;
  kb_filter_params_default(&fp);
  fp.sigma = sigma;
  fp.alpha = a.alpha ? *a.alpha : sigma * sigma;
  fp.patch_radius = a.patch_radius;
  fp.periodic = periodic ? 1 : 0;
  fp.threads = c.threads;

  if (uses_kernel) {
    auto k = make_kernel(with_params(a.kernel, a.gamma, std::nullopt), u);
    auto s = make_stencil(a.radius, a.spatial_sigma);
    if (m == "nlm") {
      check(kb_filter_normalized(x.get(), k.get(), s.get(), &fp, &raw), "filter");
    } else {
      check(kb_filter_bilateral_df(x.get(), k.get(), s.get(), &fp, &raw), "filter");
      extra.push_back({"alpha", fmt(fp.alpha)});
    }
  } else if (uses_loss) {
    auto loss = make_loss(with_params(a.loss, a.gamma, a.beta), u);
    auto s = make_stencil(a.radius, a.spatial_sigma);
    if (m == "first-order") {
      check(kb_filter_first_order(x.get(), loss.get(), s.get(), &fp, &raw), "filter");
    } else if (m == "second-order") {
      check(kb_filter_second_order(x.get(), loss.get(), s.get(), &fp, &raw), "filter");
    } else {
      kb_solver_params sp;
      kb_solver_params_default(&sp);
      sp.max_iters = a.max_iters;
      sp.step = a.step;
      sp.momentum = a.momentum;
      sp.grad_tol = a.grad_tol;
      sp.heavy_ball = m == "map-heavy-ball" ? 1 : 0;
      sp.pointwise = a.pointwise ? 1 : 0;
      sp.periodic = periodic ? 1 : 0;
      kb_trace* traw = nullptr;
      check(kb_solve_map(x.get(), loss.get(), s.get(), sigma, &sp, &raw, &traw), "solve");
      trace.reset(traw);
      extra.push_back({"iterations", std::to_string(kb_trace_iterations(traw))});
      extra.push_back({"converged", std::to_string(kb_trace_converged(traw))});
      extra.push_back({"step", fmt(kb_trace_step(traw))});
      extra.push_back({"momentum", fmt(kb_trace_momentum(traw))});
      for (std::size_t i = 0; i < kb_trace_warning_count(traw); ++i) {
        diag({{"warning", kb_trace_warning(traw, i)}, {"subcommand", "denoise"}});
      }
    }
  } else if (m == "l2-shrink") {
    check(kb_filter_l2(x.get(), sigma, 0, &raw), "filter");
  } else {
    const bool exact = m == "dirichlet-exact";
    if (!exact && sigma >= 1.0 / (2.0 * std::sqrt(2.0)) && a.taps == "full") {
      diag({{"warning", "sigma beyond the stability limit of the 3-tap filter"},
            {"subcommand", "denoise"}});
    }
    check(kb_filter_dirichlet_rows(x.get(), sigma, exact ? 1 : 0, a.taps == "half" ? 1 : 0,
                                   &raw),
          "filter");
  }
  result.reset(raw);

  // The trace goes out first so a failing image write never leaves only half
  // the outputs looking fresh.
  if (trace && !a.trace.empty()) {
    std::string csv = "iter,objective,grad_norm\n";
    for (std::size_t i = 0; i < kb_trace_size(trace.get()); ++i) {
      int it = 0;
      double obj = 0.0, gn = 0.0;
      check(kb_trace_row(trace.get(), i, &it, &obj, &gn), "trace");
      csv += std::to_string(it) + "," + fmt(obj) + "," + fmt(gn) + "\n";
    }
    write_text(a.trace, csv);
  }
  auto out = scaled(result.get(), a.range, "write");
  check(kb_image_save_pgm(out.get(), a.output.c_str()), "write");

  KeyValues kv{{"status", "ok"}, {"subcommand", "denoise"}, {"method", m}, {"sigma", fmt(a.sigma)}};
  kv.insert(kv.end(), extra.begin(), extra.end());
  kv.push_back({"output", a.output});
  diag(kv);
  return 0;
}

int run_translate(const TranslateArgs& a) {
  if (a.loss.has_value() == a.kernel.has_value()) {
    throw UsageFailure{"translate needs exactly one of --loss or --kernel"};
  }
  const std::string direction =
      a.direction.empty() ? (a.loss ? "loss-to-kernel" : "kernel-to-loss") : a.direction;
  if ((direction == "loss-to-kernel") != a.loss.has_value()) {
    throw UsageFailure{"--direction " + direction + " does not match the given --" +
                       (a.loss ? std::string("loss") : std::string("kernel"))};
  }
  if (a.beta && !a.loss) throw UsageFailure{"--beta only applies to --loss"};
  const bool first = a.order != "2";
  const bool second = a.order != "1";
  const kb_scale scale{a.sigma, a.alpha, a.h};
  const double factor = 2.0 * a.sigma * a.sigma / a.alpha * a.h;
  if (!(factor > 0.0)) throw UsageFailure{"translation scale (2 sigma^2 / alpha) h must be positive"};

  KernelPtr k1, k2;
  double gamma_hint = 1.0;
  if (a.loss) {
    auto loss = make_loss(with_params(*a.loss, a.gamma, a.beta), 1.0);
    kb_kernel* raw = nullptr;
    check(kb_kernel_from_loss(loss.get(), 1, &scale, &raw), "translate");
    k1.reset(raw);
    check(kb_kernel_from_loss(loss.get(), 2, &scale, &raw), "translate");
    k2.reset(raw);
    if (kb_kernel_non_psd(k2.get())) {
      diag({{"warning", "second-order kernel takes negative values"}, {"subcommand", "translate"}});
    }
  } else {
    auto k = make_kernel(with_params(*a.kernel, a.gamma, std::nullopt), 1.0);
    kb_kernel* raw = nullptr;
    // Same kernel on both sides; a unit rescale is the cheapest copy.
    check(kb_kernel_rescale(k.get(), 1.0, &raw), "translate");
    k1.reset(raw);
    k2 = std::move(k);
  }
  if (a.gamma) gamma_hint = *a.gamma;
  const double t_max = a.t_max ? *a.t_max : 10.0 * gamma_hint;
  if (!(t_max > a.t_min)) throw UsageFailure{"--t-max must exceed --t-min"};

  LossPtr r1, r2;
  kb_loss* lraw = nullptr;
  if (first) {
    check(kb_loss_from_kernel(k1.get(), 1, &lraw), "integrate");
    r1.reset(lraw);
  }
  if (second) {
    check(kb_loss_from_kernel(k2.get(), 2, &lraw), "integrate");
    r2.reset(lraw);
  }

  std::string csv = "t,k_first,k_second,rho_first,rho_second\n";
  for (int i = 0; i < a.points; ++i) {
    const double t = a.points == 1 ? a.t_min
                                   : a.t_min + (a.t_max.value_or(t_max) - a.t_min) * i / (a.points - 1);
    std::string row = fmt(t);
    double v = 0.0;
    row += ",";
    if (first) {
      check(kb_kernel_eval(k1.get(), t, &v), "evaluate");
      row += fmt(v);
    }
    row += ",";
    if (second) {
      check(kb_kernel_eval(k2.get(), t, &v), "evaluate");
      row += fmt(v);
    }
    row += ",";
    if (first) {
      check(kb_loss_eval(r1.get(), t, &v, nullptr, nullptr), "evaluate");
      row += fmt(v / factor);
    }
    row += ",";
    if (second) {
      check(kb_loss_eval(r2.get(), t, &v, nullptr, nullptr), "evaluate");
      row += fmt(v / factor);
    }
    csv += row + "\n";
  }
  write_text(a.out, csv);
  diag({{"status", "ok"}, {"subcommand", "translate"}, {"direction", direction},
        {"points", std::to_string(a.points)}});
  return 0;
}

int run_graph_check(const GraphArgs& a) {
  const double u = 1.0 / a.range;
  auto input = load_input(a.input, a.size);
  auto x = scaled(input.get(), u, "load");
  auto k = make_kernel(with_params(a.kernel, a.gamma, std::nullopt), u);
  auto s = make_stencil(a.radius, a.spatial_sigma);
  kb_graph_report r{};
  check(kb_graph_check(x.get(), k.get(), s.get(), a.patch_radius, a.sigma * u, &r), "graph");
  std::string csv = "metric,value\n";
  auto row = [&](const char* name, double v) { csv += std::string(name) + "," + fmt(v) + "\n"; };
  csv += "nodes," + std::to_string(r.nodes) + "\n";
  row("alpha_exact", r.alpha_exact);
  row("alpha_mean_degree", r.alpha_mean_degree);
  row("alpha_rel_gap", r.alpha_rel_gap);
  row("residual_alpha_exact", r.residual_exact);
  row("residual_alpha_mean_degree", r.residual_mean_degree);
  row("row_sum_max_dev", r.row_sum_max_dev);
  row("null_space_norm_max", r.null_norm_max);
  row("null_space_unnorm_max", r.null_unnorm_max);
  row("degree_identity_max_mismatch", r.degree_identity_max);
  write_text(a.out, csv);
  diag({{"status", "ok"}, {"subcommand", "graph-check"}, {"nodes", std::to_string(r.nodes)}});
  return 0;
}

int run_experiment(const ExperimentArgs& a, const Common& c) {
  kb_experiment_params p;
  kb_experiment_params_default(&p);
  p.name = a.name.c_str();
  p.family = a.family.c_str();
  p.seed = a.seed;
  p.size = a.size;
  p.images = a.images.empty() ? nullptr : a.images.c_str();
  p.input = a.input.empty() ? nullptr : a.input.c_str();
  p.sigmas = a.sigmas.data();
  p.sigma_count = a.sigmas.size();
  p.noise_sigma = a.noise_sigma.value_or(-1.0);
  p.gamma = a.gamma.value_or(0.0);
  p.alpha_points = a.alpha_points;
  p.n = a.n;
  p.threads = c.threads;
  p.include_timing = a.timing ? 1 : 0;
  say("running experiment " + a.name);
  kb_buffer* raw = nullptr;
  check(kb_experiment_csv(&p, &raw), "experiment");
  BufferPtr buf(raw);
  write_text(a.out, std::string(kb_buffer_data(buf.get()), kb_buffer_size(buf.get())));
  diag({{"status", "ok"}, {"subcommand", "experiment"}, {"name", a.name}, {"output", a.out}});
  return 0;
}

// ---- config files ----------------------------------------------------------

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool flag_given(const std::vector<std::string>& args, const std::string& key) {
  const std::string f = "--" + key;
  for (const auto& a : args) {
    if (a == f || a.rfind(f + "=", 0) == 0) return true;
  }
  return false;
}

// Expands `--config path` into `--key=value` arguments for every key the
// command line does not already set. Lines are key=value; '#' starts a comment.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw UsageFailure{"cannot read config file " + path};
  std::vector<std::string> extra;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageFailure{path + ":" + std::to_string(lineno) + ": expected key=value"};
    }
    std::string key = trim(line.substr(0, eq));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw UsageFailure{path + ":" + std::to_string(lineno) + ": empty key"};
    if (!flag_given(args, key)) extra.push_back("--" + key + "=" + value);
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

// ---- parser ----------------------------------------------------------------

int run(std::vector<std::string> args) {
  args = expand_config(std::move(args));

  CLI::App app{"kbridge: translate between regularizers and adaptive filters", "kbridge"};
  app.footer(kGrammar);
  app.require_subcommand(1, 1);
  app.fallthrough();
  app.set_version_flag("--version", kb_version());

  Common common;
  std::string config_unused;
  app.add_option("--threads", common.threads, "Worker threads; output does not depend on it")
      ->check(CLI::PositiveNumber);
  app.add_flag("--verbose", g_verbose, "Human-readable progress on stderr");
  app.add_option("--config", config_unused, "key=value file; command-line flags win");

  // add-noise
  NoiseArgs na;
  auto* noise = app.add_subcommand("add-noise", "Add seeded Gaussian noise to an image");
  noise->add_option("input", na.input, "PGM path or corpus:NAME")->required();
  noise->add_option("output", na.output, "Output PGM")->required();
  noise->add_option("--sigma", na.sigma, "Noise standard deviation (pixel units)")
      ->required()
      ->check(CLI::NonNegativeNumber);
  noise->add_option("--seed", na.seed, "Noise seed");
  noise->add_option("--size", na.size, "Corpus image size")->check(CLI::Range(4, 4096));

  // denoise
  DenoiseArgs da;
  auto* den = app.add_subcommand("denoise", "Apply a one-shot filter or solve the MAP problem");
  den->add_option("--method", da.method, "Filter or solver")
      ->required()
      ->check(CLI::IsMember({"nlm", "bilateral-df", "first-order", "second-order", "l2-shrink",
                             "dirichlet-exact", "dirichlet-approx", "map-gd", "map-heavy-ball"}));
  den->add_option("input", da.input, "PGM path or corpus:NAME")->required();
  den->add_option("output", da.output, "Output PGM")->required();
  den->add_option("--sigma", da.sigma, "Noise level sigma of the MAP data term")->capture_default_str()
      ->check(CLI::PositiveNumber);
  den->add_option("--gamma", da.gamma, "Sets gamma in --loss / --kernel")->check(CLI::PositiveNumber);
  den->add_option("--beta", da.beta, "Sets beta in a barron --loss");
  den->add_option("--alpha", da.alpha, "Bilateral strength (default sigma^2 in unit range)")
      ->check(CLI::NonNegativeNumber);
  den->add_option("--radius", da.radius, "Spatial window radius")->capture_default_str()->check(CLI::Range(0, 64));
  den->add_option("--spatial-sigma", da.spatial_sigma, "Gaussian spatial weights (default: box)")
      ->check(CLI::PositiveNumber);
  den->add_option("--patch-radius", da.patch_radius, "Patch radius for range distances")->capture_default_str()
      ->check(CLI::Range(0, 16));
  den->add_option("--loss", da.loss, "Loss family string")->capture_default_str();
  den->add_option("--kernel", da.kernel, "Kernel family string")->capture_default_str();
  den->add_option("--boundary", da.boundary, "Neighbor handling at the border")->capture_default_str()
      ->check(CLI::IsMember({"reflect", "periodic"}));
  den->add_option("--taps", da.taps, "dirichlet-approx tap convention")->capture_default_str()
      ->check(CLI::IsMember({"full", "half"}));
  den->add_option("--range", da.range, "Intensity unit divisor")->capture_default_str()->check(CLI::PositiveNumber);
  den->add_option("--size", da.size, "Corpus image size")->capture_default_str()->check(CLI::Range(4, 4096));
  den->add_option("--max-iters", da.max_iters, "Solver iteration cap")->capture_default_str()->check(CLI::PositiveNumber);
  den->add_option("--step", da.step, "Solver step (0 = automatic)")->capture_default_str()->check(CLI::NonNegativeNumber);
  den->add_option("--momentum", da.momentum, "Heavy-ball momentum (negative = automatic)")->capture_default_str()
      ->check(CLI::Range(-1.0, 0.999999));
  den->add_option("--grad-tol", da.grad_tol, "Gradient tolerance (0 = automatic)")->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  den->add_flag("--pointwise", da.pointwise, "MAP prior sum rho(u_i) instead of pairwise");
  den->add_option("--trace", da.trace, "Write the solver trace CSV here");

  // translate
  TranslateArgs ta;
  auto* tr = app.add_subcommand("translate", "Tabulate loss <-> kernel translations as CSV");
  tr->add_option("--loss", ta.loss, "Loss family string");
  tr->add_option("--kernel", ta.kernel, "Kernel family string");
  tr->add_option("--direction", ta.direction, "loss-to-kernel or kernel-to-loss")
      ->check(CLI::IsMember({"loss-to-kernel", "kernel-to-loss"}));
  tr->add_option("--order", ta.order, "1, 2 or both")->capture_default_str()->check(CLI::IsMember({"1", "2", "both"}));
  tr->add_option("--gamma", ta.gamma, "Sets gamma in the family string")->check(CLI::PositiveNumber);
  tr->add_option("--beta", ta.beta, "Sets beta in a barron loss");
  tr->add_option("--sigma", ta.sigma, "Scale sigma")->capture_default_str()->check(CLI::PositiveNumber);
  tr->add_option("--alpha", ta.alpha, "Scale alpha")->capture_default_str()->check(CLI::PositiveNumber);
  tr->add_option("--h-weight", ta.h, "Scale spatial weight h")->capture_default_str()->check(CLI::PositiveNumber);
  tr->add_option("--t-min", ta.t_min, "Grid start")->capture_default_str()->check(CLI::NonNegativeNumber);
  tr->add_option("--t-max", ta.t_max, "Grid end (default 10 gamma)")->check(CLI::PositiveNumber);
  tr->add_option("--points", ta.points, "Grid points")->capture_default_str()->check(CLI::Range(1, 1000000));
  tr->add_option("--out", ta.out, "CSV path (default stdout)");

  // graph-check
  GraphArgs ga;
  auto* gc = app.add_subcommand("graph-check", "Residuals of the normalized vs unnormalized Laplacian");
  gc->add_option("input", ga.input, "PGM path or corpus:NAME")->capture_default_str();
  gc->add_option("--size", ga.size, "Corpus image size")->capture_default_str()->check(CLI::Range(2, 64));
  gc->add_option("--kernel", ga.kernel, "Range kernel")->capture_default_str();
  gc->add_option("--gamma", ga.gamma, "Sets gamma in --kernel")->check(CLI::PositiveNumber);
  gc->add_option("--radius", ga.radius, "Window radius")->capture_default_str()->check(CLI::Range(1, 16));
  gc->add_option("--spatial-sigma", ga.spatial_sigma, "Gaussian spatial weights (default: box)")
      ->check(CLI::PositiveNumber);
  gc->add_option("--patch-radius", ga.patch_radius, "Patch radius")->capture_default_str()->check(CLI::Range(0, 8));
  gc->add_option("--sigma", ga.sigma, "sigma for the degree identity")->capture_default_str()->check(CLI::PositiveNumber);
  gc->add_option("--range", ga.range, "Intensity unit divisor")->capture_default_str()->check(CLI::PositiveNumber);
  gc->add_option("--out", ga.out, "CSV path (default stdout)");

  // experiment
  ExperimentArgs ea;
  auto* ex = app.add_subcommand("experiment", "Run a PSNR sweep or the Dirichlet figure");
  ex->add_option("name", ea.name, "Experiment")
      ->required()
      ->check(CLI::IsMember({"huber-tv", "bilateral-inversion", "dirichlet"}));
  ex->add_option("--seed", ea.seed, "Noise seed")->capture_default_str();
  ex->add_option("--out", ea.out, "CSV path")->required();
  ex->add_option("--size", ea.size, "Corpus image size")->capture_default_str()->check(CLI::Range(8, 1024));
  ex->add_option("--images", ea.images, "Comma separated corpus names (default all)");
  ex->add_option("--input", ea.input, "Use this PGM instead of the corpus");
  ex->add_option("--sigmas", ea.sigmas, "Sigma grid, comma separated")->delimiter(',');
  ex->add_option("--noise-sigma", ea.noise_sigma, "Fixed noise level (default: follow sigma)")
      ->check(CLI::NonNegativeNumber);
  ex->add_option("--family", ea.family, "bilateral-inversion kernel family")->capture_default_str()
      ->check(CLI::IsMember({"gaussian", "boxcar", "exponential", "all"}));
  ex->add_option("--gamma", ea.gamma, "Range parameter in 8-bit units")->check(CLI::PositiveNumber);
  ex->add_option("--alpha-points", ea.alpha_points, "alpha grid size")->check(CLI::Range(1, 10000));
  ex->add_option("--n", ea.n, "dirichlet signal length")->capture_default_str()->check(CLI::Range(3, 1 << 20));
  ex->add_flag("--timing", ea.timing, "Add runtime columns (breaks byte-determinism)");

  // CLI11 wants argv order with the program name first.
  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(std::move(rev));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::ostringstream os;
    app.exit(e, os, os);
    std::cerr << os.str();
    diag({{"status", "usage_error"}, {"message", e.what()}});
    return kExitUsage;
  }

  std::string sub = app.get_subcommands().front()->get_name();
  try {
    if (noise->parsed()) return run_add_noise(na);
    if (den->parsed()) return run_denoise(da, common);
    if (tr->parsed()) return run_translate(ta);
    if (gc->parsed()) return run_graph_check(ga);
    if (ex->parsed()) return run_experiment(ea, common);
  } catch (const UsageFailure& u) {
    diag({{"status", "usage_error"}, {"subcommand", sub}, {"message", u.message}});
    return kExitUsage;
  } catch (const Failure& f) {
    // A family string that does not parse is a bad invocation, not a run failure.
    if ((f.stage == "parse-loss" || f.stage == "parse-kernel") && f.status == KB_ERR_INVALID_ARGUMENT) {
      diag({{"status", "usage_error"}, {"subcommand", sub}, {"stage", f.stage}, {"message", f.message}});
      return kExitUsage;
    }
    diag({{"status", "error"},
          {"subcommand", sub},
          {"stage", f.stage},
          {"code", kb_status_name(f.status)},
          {"message", f.message}});
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return run(std::move(args));
  } catch (const UsageFailure& u) {
    diag({{"status", "usage_error"}, {"message", u.message}});
    return kExitUsage;
  } catch (const std::exception& e) {
    diag({{"status", "error"}, {"stage", "internal"}, {"message", e.what()}});
    return kExitRuntime;
  }
}
