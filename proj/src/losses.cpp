#include "kbridge/losses.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "kbridge/errors.hpp"

namespace kbridge {

// ---------------------------------------------------------------------------
// LossTable

LossTable::LossTable(Fn kernel, Fn kernel_slope, IntegrationOrder order, double t_max,
                     std::vector<double> breakpoints, std::size_t cells,
                     QuadratureOptions opts, ClosedForm closed)
    : kernel_(std::move(kernel)),
      kernel_slope_(std::move(kernel_slope)),
      order_(order),
      t_max_(t_max),
      breakpoints_(std::move(breakpoints)),
      opts_(opts),
      closed_(std::move(closed)) {
  if (!(t_max > 0.0) || cells == 0) throw InvalidArgument("loss table needs t_max > 0 and cells > 0");
  h_ = t_max / static_cast<double>(cells);
  std::sort(breakpoints_.begin(), breakpoints_.end());

  QuadratureOptions cell_opts = opts;
  cell_opts.abs_tol = std::max(opts.abs_tol / static_cast<double>(cells), 1e-15);

  rho_.assign(cells + 1, 0.0);
  drho_.assign(cells + 1, 0.0);
  const Fn& k = kernel_;
  for (std::size_t i = 0; i < cells; ++i) {
    const double a = h_ * static_cast<double>(i);
    const double b = (i + 1 == cells) ? t_max : h_ * static_cast<double>(i + 1);
    if (order_ == IntegrationOrder::First) {
      rho_[i + 1] = rho_[i] + integrate_piecewise([&](double s) { return s * k(s); }, a, b,
                                                  breakpoints_, cell_opts);
      drho_[i + 1] = b * k(b);
    } else {
      const double mass = integrate_piecewise(k, a, b, breakpoints_, cell_opts);
      const double lever = integrate_piecewise([&](double s) { return (b - s) * k(s); }, a, b,
                                               breakpoints_, cell_opts);
      rho_[i + 1] = rho_[i] + drho_[i] * (b - a) + lever;
      drho_[i + 1] = drho_[i] + mass;
    }
  }

  double max_slope = 0.0;
  curvature_bound_ = std::abs(k(0.0));
  min_second_ = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i <= cells; ++i) {
    const double t = h_ * static_cast<double>(i);
    max_slope = std::max(max_slope, std::abs(drho_[i]));
    const double second = rho_second(t);
    min_second_ = std::min(min_second_, second);
    curvature_bound_ = std::max(curvature_bound_, std::abs(second));
    if (t > 0.0) curvature_bound_ = std::max(curvature_bound_, std::abs(drho_[i] / t));
  }
  const double tail = std::abs(drho_.back());
  const double mid = std::abs(drho_[cells / 2]);
  tail_slope_ratio_ = max_slope > 0.0 ? tail / max_slope : 0.0;
  // Stash whether rho' is still shrinking at the far end of the grid.
  if (mid > 0.0 && tail > 0.75 * mid) tail_slope_ratio_ = std::max(tail_slope_ratio_, 1.0);
}

std::size_t LossTable::cell_of(double t) const {
  const auto cells = rho_.size() - 1;
  if (t >= t_max_) return cells;
  return std::min(static_cast<std::size_t>(t / h_), cells - 1);
}

double LossTable::quadrature_rho(double t) const {
  const std::size_t i = cell_of(t);
  const double a = (i + 1 == rho_.size()) ? t_max_ : h_ * static_cast<double>(i);
  if (t == a) return rho_[i];
  if (order_ == IntegrationOrder::First) {
    return rho_[i] + integrate_piecewise([&](double s) { return s * kernel_(s); }, a, t,
                                         breakpoints_, opts_);
  }
  return rho_[i] + drho_[i] * (t - a) +
         integrate_piecewise([&](double s) { return (t - s) * kernel_(s); }, a, t, breakpoints_,
                             opts_);
}

double LossTable::quadrature_rho_prime(double t) const {
  if (order_ == IntegrationOrder::First) return t * kernel_(t);
  const std::size_t i = cell_of(t);
  const double a = (i + 1 == rho_.size()) ? t_max_ : h_ * static_cast<double>(i);
  if (t == a) return drho_[i];
  return drho_[i] + integrate_piecewise(kernel_, a, t, breakpoints_, opts_);
}

double LossTable::rho(double t) const {
  return closed_.rho ? closed_.rho(t) : quadrature_rho(t);
}

double LossTable::rho_prime(double t) const {
  if (order_ == IntegrationOrder::First) return t * kernel_(t);
  return closed_.rho_prime ? closed_.rho_prime(t) : quadrature_rho_prime(t);
}

double LossTable::rho_second(double t) const {
  if (order_ == IntegrationOrder::Second) return kernel_(t);
  if (kernel_slope_) return kernel_(t) + t * kernel_slope_(t);
  const double step = 1e-6 * std::max(1.0, t);
  const auto g = [&](double s) { return s * kernel_(std::abs(s)); };
  return (g(t + step) - g(t - step)) / (2.0 * step);
}

double LossTable::influence(double t) const {
  if (order_ == IntegrationOrder::First || t == 0.0) return kernel_(t);
  return rho_prime(t) / t;
}

// ---------------------------------------------------------------------------
// ScalarLoss construction

ScalarLoss::ScalarLoss(LossFamily family, double gamma, double beta)
    : family_(family), gamma_(gamma), beta_(beta) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("loss gamma must be positive");
}

ScalarLoss ScalarLoss::quadratic() { return ScalarLoss(LossFamily::Quadratic, 1.0); }
ScalarLoss ScalarLoss::dirichlet() { return quadratic().scaled(2.0); }

ScalarLoss ScalarLoss::tv(double tv_epsilon) {
  return ScalarLoss(LossFamily::TV, 1.0).with_tv_epsilon(tv_epsilon);
}

ScalarLoss ScalarLoss::huber(double gamma) { return ScalarLoss(LossFamily::Huber, gamma); }
ScalarLoss ScalarLoss::welsch(double gamma) { return ScalarLoss(LossFamily::Welsch, gamma); }
ScalarLoss ScalarLoss::lorentzian(double gamma) { return ScalarLoss(LossFamily::Lorentzian, gamma); }

ScalarLoss ScalarLoss::clipped_quadratic(double gamma) {
  return ScalarLoss(LossFamily::ClippedQuadratic, gamma);
}

ScalarLoss ScalarLoss::exponential_induced(double gamma, double tv_epsilon) {
  return ScalarLoss(LossFamily::ExponentialInduced, gamma).with_tv_epsilon(tv_epsilon);
}

ScalarLoss ScalarLoss::barron(double beta, double gamma) {
  if (std::isnan(beta) || beta == std::numeric_limits<double>::infinity()) {
    throw InvalidArgument("barron beta must be finite or -inf");
  }
  return ScalarLoss(LossFamily::Barron, gamma, beta);
}

ScalarLoss ScalarLoss::from_table(std::shared_ptr<const LossTable> table, double gamma) {
  if (!table) throw InvalidArgument("null loss table");
  ScalarLoss loss(LossFamily::NumericFromKernel, gamma);
  loss.table_ = std::move(table);
  return loss;
}

ScalarLoss ScalarLoss::scaled(double weight) const {
  if (!(weight >= 0.0) || !std::isfinite(weight)) throw InvalidArgument("loss weight must be >= 0");
  ScalarLoss copy = *this;
  copy.weight_ = weight;
  return copy;
}

ScalarLoss ScalarLoss::with_tv_epsilon(double eps) const {
  if (!(eps > 0.0)) throw InvalidArgument("tv epsilon must be positive");
  ScalarLoss copy = *this;
  copy.tv_epsilon_ = eps;
  return copy;
}

// ---------------------------------------------------------------------------
// Evaluation. Each family is written for a = |t| >= 0; odd quantities get the
// sign of t reattached by the public functions.

namespace {

double sign_of(double t) { return t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0); }

struct BarronTerms {
  double u;     // (t/gamma)^2
  double base;  // u/z + 1
  double z;
};

BarronTerms barron_terms(const ScalarLoss& l, double a) {
  const double u = (a / l.gamma()) * (a / l.gamma());
  const double z = std::max(1.0, 2.0 - l.beta());
  return {u, u / z + 1.0, z};
}

double rho_abs(const ScalarLoss& l, double a) {
  const double g = l.gamma();
  switch (l.family()) {
    case LossFamily::Quadratic:
      return 0.5 * a * a;
    case LossFamily::TV:
      return a;
    case LossFamily::Huber:
      return a <= g ? 0.5 * a * a : g * a - 0.5 * g * g;
    case LossFamily::Welsch:
      return -g * g * std::expm1(-a * a / (2.0 * g * g));
    case LossFamily::Lorentzian:
      return g * g * std::log1p(a * a / (2.0 * g * g));
    case LossFamily::ClippedQuadratic:
      return a <= g ? 0.5 * a * a : 0.5 * g * g;
    case LossFamily::ExponentialInduced: {
      const double s = std::sqrt(2.0) * g;
      return -s * std::expm1(-a / s);
    }
    case LossFamily::Barron: {
      const double beta = l.beta();
      const auto bt = barron_terms(l, a);
      if (beta == ScalarLoss::kBetaMinusInfinity) return -std::expm1(-0.5 * bt.u);
      if (beta == 0.0) return std::log1p(0.5 * bt.u);
      if (beta == 2.0) return 0.5 * bt.u;
      return bt.z / beta * std::expm1(0.5 * beta * std::log1p(bt.u / bt.z));
    }
    case LossFamily::NumericFromKernel:
      return l.table()->rho(a);
  }
  return 0.0;
}

// rho'(a) for a >= 0.
double slope_abs(const ScalarLoss& l, double a) {
  const double g = l.gamma();
  switch (l.family()) {
    case LossFamily::Quadratic:
      return a;
    case LossFamily::TV:
      return a > 0.0 ? 1.0 : 0.0;
    case LossFamily::Huber:
      return a <= g ? a : g;
    case LossFamily::Welsch:
      return a * std::exp(-a * a / (2.0 * g * g));
    case LossFamily::Lorentzian:
      return a / (1.0 + a * a / (2.0 * g * g));
    case LossFamily::ClippedQuadratic:
      return a <= g ? a : 0.0;
    case LossFamily::ExponentialInduced:
      return a > 0.0 ? std::exp(-a / (std::sqrt(2.0) * g)) : 0.0;
    case LossFamily::Barron: {
      const double beta = l.beta();
      const auto bt = barron_terms(l, a);
      const double scale = a / (g * g);
      if (beta == ScalarLoss::kBetaMinusInfinity) return scale * std::exp(-0.5 * bt.u);
      if (beta == 2.0) return scale;
      return scale * std::pow(bt.base, 0.5 * beta - 1.0);
    }
    case LossFamily::NumericFromKernel:
      return l.table()->rho_prime(a);
  }
  return 0.0;
}

double second_abs(const ScalarLoss& l, double a) {
  const double g = l.gamma();
  switch (l.family()) {
    case LossFamily::Quadratic:
      return 1.0;
    case LossFamily::TV:
      return 0.0;
    case LossFamily::Huber:
    case LossFamily::ClippedQuadratic:
      return a < g ? 1.0 : 0.0;
    case LossFamily::Welsch: {
      const double q = a * a / (g * g);
      return (1.0 - q) * std::exp(-0.5 * q);
    }
    case LossFamily::Lorentzian: {
      const double q = a * a / (2.0 * g * g);
      return (1.0 - q) / ((1.0 + q) * (1.0 + q));
    }
    case LossFamily::ExponentialInduced: {
      const double s = std::sqrt(2.0) * g;
      return -std::exp(-a / s) / s;
    }
    case LossFamily::Barron: {
      const double beta = l.beta();
      const auto bt = barron_terms(l, a);
      const double inv_g2 = 1.0 / (g * g);
      if (beta == ScalarLoss::kBetaMinusInfinity) return inv_g2 * std::exp(-0.5 * bt.u) * (1.0 - bt.u);
      if (beta == 2.0) return inv_g2;
      return inv_g2 * std::pow(bt.base, 0.5 * beta - 2.0) * (bt.base + (beta - 2.0) * bt.u / bt.z);
    }
    case LossFamily::NumericFromKernel:
      return l.table()->rho_second(a);
  }
  return 0.0;
}

double influence_abs(const ScalarLoss& l, double a) {
  const double g = l.gamma();
  switch (l.family()) {
    case LossFamily::Quadratic:
      return 1.0;
    case LossFamily::TV:
      return 1.0 / std::max(a, l.tv_epsilon());
    case LossFamily::Huber:
      return a <= g ? 1.0 : g / a;
    case LossFamily::Welsch:
      return std::exp(-a * a / (2.0 * g * g));
    case LossFamily::Lorentzian:
      return 1.0 / (1.0 + a * a / (2.0 * g * g));
    case LossFamily::ClippedQuadratic:
      return a <= g ? 1.0 : 0.0;
    case LossFamily::ExponentialInduced:
      return std::exp(-a / (std::sqrt(2.0) * g)) / std::max(a, l.tv_epsilon());
    case LossFamily::Barron: {
      const double beta = l.beta();
      const auto bt = barron_terms(l, a);
      const double inv_g2 = 1.0 / (g * g);
      if (beta == ScalarLoss::kBetaMinusInfinity) return inv_g2 * std::exp(-0.5 * bt.u);
      if (beta == 2.0) return inv_g2;
      return inv_g2 * std::pow(bt.base, 0.5 * beta - 1.0);
    }
    case LossFamily::NumericFromKernel:
      return l.table()->influence(a);
  }
  return 0.0;
}

}  // namespace

double rho(const ScalarLoss& loss, double t) { return loss.weight() * rho_abs(loss, std::abs(t)); }

double rho_prime(const ScalarLoss& loss, double t) {
  return loss.weight() * sign_of(t) * slope_abs(loss, std::abs(t));
}

double rho_second(const ScalarLoss& loss, double t) {
  return loss.weight() * second_abs(loss, std::abs(t));
}

double influence(const ScalarLoss& loss, double t) {
  return loss.weight() * influence_abs(loss, std::abs(t));
}

bool is_kink(const ScalarLoss& loss, double t) {
  const double a = std::abs(t);
  switch (loss.family()) {
    case LossFamily::Huber:
    case LossFamily::ClippedQuadratic:
      return a == loss.gamma();
    case LossFamily::TV:
    case LossFamily::ExponentialInduced:
      return a == 0.0;
    case LossFamily::NumericFromKernel: {
      const auto& bp = loss.table()->breakpoints();
      return std::find(bp.begin(), bp.end(), a) != bp.end();
    }
    default:
      return false;
  }
}

std::vector<double> kink_points(const ScalarLoss& loss) {
  switch (loss.family()) {
    case LossFamily::Huber:
    case LossFamily::ClippedQuadratic:
      return {loss.gamma()};
    case LossFamily::TV:
    case LossFamily::ExponentialInduced:
      // rho'/t also bends where the clamp releases.
      return {0.0, loss.tv_epsilon()};
    case LossFamily::NumericFromKernel:
      return loss.table()->breakpoints();
    default:
      return {};
  }
}

bool is_redescending(const ScalarLoss& loss) {
  if (loss.weight() == 0.0) return false;
  switch (loss.family()) {
    case LossFamily::Welsch:
    case LossFamily::Lorentzian:
    case LossFamily::ClippedQuadratic:
    case LossFamily::ExponentialInduced:
      return true;
    case LossFamily::Barron:
      return loss.beta() < 1.0;
    case LossFamily::NumericFromKernel:
      return loss.table()->tail_slope_ratio() < 0.5;
    default:
      return false;
  }
}

bool is_convex(const ScalarLoss& loss) {
  switch (loss.family()) {
    case LossFamily::Quadratic:
    case LossFamily::TV:
    case LossFamily::Huber:
      return true;
    case LossFamily::Barron:
      return loss.beta() >= 1.0;
    case LossFamily::NumericFromKernel:
      return loss.table()->min_second() >= 0.0;
    default:
      return loss.weight() == 0.0;
  }
}

double curvature_bound(const ScalarLoss& loss) {
  const double g = loss.gamma();
  double bound = 1.0;
  switch (loss.family()) {
    case LossFamily::TV:
    case LossFamily::ExponentialInduced:
      bound = 1.0 / loss.tv_epsilon();
      break;
    case LossFamily::Barron: {
      bound = 0.0;
      for (int i = 0; i <= 512; ++i) {
        const double a = 32.0 * g * i / 512.0;
        bound = std::max({bound, std::abs(second_abs(loss, a)), influence_abs(loss, a)});
      }
      break;
    }
    case LossFamily::NumericFromKernel:
      bound = loss.table()->curvature_bound();
      break;
    default:
      break;
  }
  return loss.weight() * bound;
}

ScalarLoss rescale_units(const ScalarLoss& loss, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) throw InvalidArgument("unit factor must be positive");
  ScalarLoss out = ScalarLoss::quadratic();
  const double g = loss.gamma() * factor;
  switch (loss.family()) {
    case LossFamily::Quadratic: out = ScalarLoss::quadratic(); break;
    case LossFamily::TV: out = ScalarLoss::tv(loss.tv_epsilon() * factor); break;
    case LossFamily::Huber: out = ScalarLoss::huber(g); break;
    case LossFamily::Welsch: out = ScalarLoss::welsch(g); break;
    case LossFamily::Lorentzian: out = ScalarLoss::lorentzian(g); break;
    case LossFamily::ClippedQuadratic: out = ScalarLoss::clipped_quadratic(g); break;
    case LossFamily::ExponentialInduced:
      out = ScalarLoss::exponential_induced(g, loss.tv_epsilon() * factor);
      break;
    case LossFamily::Barron: out = ScalarLoss::barron(loss.beta(), g); break;
    case LossFamily::NumericFromKernel:
      throw InvalidArgument("tabulated losses cannot be rescaled");
  }
  return out.scaled(loss.weight());
}

// ---------------------------------------------------------------------------
// Parsing

std::string_view family_name(LossFamily family) {
  switch (family) {
    case LossFamily::Quadratic: return "quadratic";
    case LossFamily::TV: return "tv";
    case LossFamily::Huber: return "huber";
    case LossFamily::Welsch: return "welsch";
    case LossFamily::Lorentzian: return "lorentzian";
    case LossFamily::ClippedQuadratic: return "clipped";
    case LossFamily::ExponentialInduced: return "exponential";
    case LossFamily::Barron: return "barron";
    case LossFamily::NumericFromKernel: return "numeric";
  }
  return "unknown";
}

namespace {

double parse_number(std::string_view text, std::string_view key) {
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double value = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw InvalidArgument("malformed value '" + std::string(text) + "' for key '" +
                          std::string(key) + "'");
  }
  return value;
}

std::string format_number(double v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

ScalarLoss parse_loss(std::string_view spec) {
  const auto colon = spec.find(':');
  const std::string_view name = spec.substr(0, colon);
  std::string_view rest = colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1);

  double gamma = std::numeric_limits<double>::quiet_NaN();
  double beta = std::numeric_limits<double>::quiet_NaN();
  double eps = ScalarLoss::kDefaultTvEpsilon;
  double weight = 1.0;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = rest.substr(0, comma);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw InvalidArgument("malformed loss parameter '" + std::string(item) + "' (expected key=value)");
    }
    const auto key = item.substr(0, eq);
    const auto value = parse_number(item.substr(eq + 1), key);
    if (key == "gamma") gamma = value;
    else if (key == "beta") beta = value;
    else if (key == "eps") eps = value;
    else if (key == "weight") weight = value;
    else throw InvalidArgument("unknown loss parameter '" + std::string(key) + "'");
  }

  const auto need_gamma = [&]() {
    if (std::isnan(gamma)) throw InvalidArgument("loss '" + std::string(name) + "' requires gamma=");
    return gamma;
  };

  ScalarLoss loss = ScalarLoss::quadratic();
  if (name == "quadratic" || name == "l2") loss = ScalarLoss::quadratic();
  else if (name == "dirichlet") loss = ScalarLoss::dirichlet();
  else if (name == "tv") loss = ScalarLoss::tv(eps);
  else if (name == "huber") loss = ScalarLoss::huber(need_gamma());
  else if (name == "welsch") loss = ScalarLoss::welsch(need_gamma());
  else if (name == "lorentzian") loss = ScalarLoss::lorentzian(need_gamma());
  else if (name == "clipped") loss = ScalarLoss::clipped_quadratic(need_gamma());
  else if (name == "exponential") loss = ScalarLoss::exponential_induced(need_gamma(), eps);
  else if (name == "barron") {
    if (std::isnan(beta)) throw InvalidArgument("loss 'barron' requires beta=");
    loss = ScalarLoss::barron(beta, need_gamma());
  } else {
    throw InvalidArgument("unknown loss family '" + std::string(name) + "'");
  }
  if (name == "dirichlet") weight *= 2.0;
  return loss.scaled(weight);
}

std::string to_string(const ScalarLoss& loss) {
  std::string out(family_name(loss.family()));
  std::vector<std::string> parts;
  switch (loss.family()) {
    case LossFamily::Quadratic:
    case LossFamily::NumericFromKernel:
      break;
    case LossFamily::TV:
      parts.push_back("eps=" + format_number(loss.tv_epsilon()));
      break;
    case LossFamily::Barron:
      parts.push_back(loss.beta() == ScalarLoss::kBetaMinusInfinity ? "beta=-inf"
                                                                   : "beta=" + format_number(loss.beta()));
      parts.push_back("gamma=" + format_number(loss.gamma()));
      break;
    case LossFamily::ExponentialInduced:
      parts.push_back("gamma=" + format_number(loss.gamma()));
      parts.push_back("eps=" + format_number(loss.tv_epsilon()));
      break;
    default:
      parts.push_back("gamma=" + format_number(loss.gamma()));
      break;
  }
  if (loss.weight() != 1.0) parts.push_back("weight=" + format_number(loss.weight()));
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i == 0 ? ":" : ",") + parts[i];
  return out;
}

}  // namespace kbridge
