#include "kbridge/kernels.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>

#include "kbridge/errors.hpp"

namespace kbridge {

double TranslationScale::factor() const {
  if (!(sigma > 0.0) || !(alpha > 0.0) || !(h_weight >= 0.0)) {
    throw InvalidArgument("translation scale needs sigma > 0, alpha > 0, h_weight >= 0");
  }
  return 2.0 * sigma * sigma / alpha * h_weight;
}

ScalarKernel::ScalarKernel(KernelFamily family, double gamma) : family_(family), gamma_(gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("kernel gamma must be positive");
}

ScalarKernel ScalarKernel::constant() { return ScalarKernel(KernelFamily::Constant, 1.0); }
ScalarKernel ScalarKernel::boxcar(double gamma) { return ScalarKernel(KernelFamily::Boxcar, gamma); }
ScalarKernel ScalarKernel::gaussian(double gamma) { return ScalarKernel(KernelFamily::Gaussian, gamma); }
ScalarKernel ScalarKernel::cauchy(double gamma) { return ScalarKernel(KernelFamily::Cauchy, gamma); }
ScalarKernel ScalarKernel::exponential(double gamma) {
  return ScalarKernel(KernelFamily::Exponential, gamma);
}

ScalarKernel ScalarKernel::from_loss_first_order(const ScalarLoss& loss, const TranslationScale& scale) {
  ScalarKernel k(KernelFamily::FromLossFirstOrder, loss.gamma());
  k.factor_ = scale.factor();
  k.source_ = loss;
  return k;
}

ScalarKernel ScalarKernel::from_loss_second_order(const ScalarLoss& loss, const TranslationScale& scale) {
  ScalarKernel k(KernelFamily::FromLossSecondOrder, loss.gamma());
  k.factor_ = scale.factor();
  k.source_ = loss;
  k.non_psd_ = !is_convex(loss) && k.factor_ > 0.0;
  return k;
}

ScalarKernel kernel_from_loss_first_order(const ScalarLoss& loss, const TranslationScale& scale) {
  return ScalarKernel::from_loss_first_order(loss, scale);
}

ScalarKernel kernel_from_loss_second_order(const ScalarLoss& loss, const TranslationScale& scale) {
  return ScalarKernel::from_loss_second_order(loss, scale);
}

double kernel_eval(const ScalarKernel& k, double t) {
  const double a = std::abs(t);
  const double g = k.gamma();
  switch (k.family()) {
    case KernelFamily::Constant:
      return 1.0;
    case KernelFamily::Boxcar:
      return a <= g ? 1.0 : 0.0;
    case KernelFamily::Gaussian:
      return std::exp(-a * a / (2.0 * g * g));
    case KernelFamily::Cauchy:
      return 1.0 / (1.0 + a * a / (2.0 * g * g));
    case KernelFamily::Exponential:
      return std::exp(-a / (std::numbers::sqrt2 * g));
    case KernelFamily::FromLossFirstOrder:
      return k.factor() * influence(*k.source(), a);
    case KernelFamily::FromLossSecondOrder:
      return k.factor() * rho_second(*k.source(), a);
  }
  return 0.0;
}

double kernel_slope(const ScalarKernel& k, double t) {
  const double a = std::abs(t);
  const double g = k.gamma();
  switch (k.family()) {
    case KernelFamily::Constant:
    case KernelFamily::Boxcar:
      return 0.0;
    case KernelFamily::Gaussian:
      return -a / (g * g) * std::exp(-a * a / (2.0 * g * g));
    case KernelFamily::Cauchy: {
      const double q = 1.0 + a * a / (2.0 * g * g);
      return -a / (g * g) / (q * q);
    }
    case KernelFamily::Exponential: {
      const double s = std::numbers::sqrt2 * g;
      return -std::exp(-a / s) / s;
    }
    default: {
      // Derived kernels: central difference, kept one-sided near the origin.
      const double h = 1e-6 * std::max(1.0, a);
      if (a < h) return (kernel_eval(k, a + h) - kernel_eval(k, a)) / h;
      return (kernel_eval(k, a + h) - kernel_eval(k, a - h)) / (2.0 * h);
    }
  }
}

std::vector<double> kernel_breakpoints(const ScalarKernel& k) {
  switch (k.family()) {
    case KernelFamily::Boxcar:
      return {k.gamma()};
    case KernelFamily::FromLossFirstOrder:
    case KernelFamily::FromLossSecondOrder:
      return kink_points(*k.source());
    default:
      return {};
  }
}

namespace {

constexpr double kTableSpan = 32.0;

std::shared_ptr<const LossTable> make_table(const ScalarKernel& k, IntegrationOrder order,
                                            LossTable::ClosedForm closed) {
  LossTable::Fn kernel = [k](double t) { return kernel_eval(k, t); };
  LossTable::Fn slope;
  if (k.family() != KernelFamily::FromLossFirstOrder && k.family() != KernelFamily::FromLossSecondOrder) {
    slope = [k](double t) { return kernel_slope(k, t); };
  }
  return std::make_shared<const LossTable>(std::move(kernel), std::move(slope), order,
                                           kTableSpan * k.gamma(), kernel_breakpoints(k), 4096,
                                           QuadratureOptions{}, std::move(closed));
}

// Exponential kernel, first order. int_0^t tau e^{-tau/a} dtau.
LossTable::ClosedForm exponential_first(double gamma) {
  const double a = std::numbers::sqrt2 * gamma;
  return {[a](double t) {
            const double s = t / a;
            return a * a * (-std::expm1(-s) - s * std::exp(-s));
          },
          [a](double t) { return t * std::exp(-t / a); }};
}

LossTable::ClosedForm gaussian_second(double g) {
  const double c = std::sqrt(std::numbers::pi / 2.0) * g;
  const double s = std::numbers::sqrt2 * g;
  auto slope = [c, s](double t) { return c * std::erf(t / s); };
  return {[slope, g](double t) { return t * slope(t) + g * g * std::expm1(-t * t / (2.0 * g * g)); },
          slope};
}

LossTable::ClosedForm cauchy_second(double g) {
  const double s = std::numbers::sqrt2 * g;
  auto slope = [s](double t) { return s * std::atan(t / s); };
  return {[slope, g](double t) { return t * slope(t) - g * g * std::log1p(t * t / (2.0 * g * g)); },
          slope};
}

LossTable::ClosedForm exponential_second(double g) {
  const double a = std::numbers::sqrt2 * g;
  return {[a](double t) { return a * t + a * a * std::expm1(-t / a); },
          [a](double t) { return -a * std::expm1(-t / a); }};
}

}  // namespace

ScalarLoss numeric_loss_from_kernel(const ScalarKernel& k, IntegrationOrder order) {
  return ScalarLoss::from_table(make_table(k, order, {}), k.gamma());
}

ScalarLoss loss_from_kernel_first_order(const ScalarKernel& k) {
  const double g = k.gamma();
  switch (k.family()) {
    case KernelFamily::Constant:
      return ScalarLoss::quadratic();
    case KernelFamily::Boxcar:
      return ScalarLoss::clipped_quadratic(g);
    case KernelFamily::Gaussian:
      return ScalarLoss::welsch(g);
    case KernelFamily::Cauchy:
      return ScalarLoss::lorentzian(g);
    case KernelFamily::Exponential:
      return ScalarLoss::from_table(make_table(k, IntegrationOrder::First, exponential_first(g)), g);
    default:
      return numeric_loss_from_kernel(k, IntegrationOrder::First);
  }
}

ScalarLoss loss_from_kernel_second_order(const ScalarKernel& k) {
  const double g = k.gamma();
  switch (k.family()) {
    case KernelFamily::Constant:
      return ScalarLoss::quadratic();
    case KernelFamily::Boxcar:
      return ScalarLoss::huber(g);
    case KernelFamily::Gaussian:
      return ScalarLoss::from_table(make_table(k, IntegrationOrder::Second, gaussian_second(g)), g);
    case KernelFamily::Cauchy:
      return ScalarLoss::from_table(make_table(k, IntegrationOrder::Second, cauchy_second(g)), g);
    case KernelFamily::Exponential:
      return ScalarLoss::from_table(make_table(k, IntegrationOrder::Second, exponential_second(g)), g);
    default:
      return numeric_loss_from_kernel(k, IntegrationOrder::Second);
  }
}

double roundtrip_check(const ScalarLoss& loss, const TranslationScale& scale) {
  const auto kernel = kernel_from_loss_first_order(loss, scale);
  const double factor = kernel.factor();
  if (factor == 0.0) throw InvalidArgument("roundtrip needs a non-zero translation factor");
  const auto back = loss_from_kernel_first_order(kernel);
  double worst = 0.0;
  for (double t : linspace(0.0, 20.0 * loss.gamma(), 401)) {
    worst = std::max(worst, std::abs(rho(back, t) / factor - rho(loss, t)));
  }
  return worst;
}

ScalarKernel rescale_units(const ScalarKernel& k, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) throw InvalidArgument("unit factor must be positive");
  const double g = k.gamma() * factor;
  switch (k.family()) {
    case KernelFamily::Constant: return ScalarKernel::constant();
    case KernelFamily::Boxcar: return ScalarKernel::boxcar(g);
    case KernelFamily::Gaussian: return ScalarKernel::gaussian(g);
    case KernelFamily::Cauchy: return ScalarKernel::cauchy(g);
    case KernelFamily::Exponential: return ScalarKernel::exponential(g);
    default: throw InvalidArgument("derived kernels cannot be rescaled");
  }
}

std::string_view kernel_family_name(KernelFamily family) {
  switch (family) {
    case KernelFamily::Constant: return "constant";
    case KernelFamily::Boxcar: return "boxcar";
    case KernelFamily::Gaussian: return "gaussian";
    case KernelFamily::Cauchy: return "cauchy";
    case KernelFamily::Exponential: return "exponential";
    case KernelFamily::FromLossFirstOrder: return "from-loss-first";
    case KernelFamily::FromLossSecondOrder: return "from-loss-second";
  }
  return "unknown";
}

ScalarKernel parse_kernel(std::string_view spec) {
  const auto colon = spec.find(':');
  const std::string_view name = spec.substr(0, colon);
  std::string_view rest = colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1);
  double gamma = std::numeric_limits<double>::quiet_NaN();
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto item = rest.substr(0, comma);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos || item.substr(0, eq) != "gamma") {
      throw InvalidArgument("malformed kernel parameter '" + std::string(item) + "' (expected gamma=)");
    }
    const auto value = item.substr(eq + 1);
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), gamma);
    if (ec != std::errc() || ptr != value.data() + value.size() || value.empty()) {
      throw InvalidArgument("malformed value '" + std::string(value) + "' for key 'gamma'");
    }
  }
  if (name == "constant") return ScalarKernel::constant();
  if (name != "boxcar" && name != "gaussian" && name != "cauchy" && name != "exponential") {
    throw InvalidArgument("unknown kernel family '" + std::string(name) + "'");
  }
  if (std::isnan(gamma)) throw InvalidArgument("kernel '" + std::string(name) + "' requires gamma=");
  if (name == "boxcar") return ScalarKernel::boxcar(gamma);
  if (name == "gaussian") return ScalarKernel::gaussian(gamma);
  if (name == "cauchy") return ScalarKernel::cauchy(gamma);
  return ScalarKernel::exponential(gamma);
}

std::string to_string(const ScalarKernel& k) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(17);
  os << kernel_family_name(k.family());
  switch (k.family()) {
    case KernelFamily::Constant:
      break;
    case KernelFamily::FromLossFirstOrder:
    case KernelFamily::FromLossSecondOrder:
      os << "[" << to_string(*k.source()) << "]*" << k.factor();
      break;
    default:
      os << ":gamma=" << k.gamma();
  }
  return os.str();
}

}  // namespace kbridge
