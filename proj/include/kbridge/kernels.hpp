#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kbridge/losses.hpp"

namespace kbridge {

enum class KernelFamily {
  Constant,
  Boxcar,
  Gaussian,
  Cauchy,
  Exponential,
  FromLossFirstOrder,
  FromLossSecondOrder,
};

/// The factor (2 sigma^2 / alpha) h that converts a loss derivative into a
/// kernel. {sigma = 1, alpha = 2, h_weight = 1} gives factor 1.
struct TranslationScale {
  double sigma = 1.0;
  double alpha = 2.0;
  double h_weight = 1.0;

  double factor() const;
};

class ScalarKernel {
 public:
  static ScalarKernel constant();
  /// k(t) = 1 for |t| <= gamma, closed at the boundary.
  static ScalarKernel boxcar(double gamma);
  static ScalarKernel gaussian(double gamma);
  static ScalarKernel cauchy(double gamma);
  /// k(t) = exp(-|t| / (sqrt(2) gamma)).
  static ScalarKernel exponential(double gamma);
  static ScalarKernel from_loss_first_order(const ScalarLoss& loss, const TranslationScale& scale);
  static ScalarKernel from_loss_second_order(const ScalarLoss& loss, const TranslationScale& scale);

  KernelFamily family() const noexcept { return family_; }
  double gamma() const noexcept { return gamma_; }
  /// Multiplier carried by derived kernels (1 for the base families).
  double factor() const noexcept { return factor_; }
  const std::optional<ScalarLoss>& source() const noexcept { return source_; }
  /// Set when a derived second-order kernel takes negative values somewhere.
  bool non_psd() const noexcept { return non_psd_; }

 private:
  ScalarKernel(KernelFamily family, double gamma);

  KernelFamily family_;
  double gamma_;
  double factor_ = 1.0;
  std::optional<ScalarLoss> source_;
  bool non_psd_ = false;
};

double kernel_eval(const ScalarKernel& k, double t);
/// dk/dt for t >= 0 (right derivative at jumps, which is 0 for the boxcar).
double kernel_slope(const ScalarKernel& k, double t);
/// Points in t >= 0 where k or k' jumps.
std::vector<double> kernel_breakpoints(const ScalarKernel& k);

ScalarKernel kernel_from_loss_first_order(const ScalarLoss& loss, const TranslationScale& scale);
ScalarKernel kernel_from_loss_second_order(const ScalarLoss& loss, const TranslationScale& scale);

/// rho(t) = int_0^|t| tau k(tau) dtau. Named families map to their closed
/// forms; everything else becomes a NumericFromKernel table.
ScalarLoss loss_from_kernel_first_order(const ScalarKernel& k);
/// rho'' = k with rho(0) = rho'(0) = 0.
ScalarLoss loss_from_kernel_second_order(const ScalarKernel& k);

/// Quadrature-only version of loss_from_kernel_*: the table is built from k
/// alone, with no closed form attached. Used to cross-check the closed forms.
ScalarLoss numeric_loss_from_kernel(const ScalarKernel& k, IntegrationOrder order);

/// max |rho_back(t) / factor - rho(t)| over [0, 20 gamma], where rho_back is
/// the first-order loss recovered from the first-order kernel of `loss`.
double roundtrip_check(const ScalarLoss& loss, const TranslationScale& scale);

/// Base-family kernel with gamma multiplied by `factor`.
ScalarKernel rescale_units(const ScalarKernel& k, double factor);

/// Grammar: constant | boxcar:gamma= | gaussian:gamma= | cauchy:gamma= |
/// exponential:gamma=
ScalarKernel parse_kernel(std::string_view spec);
std::string to_string(const ScalarKernel& k);
std::string_view kernel_family_name(KernelFamily family);

}  // namespace kbridge
