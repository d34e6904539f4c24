#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "kbridge/numeric.hpp"

namespace kbridge {

enum class LossFamily {
  Quadratic,
  TV,
  Huber,
  Welsch,
  Lorentzian,
  ClippedQuadratic,
  ExponentialInduced,
  Barron,
  NumericFromKernel,
};

/// Which integral relation produced a tabulated loss.
///   First:  rho'(t) = t k(t)
///   Second: rho''(t) = k(t), rho(0) = rho'(0) = 0
enum class IntegrationOrder { First = 1, Second = 2 };

/// Loss implied by a kernel, tabulated on a uniform grid over [0, t_max].
/// Node values are exact cumulative integrals; between nodes the remaining
/// piece is integrated on demand, so evaluation is as accurate as the
/// quadrature itself rather than an interpolant.
class LossTable {
 public:
  using Fn = std::function<double(double)>;

  /// Antiderivatives known in closed form. When present they serve rho and
  /// rho' evaluation; the quadrature path stays available for cross-checks.
  struct ClosedForm {
    Fn rho;
    Fn rho_prime;
  };

  /// `kernel_slope` (k') is optional; without it the first-order rho'' is
  /// taken by central differences of t k(t).
  LossTable(Fn kernel, Fn kernel_slope, IntegrationOrder order, double t_max,
            std::vector<double> breakpoints, std::size_t cells = 4096,
            QuadratureOptions opts = {}, ClosedForm closed = {});

  IntegrationOrder order() const noexcept { return order_; }
  double t_max() const noexcept { return t_max_; }
  double kernel(double t) const { return kernel_(t); }
  const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }

  double rho(double t) const;        // t >= 0
  double rho_prime(double t) const;  // t >= 0
  double rho_second(double t) const; // t >= 0
  /// rho'(t)/t, with the t -> 0 limit k(0) filled in.
  double influence(double t) const;
  /// rho and rho' through the node table plus on-demand quadrature, ignoring
  /// any closed form.
  double quadrature_rho(double t) const;
  double quadrature_rho_prime(double t) const;
  bool has_closed_form() const noexcept { return static_cast<bool>(closed_.rho); }
  /// Largest |rho''| or rho'/t seen on the grid; used for step-size rules.
  double curvature_bound() const noexcept { return curvature_bound_; }
  /// rho'(t_max) relative to max rho' over the grid.
  double tail_slope_ratio() const noexcept { return tail_slope_ratio_; }
  /// min rho'' over the grid nodes.
  double min_second() const noexcept { return min_second_; }

  const std::vector<double>& node_rho() const noexcept { return rho_; }
  const std::vector<double>& node_rho_prime() const noexcept { return drho_; }

 private:
  std::size_t cell_of(double t) const;

  Fn kernel_;
  Fn kernel_slope_;
  IntegrationOrder order_;
  double t_max_;
  double h_;
  std::vector<double> breakpoints_;
  QuadratureOptions opts_;
  ClosedForm closed_;
  std::vector<double> rho_;   // rho at nodes
  std::vector<double> drho_;  // rho' at nodes
  double curvature_bound_ = 0.0;
  double tail_slope_ratio_ = 0.0;
  double min_second_ = 0.0;
};

/// Radial robust loss rho(t) in natural (unit-prefactor) form, times an
/// explicit multiplier `weight`. Scale factors from the kernel translation
/// are carried in `weight`, never folded into gamma.
class ScalarLoss {
 public:
  static constexpr double kDefaultTvEpsilon = 1e-4;
  static constexpr double kBetaMinusInfinity = -std::numeric_limits<double>::infinity();

  static ScalarLoss quadratic();
  /// rho(t) = t^2, the Dirichlet energy penalty (twice the quadratic).
  static ScalarLoss dirichlet();
  static ScalarLoss tv(double tv_epsilon = kDefaultTvEpsilon);
  static ScalarLoss huber(double gamma);
  static ScalarLoss welsch(double gamma);
  static ScalarLoss lorentzian(double gamma);
  static ScalarLoss clipped_quadratic(double gamma);
  static ScalarLoss exponential_induced(double gamma, double tv_epsilon = kDefaultTvEpsilon);
  static ScalarLoss barron(double beta, double gamma);
  /// `gamma` only sets the scale used by curvature estimates and grids.
  static ScalarLoss from_table(std::shared_ptr<const LossTable> table, double gamma = 1.0);

  LossFamily family() const noexcept { return family_; }
  double gamma() const noexcept { return gamma_; }
  double beta() const noexcept { return beta_; }
  double weight() const noexcept { return weight_; }
  double tv_epsilon() const noexcept { return tv_epsilon_; }
  const std::shared_ptr<const LossTable>& table() const noexcept { return table_; }

  /// Copy with the multiplier replaced.
  ScalarLoss scaled(double weight) const;
  ScalarLoss with_tv_epsilon(double eps) const;

 private:
  ScalarLoss(LossFamily family, double gamma, double beta = 0.0);

  LossFamily family_;
  double gamma_;
  double beta_;
  double weight_ = 1.0;
  double tv_epsilon_ = kDefaultTvEpsilon;
  std::shared_ptr<const LossTable> table_;
};

double rho(const ScalarLoss& loss, double t);
double rho_prime(const ScalarLoss& loss, double t);
/// At kinks (Huber and clipped quadratic at |t| = gamma, TV and the
/// exponential-induced loss at t = 0) returns the right limit; see is_kink.
double rho_second(const ScalarLoss& loss, double t);
bool is_kink(const ScalarLoss& loss, double t);
/// rho'(t)/t. The removable singularity at 0 is filled with rho''(0+); losses
/// whose ratio blows up at 0 (TV, exponential-induced) clamp |t| below by
/// tv_epsilon.
double influence(const ScalarLoss& loss, double t);
/// True when rho'(t) -> 0 as t -> infinity.
bool is_redescending(const ScalarLoss& loss);
/// True when rho'' >= 0 everywhere.
bool is_convex(const ScalarLoss& loss);
/// Upper bound on max(|rho''|, rho'/t); enters the default solver step.
double curvature_bound(const ScalarLoss& loss);
/// Points in t >= 0 where rho' or rho'' is discontinuous.
std::vector<double> kink_points(const ScalarLoss& loss);

/// Same loss with gamma and tv_epsilon multiplied by `factor`, for moving
/// parameters given in one intensity unit into another. Tabulated losses
/// cannot be rescaled.
ScalarLoss rescale_units(const ScalarLoss& loss, double factor);

/// Grammar: family[:key=value[,key=value]...]
///   quadratic | dirichlet | tv[:eps=] | huber:gamma= | welsch:gamma= |
///   lorentzian:gamma= | clipped:gamma= | exponential:gamma= |
///   barron:beta=,gamma=    (beta accepts -inf)
/// Every family also accepts weight=.
ScalarLoss parse_loss(std::string_view spec);
std::string to_string(const ScalarLoss& loss);
std::string_view family_name(LossFamily family);

}  // namespace kbridge
