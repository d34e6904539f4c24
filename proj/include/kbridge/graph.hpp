#pragma once

#include <Eigen/Dense>

#include "kbridge/image.hpp"
#include "kbridge/kernels.hpp"
#include "kbridge/losses.hpp"

namespace kbridge {

/// Dense instances are an oracle, not a production path.
inline constexpr int kMaxDenseNodes = 4096;

struct AffinityMatrix {
  int width = 0;
  int height = 0;
  Eigen::MatrixXd K;
  Eigen::VectorXd d;
  double gamma = 0.0;
  int patch_radius = 0;

  Eigen::Index n() const noexcept { return K.rows(); }
  Eigen::MatrixXd D() const { return d.asDiagonal(); }
};

struct LaplacianBundle {
  Eigen::MatrixXd W;         // D^-1 K
  Eigen::MatrixXd L_norm;    // I - W
  Eigen::MatrixXd L_unnorm;  // D - K
  double alpha = 0.0;
};

/// Euclidean distance between the patches of radius `patch_radius` centred
/// at (r1, c1) and (r2, c2), reflect-padded at the borders.
double patch_distance(const Image& x, int r1, int c1, int r2, int c2, int patch_radius);

/// K_ij = h_ij k(||R_i x - R_j x||) for j in the stencil window of i, and 1
/// on the diagonal. Window offsets that leave the image are dropped.
AffinityMatrix build_affinity(const Image& signal, const ScalarKernel& k, const Stencil& stencil,
                              int patch_radius);

Eigen::MatrixXd normalized_filter(const AffinityMatrix& A);
/// W, both Laplacians, and alpha set to alpha_mean_degree.
LaplacianBundle make_laplacians(const AffinityMatrix& A);

/// Frobenius-optimal alpha for I - D^-1 K ~ alpha (D - K).
double alpha_exact(const AffinityMatrix& A);
/// N / sum(d).
double alpha_mean_degree(const AffinityMatrix& A);
/// ||(I - D^-1 K) - alpha (D - K)||_F
double frobenius_residual(const AffinityMatrix& A, double alpha);

/// (1 / 2 sigma^2) x^T (I - W) x with W frozen.
double pseudo_quadratic_energy(const Image& x, const LaplacianBundle& B, double sigma);
/// (alpha / 2 sigma^2) x^T (D - K) x and its frozen-weight gradient.
double unnormalized_energy(const Image& x, const LaplacianBundle& B, double sigma);
Eigen::VectorXd unnormalized_energy_gradient(const Image& x, const LaplacianBundle& B, double sigma);

/// Checks (alpha / 2 sigma^2)(d_i - 1) = h_self for every node; the graph
/// is not altered, only the largest mismatch is reported.
struct DegreeIdentityReport {
  double max_abs_mismatch = 0.0;
  Eigen::Index worst_node = 0;
};
DegreeIdentityReport degree_identity_report(const AffinityMatrix& A, double alpha, double sigma,
                                            double h_self);

struct HessianReport {
  Eigen::MatrixXd fd_hessian;
  Eigen::MatrixXd analytic_hessian;
  /// max |fd - analytic| / max |analytic|
  double hessian_rel_deviation = 0.0;
  /// H x from the finite-difference Hessian against rho''(||Ax||) A^T A x.
  double contraction_rel_deviation = 0.0;
  Eigen::VectorXd contraction;  // analytic H x
  double norm_Ax = 0.0;
};

/// phi(x) = rho(||A x||). The FD Hessian differentiates the analytic
/// gradient rho'(||Ax||) A^T u with central differences of width `fd_step`.
HessianReport hessian_isotropic_check(const Eigen::MatrixXd& A_op, const ScalarLoss& loss,
                                      const Eigen::VectorXd& x, double fd_step = 1e-5);

/// 1/2 sum_i sum_offsets h rho(u_i - u_j) over the stencil, neighbors
/// resolved with `boundary`.
double pairwise_energy(const Image& u, const ScalarLoss& loss, const Stencil& stencil,
                       Boundary boundary);
/// Exact gradient of pairwise_energy: each ordered pair feeds both ends.
Image pairwise_energy_gradient(const Image& u, const ScalarLoss& loss, const Stencil& stencil,
                               Boundary boundary);

/// Laplacian with pair coefficients c_ij = k(|x_i - x_j|) built row by row
/// from the stencil: L_ii = sum h c, L_ij = -h c.
Eigen::MatrixXd stencil_laplacian_direct(const Image& x, const ScalarKernel& k,
                                         const Stencil& stencil, Boundary boundary);
/// Same operator assembled as sum 1/2 h c R_ij^T R_ij with R_ij = e_i^T - e_j^T.
/// Agrees with the direct form whenever the pair set is symmetric.
Eigen::MatrixXd stencil_laplacian_extractors(const Image& x, const ScalarKernel& k,
                                             const Stencil& stencil, Boundary boundary);

Eigen::VectorXd to_vector(const Image& img);
Image from_vector(const Eigen::VectorXd& v, int width, int height);

}  // namespace kbridge
