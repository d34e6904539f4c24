#include "kbridge/graph.hpp"

#include <array>
#include <cmath>
#include <utility>
#include <string>

#include "kbridge/errors.hpp"

namespace kbridge {

namespace {

void guard_size(const Image& x) {
  if (x.empty()) throw InvalidArgument("empty image");
  if (x.size() > static_cast<std::size_t>(kMaxDenseNodes)) {
    throw InvalidArgument("instance too large for dense graph (n = " + std::to_string(x.size()) +
                          ", limit " + std::to_string(kMaxDenseNodes) + ")");
  }
}

Eigen::Index node(int r, int c, int width) {
  return static_cast<Eigen::Index>(r) * width + c;
}

}  // namespace

Eigen::VectorXd to_vector(const Image& img) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(img.size()));
  for (std::size_t i = 0; i < img.size(); ++i) v(static_cast<Eigen::Index>(i)) = img[i];
  return v;
}

Image from_vector(const Eigen::VectorXd& v, int width, int height) {
  return Image(width, height, std::vector<double>(v.data(), v.data() + v.size()));
}

double patch_distance(const Image& x, int r1, int c1, int r2, int c2, int patch_radius) {
  if (patch_radius == 0) return std::abs(x(r1, c1) - x(r2, c2));
  double s = 0.0;
  const int h = x.height();
  const int w = x.width();
  for (int dr = -patch_radius; dr <= patch_radius; ++dr) {
    for (int dc = -patch_radius; dc <= patch_radius; ++dc) {
      const double a = x(resolve_index(r1 + dr, h, Boundary::Reflect),
                         resolve_index(c1 + dc, w, Boundary::Reflect));
      const double b = x(resolve_index(r2 + dr, h, Boundary::Reflect),
                         resolve_index(c2 + dc, w, Boundary::Reflect));
      s += (a - b) * (a - b);
    }
  }
  return std::sqrt(s);
}

AffinityMatrix build_affinity(const Image& signal, const ScalarKernel& k, const Stencil& stencil,
                              int patch_radius) {
  guard_size(signal);
  if (patch_radius < 0) throw InvalidArgument("patch radius must be >= 0");
  const int w = signal.width();
  const int h = signal.height();
  const auto n = static_cast<Eigen::Index>(signal.size());
  AffinityMatrix A;
  A.width = w;
  A.height = h;
  A.gamma = k.gamma();
  A.patch_radius = patch_radius;
  A.K = Eigen::MatrixXd::Identity(n, n);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (const auto& tap : stencil.taps()) {
        const int r2 = r + tap.di;
        const int c2 = c + tap.dj;
        if (r2 < 0 || r2 >= h || c2 < 0 || c2 >= w) continue;
        const double dist = patch_distance(signal, r, c, r2, c2, patch_radius);
        A.K(node(r, c, w), node(r2, c2, w)) = tap.weight * kernel_eval(k, dist);
      }
    }
  }
  A.d = A.K.rowwise().sum();
  return A;
}

Eigen::MatrixXd normalized_filter(const AffinityMatrix& A) {
  for (Eigen::Index i = 0; i < A.d.size(); ++i) {
    if (!(A.d(i) > 0.0)) throw NumericError("zero row sum in affinity matrix");
  }
  return A.d.cwiseInverse().asDiagonal() * A.K;
}

LaplacianBundle make_laplacians(const AffinityMatrix& A) {
  LaplacianBundle B;
  B.W = normalized_filter(A);
  B.L_norm = Eigen::MatrixXd::Identity(A.n(), A.n()) - B.W;
  B.L_unnorm = A.D() - A.K;
  B.alpha = alpha_mean_degree(A);
  return B;
}

double alpha_exact(const AffinityMatrix& A) {
  const Eigen::MatrixXd& K = A.K;
  const Eigen::VectorXd& d = A.d;
  const Eigen::VectorXd dinv = d.cwiseInverse();
  // tr(K D^-1 K) = sum_ij K_ij^2 / d_j for symmetric K.
  const double tr_kdk = (K.array().square().rowwise() * dinv.transpose().array()).sum();
  const double tr_k = K.trace();
  const double tr_d = d.sum();
  const double tr_k2 = K.array().square().sum();
  const double tr_kd = (K.diagonal().array() * d.array()).sum();
  const double tr_d2 = d.squaredNorm();
  const double num = tr_kdk - 2.0 * tr_k + tr_d;
  const double den = tr_k2 - 2.0 * tr_kd + tr_d2;
  if (den <= 0.0 || (A.D() - K).cwiseAbs().maxCoeff() == 0.0) {
    throw NumericError("alpha undefined: diagonal affinity");
  }
  return num / den;
}

double alpha_mean_degree(const AffinityMatrix& A) {
  return static_cast<double>(A.n()) / A.d.sum();
}

double frobenius_residual(const AffinityMatrix& A, double alpha) {
  const Eigen::MatrixXd L = Eigen::MatrixXd::Identity(A.n(), A.n()) - normalized_filter(A);
  return (L - alpha * (A.D() - A.K)).norm();
}

double pseudo_quadratic_energy(const Image& x, const LaplacianBundle& B, double sigma) {
  const Eigen::VectorXd v = to_vector(x);
  if (v.size() != B.L_norm.rows()) throw DimensionMismatch("image size does not match graph");
  return v.dot(B.L_norm * v) / (2.0 * sigma * sigma);
}

double unnormalized_energy(const Image& x, const LaplacianBundle& B, double sigma) {
  const Eigen::VectorXd v = to_vector(x);
  if (v.size() != B.L_unnorm.rows()) throw DimensionMismatch("image size does not match graph");
  return B.alpha / (2.0 * sigma * sigma) * v.dot(B.L_unnorm * v);
}

Eigen::VectorXd unnormalized_energy_gradient(const Image& x, const LaplacianBundle& B,
                                             double sigma) {
  const Eigen::VectorXd v = to_vector(x);
  if (v.size() != B.L_unnorm.rows()) throw DimensionMismatch("image size does not match graph");
  return B.alpha / (sigma * sigma) * (B.L_unnorm * v);
}

DegreeIdentityReport degree_identity_report(const AffinityMatrix& A, double alpha, double sigma,
                                            double h_self) {
  DegreeIdentityReport rep;
  const double c = alpha / (2.0 * sigma * sigma);
  for (Eigen::Index i = 0; i < A.d.size(); ++i) {
    const double m = std::abs(c * (A.d(i) - 1.0) - h_self);
    if (m > rep.max_abs_mismatch) {
      rep.max_abs_mismatch = m;
      rep.worst_node = i;
    }
  }
  return rep;
}

HessianReport hessian_isotropic_check(const Eigen::MatrixXd& A_op, const ScalarLoss& loss,
                                      const Eigen::VectorXd& x, double fd_step) {
  if (A_op.cols() != x.size()) throw DimensionMismatch("operator and vector sizes differ");
  const Eigen::VectorXd Ax = A_op * x;
  const double norm = Ax.norm();
  if (!(norm > 0.0)) throw NumericError("||Ax|| is zero; the isotropic Hessian is undefined");

  const auto grad = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd {
    const Eigen::VectorXd Ay = A_op * y;
    const double t = Ay.norm();
    if (t == 0.0) return Eigen::VectorXd::Zero(y.size());
    return rho_prime(loss, t) / t * (A_op.transpose() * Ay);
  };

  const Eigen::Index n = x.size();
  HessianReport rep;
  rep.norm_Ax = norm;
  rep.fd_hessian.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXd xp = x;
    Eigen::VectorXd xm = x;
    const double h = fd_step * std::max(1.0, std::abs(x(j)));
    xp(j) += h;
    xm(j) -= h;
    rep.fd_hessian.col(j) = (grad(xp) - grad(xm)) / (xp(j) - xm(j));
  }
  rep.fd_hessian = 0.5 * (rep.fd_hessian + rep.fd_hessian.transpose()).eval();

  const Eigen::VectorXd u = Ax / norm;
  const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(u.size(), u.size()) - u * u.transpose();
  rep.analytic_hessian = rho_prime(loss, norm) / norm * A_op.transpose() * P * A_op +
                         rho_second(loss, norm) * A_op.transpose() * (u * u.transpose()) * A_op;
  const double scale = rep.analytic_hessian.cwiseAbs().maxCoeff();
  rep.hessian_rel_deviation =
      (rep.fd_hessian - rep.analytic_hessian).cwiseAbs().maxCoeff() / (scale > 0.0 ? scale : 1.0);

  rep.contraction = rho_second(loss, norm) * (A_op.transpose() * Ax);
  const Eigen::VectorXd fd_contraction = rep.fd_hessian * x;
  // Relative to the size of the terms that cancel, since H x can be tiny.
  const double ref = (rep.fd_hessian.cwiseAbs() * x.cwiseAbs()).maxCoeff();
  rep.contraction_rel_deviation =
      (fd_contraction - rep.contraction).cwiseAbs().maxCoeff() / (ref > 0.0 ? ref : 1.0);
  return rep;
}

double pairwise_energy(const Image& u, const ScalarLoss& loss, const Stencil& stencil,
                       Boundary boundary) {
  const int w = u.width();
  const int h = u.height();
  std::vector<double> rows(static_cast<std::size_t>(h), 0.0);
  for (int r = 0; r < h; ++r) {
    std::vector<double> terms;
    terms.reserve(static_cast<std::size_t>(w) * stencil.taps().size());
    for (int c = 0; c < w; ++c) {
      for (const auto& tap : stencil.taps()) {
        const double v = u(resolve_index(r + tap.di, h, boundary), resolve_index(c + tap.dj, w, boundary));
        terms.push_back(tap.weight * rho(loss, u(r, c) - v));
      }
    }
    rows[static_cast<std::size_t>(r)] = pairwise_sum(terms);
  }
  return 0.5 * pairwise_sum(rows);
}

Image pairwise_energy_gradient(const Image& u, const ScalarLoss& loss, const Stencil& stencil,
                               Boundary boundary) {
  const int w = u.width();
  const int h = u.height();
  Image g(w, h, 0.0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (const auto& tap : stencil.taps()) {
        const int r2 = resolve_index(r + tap.di, h, boundary);
        const int c2 = resolve_index(c + tap.dj, w, boundary);
        const double f = 0.5 * tap.weight * rho_prime(loss, u(r, c) - u(r2, c2));
        g(r, c) += f;
        g(r2, c2) -= f;
      }
    }
  }
  return g;
}

Eigen::MatrixXd stencil_laplacian_direct(const Image& x, const ScalarKernel& k,
                                         const Stencil& stencil, Boundary boundary) {
  guard_size(x);
  const int w = x.width();
  const int h = x.height();
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const Eigen::Index i = node(r, c, w);
      for (const auto& tap : stencil.taps()) {
        const int r2 = resolve_index(r + tap.di, h, boundary);
        const int c2 = resolve_index(c + tap.dj, w, boundary);
        const double coeff = tap.weight * kernel_eval(k, x(r, c) - x(r2, c2));
        L(i, i) += coeff;
        L(i, node(r2, c2, w)) -= coeff;
      }
    }
  }
  return L;
}

Eigen::MatrixXd stencil_laplacian_extractors(const Image& x, const ScalarKernel& k,
                                             const Stencil& stencil, Boundary boundary) {
  guard_size(x);
  const int w = x.width();
  const int h = x.height();
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (const auto& tap : stencil.taps()) {
        const int r2 = resolve_index(r + tap.di, h, boundary);
        const int c2 = resolve_index(c + tap.dj, w, boundary);
        // R_ij as its two non-zero entries; R^T R is accumulated over them.
        const std::array<std::pair<Eigen::Index, double>, 2> R{
            {{node(r, c, w), 1.0}, {node(r2, c2, w), -1.0}}};
        const double coeff = 0.5 * tap.weight * kernel_eval(k, x(r, c) - x(r2, c2));
        for (const auto& [a, ra] : R) {
          for (const auto& [b, rb] : R) L(a, b) += coeff * ra * rb;
        }
      }
    }
  }
  return L;
}

}  // namespace kbridge
