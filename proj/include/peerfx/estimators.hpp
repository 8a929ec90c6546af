#pragma once

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "peerfx/dgp.hpp"
#include "peerfx/errors.hpp"
#include "peerfx/graph.hpp"
#include "peerfx/operators.hpp"

namespace peerfx {

enum class EstimatorKind { ols_lim, tsls_lim, tsls_lis };
enum class Status { ok, unstable, singular, rank_deficient, failed };

inline std::string to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::ols_lim: return "ols_lim";
    case EstimatorKind::tsls_lim: return "tsls_lim";
    case EstimatorKind::tsls_lis: return "tsls_lis";
  }
  return "unknown";
}

inline EstimatorKind estimator_from_string(const std::string& s) {
  if (s == "ols_lim" || s == "ols") return EstimatorKind::ols_lim;
  if (s == "tsls_lim" || s == "2sls" || s == "tsls") return EstimatorKind::tsls_lim;
  if (s == "tsls_lis") return EstimatorKind::tsls_lis;
  throw InvalidSpec("unknown estimator '" + s + "'");
}

inline std::string to_string(Status s) {
  switch (s) {
    case Status::ok: return "ok";
    case Status::unstable: return "unstable";
    case Status::singular: return "singular";
    case Status::rank_deficient: return "rank_deficient";
    case Status::failed: return "failed";
  }
  return "unknown";
}

using Vec4 = Eigen::Vector4d;

// Instability rule for 2SLS: any of these marks the replication unstable.
inline constexpr double kCondLimit = 1e10;
inline constexpr double kPartialledSvFactor = 1e-8;  // times n
inline constexpr double kFirstStageFLimit = 10.0;

struct Estimate {
  EstimatorKind estimator = EstimatorKind::ols_lim;
  Status status = Status::failed;
  // (alpha, beta, delta, rho). For tsls_lis these are on the rescaled
  // scale, comparable to (delta0, rho0).
  Vec4 theta = Vec4::Constant(std::numeric_limits<double>::quiet_NaN());
  double raw_delta = std::numeric_limits<double>::quiet_NaN();  // tsls_lis: delta_n
  double raw_rho = std::numeric_limits<double>::quiet_NaN();    // tsls_lis: rho_n
  double cond = std::numeric_limits<double>::infinity();
  double min_sv = 0.0;
  double partialled_min_sv = std::numeric_limits<double>::quiet_NaN();
  double first_stage_f = std::numeric_limits<double>::quiet_NaN();
  double forms_gap = std::numeric_limits<double>::quiet_NaN();
  bool forms_agree = true;
  bool unstable = false;
  int deficient_column = -1;
  std::string message;
  std::size_t n = 0;
  double d = 0.0;
  std::uint64_t seed = 0;

  bool usable() const { return status == Status::ok || status == Status::unstable; }
  double alpha() const { return theta[0]; }
  double beta() const { return theta[1]; }
  double delta() const { return theta[2]; }
  double rho() const { return theta[3]; }
};

namespace detail {

inline Matrix lim_regressors(const RowNormOp& op, const Observations& obs) {
  const auto n = obs.X.size();
  Matrix W(n, 4);
  W.col(0).setOnes();
  W.col(1) = obs.X;
  W.col(2) = op.apply(obs.X);
  W.col(3) = op.apply(obs.Y);
  return W;
}

inline Matrix lim_instruments(const RowNormOp& op, const Observations& obs) {
  const auto n = obs.X.size();
  Matrix Z(n, 4);
  Z.col(0).setOnes();
  Z.col(1) = obs.X;
  Z.col(2) = op.apply(obs.X);
  Z.col(3) = op.apply(Z.col(2));
  return Z;
}

inline Eigen::VectorXd singular_values(const Matrix& m) {
  return Eigen::JacobiSVD<Matrix>(m).singularValues();
}

inline double cond_of(const Eigen::VectorXd& sv) {
  if (sv.size() == 0) return std::numeric_limits<double>::infinity();
  const double lo = sv[sv.size() - 1];
  return lo > 0.0 ? sv[0] / lo : std::numeric_limits<double>::infinity();
}

// Residual of each column of B after least squares on A.
inline Matrix partial_out(const Matrix& A, const Matrix& B) {
  Eigen::ColPivHouseholderQR<Matrix> qr(A);
  qr.setThreshold(1e-12);
  return B - A * qr.solve(B);
}

inline void check_lengths(const Observations& obs, std::size_t n) {
  if (static_cast<std::size_t>(obs.X.size()) != n || static_cast<std::size_t>(obs.Y.size()) != n)
    throw InvalidSpec("dataset length does not match graph size");
  if (n < 5) throw InvalidSpec("estimation needs n >= 5");
}

inline double rel_gap(const Vec4& a, const Vec4& b) {
  return (a - b).norm() / std::max(1.0, std::max(a.norm(), b.norm()));
}

// F statistic for the last column of Z as an excluded instrument for y,
// with the other columns as controls.
inline double first_stage_f(const Matrix& Z, const Vector& y) {
  const auto n = Z.rows();
  const auto k = Z.cols();
  const Matrix controls = Z.leftCols(k - 1);
  const Matrix zt = partial_out(controls, Z.col(k - 1));
  const Matrix yt = partial_out(controls, y);
  const double zz = zt.squaredNorm();
  if (!(zz > 0.0)) return 0.0;
  const double zy = zt.col(0).dot(yt.col(0));
  const double explained = zy * zy / zz;
  const double rss = std::max(yt.squaredNorm() - explained, 0.0);
  if (!(rss > 0.0)) return std::numeric_limits<double>::infinity();
  return explained / (rss / static_cast<double>(n - k));
}

}  // namespace detail

// Least squares of Y on (1, X, GX, GY) via column-pivoted QR.
inline Estimate ols_lim(const RowNormOp& op, const Observations& obs) {
  detail::check_lengths(obs, op.n());
  Estimate e;
  e.estimator = EstimatorKind::ols_lim;
  e.n = op.n();
  e.d = op.graph().mean_degree();
  const Matrix W = detail::lim_regressors(op, obs);
  const Eigen::VectorXd sv = detail::singular_values(W);
  e.min_sv = sv[sv.size() - 1];
  const double c = detail::cond_of(sv);
  e.cond = c * c;  // cond(W^T W)
  Eigen::ColPivHouseholderQR<Matrix> qr(W);
  qr.setThreshold(1e-10);
  if (qr.rank() < 4) {
    e.status = Status::rank_deficient;
    e.deficient_column = static_cast<int>(qr.colsPermutation().indices()[qr.rank()]);
    e.message = "regressor column " + std::to_string(e.deficient_column) + " is collinear";
    return e;
  }
  e.theta = qr.solve(obs.Y);
  e.status = e.theta.allFinite() ? Status::ok : Status::failed;
  return e;
}

inline Estimate ols_lim(const RowNormOp& op, const Dataset& d) {
  Estimate e = ols_lim(op, d.observed());
  e.seed = d.seed;
  return e;
}

struct FwlEstimate {
  double delta = std::numeric_limits<double>::quiet_NaN();
  double rho = std::numeric_limits<double>::quiet_NaN();
  Status status = Status::failed;
  double cond = std::numeric_limits<double>::infinity();  // of W2~^T W2~
};

// Partial (1, X) out of (GX, GY) and Y, then regress.
inline FwlEstimate ols_lim_fwl(const RowNormOp& op, const Observations& obs) {
  detail::check_lengths(obs, op.n());
  FwlEstimate out;
  const auto n = obs.X.size();
  Matrix W1(n, 2);
  W1.col(0).setOnes();
  W1.col(1) = obs.X;
  Eigen::ColPivHouseholderQR<Matrix> qr1(W1);
  qr1.setThreshold(1e-10);
  if (qr1.rank() < 2) {
    out.status = Status::rank_deficient;
    return out;
  }
  Matrix W2(n, 3);
  W2.col(0) = op.apply(obs.X);
  W2.col(1) = op.apply(obs.Y);
  W2.col(2) = obs.Y;
  const Matrix R = W2 - W1 * qr1.solve(W2);
  const Matrix Wt = R.leftCols(2);
  const double c = detail::cond_of(detail::singular_values(Wt));
  out.cond = c * c;
  Eigen::ColPivHouseholderQR<Matrix> qr2(Wt);
  qr2.setThreshold(1e-10);
  if (qr2.rank() < 2) {
    out.status = Status::rank_deficient;
    return out;
  }
  const Eigen::Vector2d th = qr2.solve(R.col(2));
  out.delta = th[0];
  out.rho = th[1];
  out.status = th.allFinite() ? Status::ok : Status::failed;
  return out;
}

struct TslsOptions {
  // Solve singular systems anyway (minimum-norm), flagged unstable.
  bool pseudo_solve = false;
};

namespace detail {

// Shared 2SLS core: IV form (Z^T W) theta = Z^T Y plus projection form.
inline void tsls_core(const Matrix& Z, const Matrix& W, const Vector& Y, const TslsOptions& opt,
                      Estimate& e) {
  const Matrix ZW = Z.transpose() * W;
  const Vector ZY = Z.transpose() * Y;
  const Eigen::VectorXd sv = singular_values(ZW);
  e.min_sv = sv[sv.size() - 1];
  e.cond = cond_of(sv);

  Eigen::ColPivHouseholderQR<Matrix> qr(ZW);
  qr.setThreshold(1e-14);
  const bool singular = qr.rank() < 4;
  if (singular && !opt.pseudo_solve) {
    e.status = Status::singular;
    e.unstable = true;
    e.message = "Z^T W is singular (cond=" + std::to_string(e.cond) + ")";
    return;
  }
  if (singular) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(ZW);
    e.theta = cod.solve(ZY);
    e.unstable = true;
    e.message = "pseudo-solve of singular Z^T W";
  } else {
    e.theta = qr.solve(ZY);
    // projection form: regress Y on P_Z W
    Eigen::HouseholderQR<Matrix> qz(Z);
    const Matrix Q = qz.householderQ() * Matrix::Identity(Z.rows(), Z.cols());
    const Matrix PW = Q * (Q.transpose() * W);
    Eigen::ColPivHouseholderQR<Matrix> qp(PW);
    const Vec4 proj = qp.solve(Y);
    e.forms_gap = rel_gap(e.theta, proj);
    e.forms_agree = !(e.cond < kCondLimit) || e.forms_gap <= 1e-8;
  }
  if (!e.theta.allFinite()) {
    e.status = Status::failed;
    e.message = "non-finite solution";
    return;
  }

  // Partialled 2x2 system and first-stage strength of the excluded instrument.
  const Matrix controls = Z.leftCols(2);
  const Matrix zt = partial_out(controls, Z.rightCols(2));
  const Matrix wt = partial_out(controls, W.rightCols(2));
  e.partialled_min_sv = singular_values(zt.transpose() * wt)[1];
  e.first_stage_f = first_stage_f(Z, W.col(3));
  const double n = static_cast<double>(Z.rows());
  if (e.cond >= kCondLimit || e.partialled_min_sv < kPartialledSvFactor * n ||
      e.first_stage_f < kFirstStageFLimit) {
    e.unstable = true;
  }
  e.status = e.unstable ? Status::unstable : Status::ok;
}

}  // namespace detail

// Just-identified 2SLS with Z = (1, X, GX, G^2 X).
inline Estimate tsls_lim(const RowNormOp& op, const Observations& obs, const TslsOptions& opt = {}) {
  detail::check_lengths(obs, op.n());
  Estimate e;
  e.estimator = EstimatorKind::tsls_lim;
  e.n = op.n();
  e.d = op.graph().mean_degree();
  detail::tsls_core(detail::lim_instruments(op, obs), detail::lim_regressors(op, obs), obs.Y, opt,
                    e);
  return e;
}

inline Estimate tsls_lim(const RowNormOp& op, const Dataset& d, const TslsOptions& opt = {}) {
  Estimate e = tsls_lim(op, d.observed(), opt);
  e.seed = d.seed;
  return e;
}

// 2SLS for the sums model with Z = (1, X, AX, A^2 X), W = (1, X, AX, AY),
// solved on the rescaled system (ZF)^T (WH) phi = (ZF)^T Y with
// F = diag(1, 1, 1/d, 1/d^2), H = diag(1, 1, 1/d, 1/d), d the mean degree.
// theta holds phi (comparable to delta0, rho0); raw_* hold H phi.
inline Estimate tsls_lis(const Graph& g, const Observations& obs, const TslsOptions& opt = {}) {
  detail::check_lengths(obs, g.n());
  Estimate e;
  e.estimator = EstimatorKind::tsls_lis;
  e.n = g.n();
  e.d = g.mean_degree();
  if (!(e.d > 0.0)) {
    e.status = Status::failed;
    e.message = "graph has no edges";
    return e;
  }
  const SparseRM A = adjacency_matrix(g);
  const auto n = obs.X.size();
  const double d = e.d;
  Matrix Z(n, 4), W(n, 4);
  Z.col(0).setOnes();
  Z.col(1) = obs.X;
  Z.col(2) = A * obs.X;
  Z.col(3) = A * Z.col(2);
  W.col(0).setOnes();
  W.col(1) = obs.X;
  W.col(2) = Z.col(2);
  W.col(3) = A * obs.Y;
  Z.col(2) /= d;
  Z.col(3) /= d * d;
  W.col(2) /= d;
  W.col(3) /= d;
  detail::tsls_core(Z, W, obs.Y, opt, e);
  if (e.usable()) {
    e.raw_delta = e.theta[2] / d;
    e.raw_rho = e.theta[3] / d;
  }
  return e;
}

inline Estimate tsls_lis(const Graph& g, const Dataset& data, const TslsOptions& opt = {}) {
  Estimate e = tsls_lis(g, data.observed(), opt);
  e.seed = data.seed;
  return e;
}

inline void write_estimate_header(std::ostream& os) {
  os << "estimator,n,d,seed,alpha,beta,delta,rho,cond,status\n";
}

inline void write_estimate_row(std::ostream& os, const Estimate& e) {
  std::ostringstream s;
  s << std::setprecision(17);
  s << to_string(e.estimator) << ',' << e.n << ',' << e.d << ',' << e.seed << ',' << e.theta[0]
    << ',' << e.theta[1] << ',' << e.theta[2] << ',' << e.theta[3] << ',' << e.cond << ','
    << to_string(e.status) << '\n';
  os << s.str();
}

}  // namespace peerfx
