#pragma once

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "peerfx/errors.hpp"
#include "peerfx/graph.hpp"
#include "peerfx/operators.hpp"
#include "peerfx/rng.hpp"

namespace peerfx {

struct LisParams {
  double alpha = 1.0;
  double beta = 1.5;
  double delta0 = 0.6;
  double rho0 = 0.3;
  double mu = 2.0;
  double sigma = 1.0;
  double sigma_eps = 0.1;

  void validate() const {
    if (!(sigma >= 0.0)) throw InvalidSpec("sigma must be nonnegative");
    if (!(sigma_eps >= 0.0)) throw InvalidSpec("sigma_eps must be nonnegative");
  }
};

// What an estimator is allowed to see.
struct Observations {
  Vector X;
  Vector Y;
};

struct Dataset {
  Vector X;
  Vector Y;
  Vector eps;  // kept for oracle tests only
  std::uint64_t seed = 0;
  double degree_scale = 1.0;  // mean degree used for LIS rescaling
  double lambda1 = 0.0;       // measured spectral radius (LIS only)

  std::size_t n() const { return static_cast<std::size_t>(X.size()); }
  Observations observed() const { return {X, Y}; }
};

namespace detail {

inline void draw_xe(Dataset& out, std::size_t n, double mu, double sigma, double sigma_eps,
                    std::uint64_t seed) {
  Engine eng = make_engine(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  const auto nn = static_cast<Eigen::Index>(n);
  out.X.resize(nn);
  out.eps.resize(nn);
  for (Eigen::Index i = 0; i < nn; ++i) out.X[i] = mu + sigma * z(eng);
  for (Eigen::Index i = 0; i < nn; ++i) out.eps[i] = sigma_eps * z(eng);
  out.seed = seed;
}

inline void check_residual(const Vector& residual, const Vector& rhs, const char* what) {
  const double r = residual.norm();
  const double scale = std::max(rhs.norm(), 1e-300);
  if (r > 1e-9 * scale) {
    std::ostringstream msg;
    msg << what << ": structural residual " << r << " exceeds 1e-9 * ||rhs|| = " << 1e-9 * scale;
    throw NumericError(msg.str());
  }
}

}  // namespace detail

// Y solves (I - rho G) Y = alpha 1 + beta X + delta G X + eps.
inline Dataset simulate_lim(const RowNormOp& op, const LimParams& p, std::uint64_t seed) {
  p.validate();
  const std::size_t n = op.n();
  Dataset out;
  detail::draw_xe(out, n, p.mu, p.sigma, p.sigma_eps, seed);
  const auto nn = static_cast<Eigen::Index>(n);
  const Vector gx = op.apply(out.X);
  const Vector rhs = p.alpha * Vector::Ones(nn) + p.beta * out.X + p.delta * gx + out.eps;
  ResolventSpec res{p.rho, 1e-12};
  out.Y = neumann_solve([&](const Matrix& y) { return op.apply(y); }, rhs, res).col(0);
  const Vector sy = out.Y - p.rho * Vector(op.apply(out.Y));
  detail::check_residual(sy - rhs, rhs, "simulate_lim");
  return out;
}

struct LisScaling {
  double dbar = 0.0;
  double delta_n = 0.0;
  double rho_n = 0.0;
  double lambda1 = 0.0;
};

// delta_n = delta0 / dbar, rho_n = rho0 / dbar, and the spectral check
// |rho_n| lambda_1(A) < 1 - 1e-6.
inline LisScaling lis_scaling(const Graph& g, const LisParams& p,
                              std::optional<double> lambda1 = std::nullopt) {
  LisScaling s;
  s.dbar = g.mean_degree();
  if (!(s.dbar > 0.0)) throw InvalidSpec("LIS model needs a graph with edges");
  s.delta_n = p.delta0 / s.dbar;
  s.rho_n = p.rho0 / s.dbar;
  s.lambda1 = lambda1 ? *lambda1 : spectral_radius(g);
  if (!(std::abs(s.rho_n) * s.lambda1 < 1.0 - 1e-6)) {
    std::ostringstream msg;
    msg << "LIS resolvent invalid: |rho_n| * lambda_1(A) = " << std::abs(s.rho_n) * s.lambda1
        << " (rho_n=" << s.rho_n << ", lambda_1=" << s.lambda1 << ", dbar=" << s.dbar << ")";
    throw SpectralValidityError(msg.str());
  }
  return s;
}

// Y solves (I - rho_n A) Y = alpha 1 + beta X + delta_n A X + eps.
inline Dataset simulate_lis(const Graph& g, const LisParams& p, std::uint64_t seed,
                            std::optional<double> lambda1 = std::nullopt) {
  p.validate();
  const LisScaling s = lis_scaling(g, p, lambda1);
  const SparseRM A = adjacency_matrix(g);
  const std::size_t n = g.n();
  Dataset out;
  detail::draw_xe(out, n, p.mu, p.sigma, p.sigma_eps, seed);
  out.degree_scale = s.dbar;
  out.lambda1 = s.lambda1;
  const auto nn = static_cast<Eigen::Index>(n);
  const Vector ax = A * out.X;
  const Vector rhs = p.alpha * Vector::Ones(nn) + p.beta * out.X + s.delta_n * ax + out.eps;
  if (s.rho_n == 0.0) {
    out.Y = rhs;
    return out;
  }
  ResolventSpec res{s.rho_n, 1e-12, 0, s.lambda1};
  out.Y = neumann_solve([&](const Matrix& y) { return Matrix(A * y); }, rhs, res).col(0);
  const Vector sy = out.Y - s.rho_n * Vector(A * out.Y);
  detail::check_residual(sy - rhs, rhs, "simulate_lis");
  return out;
}

inline void write_dataset_csv(std::ostream& os, const Dataset& d, bool include_eps = false) {
  os << "node_id,x,y" << (include_eps ? ",eps" : "") << '\n';
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < d.X.size(); ++i) {
    os << i << ',' << d.X[i] << ',' << d.Y[i];
    if (include_eps) os << ',' << d.eps[i];
    os << '\n';
  }
}

}  // namespace peerfx
