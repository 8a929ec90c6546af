#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "peerfx/errors.hpp"
#include "peerfx/experiment.hpp"
#include "peerfx/graph.hpp"
#include "peerfx/operators.hpp"

namespace peerfx {

struct OracleReport {
  std::string quantity;
  double fast = 0.0;
  double oracle = 0.0;
  double abs_gap = 0.0;
  double rel_gap = 0.0;
  double tol = 0.0;
  bool relative = true;
  bool pass = false;
};

inline OracleReport compare(const std::string& name, double fast, double oracle, double tol,
                            bool relative = true) {
  OracleReport r;
  r.quantity = name;
  r.fast = fast;
  r.oracle = oracle;
  r.abs_gap = std::abs(fast - oracle);
  const double scale = std::max(std::abs(oracle), std::abs(fast));
  r.rel_gap = scale > 0.0 ? r.abs_gap / scale : 0.0;
  r.tol = tol;
  r.relative = relative;
  r.pass = relative ? (r.rel_gap <= tol || r.abs_gap <= tol * 1e-6) : r.abs_gap <= tol;
  return r;
}

inline std::ostream& operator<<(std::ostream& os, const OracleReport& r) {
  std::ostringstream s;
  s << std::setprecision(12) << (r.pass ? "PASS " : "FAIL ") << r.quantity << " fast=" << r.fast
    << " oracle=" << r.oracle << " abs_gap=" << r.abs_gap << " rel_gap=" << r.rel_gap
    << " tol=" << r.tol << (r.relative ? " (relative)" : " (absolute)");
  return os << s.str();
}

// Appends one line per report to a text file.
class AuditLog {
 public:
  explicit AuditLog(std::string path) : path_(std::move(path)) {}

  void append(const OracleReport& r) {
    std::lock_guard<std::mutex> lock(mu_);
    std::ofstream f(path_, std::ios::app);
    if (!f) throw FormatError("cannot append to audit log '" + path_ + "'");
    f << r << '\n';
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Cycle census by explicit enumeration

inline constexpr std::size_t kBruteCycleMaxN = 12;

struct BruteCycleDetail {
  CycleCensus census;
  std::int64_t simple4 = 0;         // i->j->k->l->i, all distinct
  std::int64_t star4 = 0;           // i->j->i->k->i, j != k
  std::int64_t path4 = 0;           // i->j->k->j->i, k != i
  std::int64_t back_and_forth = 0;  // i->j->i->j->i (excluded)
};

inline BruteCycleDetail brute_cycle_detail(const Graph& g) {
  const std::size_t n = g.n();
  if (n > kBruteCycleMaxN)
    throw SizeError("brute_cycle_census supports n <= " + std::to_string(kBruteCycleMaxN) +
                    " (got " + std::to_string(n) + ")");
  std::vector<std::vector<int>> a(n, std::vector<int>(n, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i][j] = g.has_edge(i, j) ? 1 : 0;
  BruteCycleDetail out;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k) {
        if (a[i][j] && a[j][k] && a[k][i]) ++out.census.c3;
        if (i != j && i != k && j != k && a[i][j] && a[i][k] && !a[j][k]) ++out.census.open_triples;
        for (std::size_t l = 0; l < n; ++l) {
          if (!(a[i][j] && a[j][k] && a[k][l] && a[l][i])) continue;
          if (k == i && l == j) {
            ++out.back_and_forth;
          } else if (k == i) {
            ++out.star4;
          } else if (l == j) {
            ++out.path4;
          } else {
            ++out.simple4;
          }
        }
      }
  out.census.c4 = out.simple4 + out.star4 + out.path4;
  const std::int64_t denom = out.census.c3 + out.census.open_triples;
  out.census.clustering =
      denom > 0 ? static_cast<double>(out.census.c3) / static_cast<double>(denom) : 0.0;
  return out;
}

inline CycleCensus brute_cycle_census(const Graph& g) { return brute_cycle_detail(g).census; }

// ---------------------------------------------------------------------------
// Dense moment recomputation

inline constexpr std::size_t kDenseOracleMaxN = 1500;

// Materialises G, S^{-1} and H densely and recomputes every trace and the
// assembled matrices directly.
inline MomentReport dense_moment_oracle(const Graph& g, const LimParams& p) {
  const std::size_t n = g.n();
  if (n > kDenseOracleMaxN)
    throw SizeError("dense_moment_oracle supports n <= " + std::to_string(kDenseOracleMaxN));
  if (n == 0) throw InvalidSpec("empty graph");
  p.validate();
  const auto nn = static_cast<Eigen::Index>(n);
  Matrix G = g.to_dense();
  for (Eigen::Index i = 0; i < nn; ++i) {
    const int d = g.degree(static_cast<std::size_t>(i));
    G.row(i) *= d > 0 ? 1.0 / d : 1.0;
  }
  const Matrix I = Matrix::Identity(nn, nn);
  const Matrix Sinv = (I - p.rho * G).partialPivLu().inverse();
  const Matrix H = (p.beta * I + p.delta * G) * Sinv;
  const Matrix GH = G * H;
  const Matrix GS = G * Sinv;
  const Matrix G2 = G * G;
  auto tr = [](const Matrix& a, const Matrix& b) { return (a.array() * b.array()).sum(); };
  const double nd = static_cast<double>(n);

  MomentReport r;
  r.n = n;
  r.sigma = p.sigma;
  r.sigma_eps = p.sigma_eps;
  r.norm_G_sq = G.squaredNorm();
  r.norm_G2_sq = G2.squaredNorm();
  r.eta = std::sqrt(r.norm_G2_sq / r.norm_G_sq);
  const double f = r.norm_G_sq;
  r.m_G_G = tr(G, G) / f;
  r.m_G_GH = tr(G, GH) / f;
  r.m_GH_GH = tr(GH, GH) / f;
  r.m_GS_GS = tr(GS, GS) / f;
  r.m_I_GS = GS.trace() / f;
  r.mc_GH_GH = (tr(GH, GH) - GH.trace() * GH.trace() / nd) / f;
  r.mc_GS_GS = (tr(GS, GS) - GS.trace() * GS.trace() / nd) / f;
  const double f2 = r.norm_G2_sq;
  r.mp_G2_GH = (tr(G2, GH) - G2.trace() * GH.trace() / nd) / f2;
  r.mp_G2_G2 = (tr(G2, G2) - G2.trace() * G2.trace() / nd) / f2;
  r.m_G2_G2 = tr(G2, G2) / f2;

  const double s2 = p.sigma * p.sigma, se2 = p.sigma_eps * p.sigma_eps;
  r.Gamma_WW << s2 * r.m_G_G, s2 * r.m_G_GH, s2 * r.m_G_GH, s2 * r.mc_GH_GH + se2 * r.mc_GS_GS;
  r.Gamma_WW_uncentered << s2 * r.m_G_G, s2 * r.m_G_GH, s2 * r.m_G_GH,
      s2 * r.m_GH_GH + se2 * r.m_GS_GS;
  r.Sigma_WW = se2 * r.Gamma_WW;
  r.Sigma_WW(1, 1) = se2 * s2 * r.mc_GH_GH;
  const Vec2 endog(0.0, r.m_I_GS);
  r.bias = se2 * r.Gamma_WW.fullPivLu().solve(endog);
  r.bias_uncentered = se2 * r.Gamma_WW_uncentered.fullPivLu().solve(endog);
  const Mat2 gi = r.Gamma_WW.inverse();
  r.ols_cov = gi * r.Sigma_WW * gi.transpose();
  r.Sigma_ZZ << se2 * s2 * r.m_G_G, 0.0, 0.0, se2 * s2 * r.m_G2_G2;
  r.Sigma_ZZ_centered << se2 * s2 * r.m_G_G, 0.0, 0.0, se2 * s2 * r.mp_G2_G2;
  Mat2 zi;
  zi << r.eta / s2, -r.m_G_GH / (s2 * r.m_G_G * r.mp_G2_GH), 0.0, 1.0 / (s2 * r.mp_G2_GH);
  r.Gamma_ZW_inv = zi;
  r.tsls_cov = zi * r.Sigma_ZZ * zi.transpose();
  return r;
}

// ---------------------------------------------------------------------------
// Monte Carlo reference: the whole pipeline, one replication at a time.

struct McReference {
  std::vector<SummaryRow> summary;
  std::vector<ResultRow> rows;
  double failure_rate = 0.0;
};

inline McReference mc_reference(ExperimentConfig config, int reps) {
  config.replications = reps;
  config.threads = 1;
  const ExperimentResult res = run_experiment(config);
  McReference out;
  out.summary = res.summary;
  out.rows = res.rows;
  std::size_t failed = 0;
  for (const auto& r : res.rows)
    if (!(r.status == Status::ok || r.status == Status::unstable)) ++failed;
  out.failure_rate = res.rows.empty() ? 0.0 : static_cast<double>(failed) / res.rows.size();
  return out;
}

}  // namespace peerfx
