#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "peerfx/dgp.hpp"
#include "peerfx/errors.hpp"
#include "peerfx/graph.hpp"
#include "peerfx/rng.hpp"

namespace peerfx {

// Block model in graphon form: connection kernel P, community shares pi.
struct SbmSpec {
  Matrix P;
  Vector pi;

  static SbmSpec uniform(const Matrix& P) {
    const auto k = P.rows();
    return {P, Vector::Constant(k, 1.0 / static_cast<double>(k))};
  }

  // From E = P diag(pi).
  static SbmSpec from_E(const Matrix& E, const Vector& pi) {
    SbmSpec s;
    s.pi = pi;
    s.P = E * pi.cwiseInverse().asDiagonal();
    return s;
  }

  Matrix E() const { return P * pi.asDiagonal(); }
  Eigen::Index K() const { return P.rows(); }

  void validate() const {
    if (P.rows() != P.cols() || P.rows() == 0) throw InvalidSpec("SbmSpec: P must be square");
    if (pi.size() != P.rows()) throw InvalidSpec("SbmSpec: pi length must match P");
    if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, P.cwiseAbs().maxCoeff()))
      throw InvalidSpec("SbmSpec: P must be symmetric");
    if ((P.array() < 0.0).any()) throw InvalidSpec("SbmSpec: P entries must be nonnegative");
    if ((pi.array() <= 0.0).any()) throw InvalidSpec("SbmSpec: pi entries must be positive");
    if (std::abs(pi.sum() - 1.0) > 1e-9) throw InvalidSpec("SbmSpec: pi must sum to 1");
  }
};

// A graphon handle; `blocks` is set when f is piecewise constant so exact
// paths can be used.
struct Graphon {
  GraphonFn f;
  std::optional<SbmSpec> blocks;
  std::string name = "graphon";
};

inline Graphon sbm_graphon(const SbmSpec& s) {
  s.validate();
  std::vector<double> cuts(static_cast<std::size_t>(s.K()));
  double acc = 0.0;
  for (Eigen::Index k = 0; k < s.K(); ++k) cuts[static_cast<std::size_t>(k)] = (acc += s.pi[k]);
  cuts.back() = 1.0;
  auto block_of = [cuts](double u) {
    const auto it = std::upper_bound(cuts.begin(), cuts.end(), u);
    return static_cast<Eigen::Index>(std::min<std::size_t>(
        static_cast<std::size_t>(it - cuts.begin()), cuts.size() - 1));
  };
  Matrix P = s.P;
  return {[P, block_of](double u, double v) { return P(block_of(u), block_of(v)); }, s, "sbm"};
}

enum class Witness {
  none,
  too_few_distinct_eigenvalues,
  orthogonal_eigenvector,
  curvature_zero,
  dependent_degree_codegree,
};

inline std::string to_string(Witness w) {
  switch (w) {
    case Witness::none: return "none";
    case Witness::too_few_distinct_eigenvalues: return "too-few-distinct-eigenvalues";
    case Witness::orthogonal_eigenvector: return "orthogonal-eigenvector";
    case Witness::curvature_zero: return "curvature-zero";
    case Witness::dependent_degree_codegree: return "dependent-degree-codegree";
  }
  return "unknown";
}

inline constexpr double kDefaultTolEig = 1e-8;
inline constexpr double kDefaultTolOverlap = 5e-4;

struct IdentificationVerdict {
  bool identified = false;
  Witness witness = Witness::none;
  std::vector<double> eigenvalues;  // descending
  std::vector<double> overlaps;     // |<phi_i, 1>|, aligned with eigenvalues
  std::vector<double> group_eigenvalues;  // after merging near-equal eigenvalues
  std::vector<double> group_overlaps;     // norm of the projection of 1 onto each group
  int distinct = 0;
  int relevant = 0;  // distinct groups with overlap above tol_overlap
  std::optional<Vector> witness_vector;  // block values of an eigenvector orthogonal to 1
  double tol_eig = kDefaultTolEig;
  double tol_overlap = kDefaultTolOverlap;
  double min_gram_eig = std::numeric_limits<double>::quiet_NaN();
  double kappa = std::numeric_limits<double>::quiet_NaN();
  double gamma_zw_min_sv = std::numeric_limits<double>::quiet_NaN();
};

struct SpectralData {
  Vector eigenvalues;  // descending
  Matrix eigenvectors;  // columns: pi-weighted eigenvectors of M = Q^{1/2} P Q^{1/2}
  Vector overlaps;      // a_i = <phi_i, 1> (signed)
};

// Eigenpairs of the graphon operator of a block model. M = Q^{1/2} P Q^{1/2}
// is similar to E = P Q; the eigenfunction for eigenvector v takes the value
// v_b / sqrt(pi_b) on block b, so a_i = sum_b sqrt(pi_b) v_ib.
inline SpectralData sbm_spectrum(const SbmSpec& s) {
  s.validate();
  const Vector sq = s.pi.cwiseSqrt();
  const Matrix M = sq.asDiagonal() * s.P * sq.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (M + M.transpose()));
  if (es.info() != Eigen::Success) throw NumericError("eigensolve of the block matrix failed");
  const auto k = s.K();
  SpectralData out;
  out.eigenvalues.resize(k);
  out.eigenvectors.resize(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    out.eigenvalues[i] = es.eigenvalues()[k - 1 - i];
    out.eigenvectors.col(i) = es.eigenvectors().col(k - 1 - i);
  }
  out.overlaps = out.eigenvectors.transpose() * sq;
  return out;
}

namespace detail {

inline void classify(const SpectralData& sd, IdentificationVerdict& v, const Vector& pi) {
  const auto k = sd.eigenvalues.size();
  double radius = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) radius = std::max(radius, std::abs(sd.eigenvalues[i]));
  const double gap = v.tol_eig * std::max(radius, std::numeric_limits<double>::min());
  v.eigenvalues.assign(sd.eigenvalues.data(), sd.eigenvalues.data() + k);
  v.overlaps.clear();
  for (Eigen::Index i = 0; i < k; ++i) v.overlaps.push_back(std::abs(sd.overlaps[i]));
  v.group_eigenvalues.clear();
  v.group_overlaps.clear();
  std::vector<std::vector<Eigen::Index>> groups;
  for (Eigen::Index i = 0; i < k; ++i) {
    if (groups.empty() || std::abs(sd.eigenvalues[groups.back().back()] - sd.eigenvalues[i]) > gap) {
      groups.push_back({i});
    } else {
      groups.back().push_back(i);
    }
  }
  v.relevant = 0;
  std::optional<Eigen::Index> orthogonal;
  for (const auto& grp : groups) {
    double sum = 0.0, ss = 0.0;
    for (auto i : grp) {
      sum += sd.eigenvalues[i];
      ss += sd.overlaps[i] * sd.overlaps[i];
    }
    v.group_eigenvalues.push_back(sum / static_cast<double>(grp.size()));
    v.group_overlaps.push_back(std::sqrt(ss));
    if (std::sqrt(ss) > v.tol_overlap) {
      ++v.relevant;
    } else if (!orthogonal) {
      orthogonal = grp.front();
    }
  }
  v.distinct = static_cast<int>(groups.size());
  v.identified = v.relevant >= 3;
  if (v.identified) {
    v.witness = Witness::none;
  } else if (v.distinct < 3) {
    v.witness = Witness::too_few_distinct_eigenvalues;
  } else {
    v.witness = Witness::orthogonal_eigenvector;
    if (orthogonal) {
      Vector phi = sd.eigenvectors.col(*orthogonal).cwiseQuotient(pi.cwiseSqrt());
      const Eigen::Index at = [&] {
        Eigen::Index j;
        phi.cwiseAbs().maxCoeff(&j);
        return j;
      }();
      if (phi[at] < 0) phi = -phi;
      phi /= phi.cwiseAbs().maxCoeff();
      v.witness_vector = Vector(phi.array() + 0.0);  // no negative zeros in reports
    }
  }
}

}  // namespace detail

// At least three distinct eigenvalues whose eigenfunctions are not
// orthogonal to the constant function.
inline IdentificationVerdict sbm_identification(const SbmSpec& s, double tol_eig = kDefaultTolEig,
                                                double tol_overlap = kDefaultTolOverlap) {
  IdentificationVerdict v;
  v.tol_eig = tol_eig;
  v.tol_overlap = tol_overlap;
  const SpectralData sd = sbm_spectrum(s);
  detail::classify(sd, v, s.pi);
  // Gram of (1, g1, g2) equals the Hankel matrix of m_0..m_4.
  Eigen::Matrix3d hank;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double m = 0.0;
      for (Eigen::Index r = 0; r < sd.eigenvalues.size(); ++r)
        m += sd.overlaps[r] * sd.overlaps[r] * std::pow(sd.eigenvalues[r], i + j);
      hank(i, j) = m;
    }
  v.min_gram_eig = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(hank).eigenvalues()[0];
  return v;
}

// Symmetric additive Uniform(-mag, mag) noise on E (one draw per unordered
// entry), clipped to [0, 1].
inline Matrix perturb_symmetric(const Matrix& E, double mag, std::uint64_t seed) {
  Engine eng = make_engine(seed);
  std::uniform_real_distribution<double> u(-mag, mag);
  Matrix out = E;
  for (Eigen::Index i = 0; i < E.rows(); ++i)
    for (Eigen::Index j = i; j < E.cols(); ++j) {
      const double x = std::clamp(E(i, j) + u(eng), 0.0, 1.0);
      out(i, j) = x;
      out(j, i) = x;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Graphon moments

// Midpoint-grid kernel values F_ij = f(u_i, u_j), u_i = (i + 1/2)/N.
inline Matrix graphon_grid(const GraphonFn& f, int quad_n) {
  if (quad_n < 1) throw InvalidSpec("quad_n must be positive");
  Matrix F(quad_n, quad_n);
  for (int i = 0; i < quad_n; ++i) {
    const double u = (i + 0.5) / quad_n;
    for (int j = 0; j <= i; ++j) {
      const double v = (j + 0.5) / quad_n;
      const double x = f(u, v);
      if (!std::isfinite(x)) throw NumericError("graphon returned a non-finite value");
      F(i, j) = x;
      F(j, i) = x;
    }
  }
  return F;
}

// m_k = integral of the product f(u_0,u_1)...f(u_{k-1},u_k), k = 0..k_max,
// by midpoint quadrature: m_k = (1/N) 1^T (F/N)^k 1.
inline std::vector<double> graphon_moments_quadrature(const GraphonFn& f, int k_max, int quad_n) {
  if (k_max < 0 || k_max > 6) throw InvalidSpec("k_max must lie in [0, 6]");
  const Matrix F = graphon_grid(f, quad_n) / static_cast<double>(quad_n);
  std::vector<double> m;
  Vector x = Vector::Ones(quad_n);
  for (int k = 0; k <= k_max; ++k) {
    m.push_back(x.mean());
    x = F * x;
  }
  return m;
}

// Exact moments of a block graphon: m_k = pi^T E^k 1.
inline std::vector<double> sbm_moments(const SbmSpec& s, int k_max) {
  if (k_max < 0 || k_max > 6) throw InvalidSpec("k_max must lie in [0, 6]");
  s.validate();
  const Matrix E = s.E();
  std::vector<double> m;
  Vector x = Vector::Ones(s.K());
  for (int k = 0; k <= k_max; ++k) {
    m.push_back(s.pi.dot(x));
    x = E * x;
  }
  return m;
}

// Same moments from the spectral sum m_k = sum_i a_i^2 lambda_i^k.
inline std::vector<double> sbm_moments_spectral(const SbmSpec& s, int k_max) {
  const SpectralData sd = sbm_spectrum(s);
  std::vector<double> m;
  for (int k = 0; k <= k_max; ++k) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < sd.eigenvalues.size(); ++i)
      acc += sd.overlaps[i] * sd.overlaps[i] * std::pow(sd.eigenvalues[i], k);
    m.push_back(acc);
  }
  return m;
}

inline std::vector<double> graphon_moments(const Graphon& g, int k_max, int quad_n = 600) {
  if (g.blocks) return sbm_moments(*g.blocks, k_max);
  return graphon_moments_quadrature(g.f, k_max, quad_n);
}

// g1(u) = int f(u,v) dv, g2(u) = int f(u,v) f(v,w) dv dw. Identified when
// the Gram matrix of {1, g1, g2} has smallest eigenvalue above tol_rel times
// its largest.
inline IdentificationVerdict degree_codegree_check(const GraphonFn& f, int quad_n = 600,
                                                   double tol_rel = 1e-10) {
  const Matrix F = graphon_grid(f, quad_n) / static_cast<double>(quad_n);
  Matrix B(quad_n, 3);
  B.col(0).setOnes();
  B.col(1) = F * B.col(0);
  B.col(2) = F * B.col(1);
  const Eigen::Matrix3d gram = B.transpose() * B / static_cast<double>(quad_n);
  const Eigen::Vector3d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(gram).eigenvalues();
  IdentificationVerdict v;
  v.min_gram_eig = ev[0];
  v.tol_overlap = tol_rel;
  v.identified = ev[0] > tol_rel * ev[2];
  v.witness = v.identified ? Witness::none : Witness::dependent_degree_codegree;
  return v;
}

// Discretise a general graphon onto an N-block uniform grid.
inline SbmSpec grid_sbm(const GraphonFn& f, int quad_n) {
  return SbmSpec::uniform(graphon_grid(f, quad_n));
}

// ---------------------------------------------------------------------------
// Instrument relevance for the sums model

inline double relevance_kappa(const LisParams& p) {
  return (p.alpha + p.mu * p.beta) * p.rho0 + p.mu * p.delta0;
}

inline double relevance_h(double lambda, const LisParams& p) {
  return lambda * (p.alpha + p.mu * p.beta + p.mu * p.delta0 * lambda) / (1.0 - p.rho0 * lambda);
}

// Limit of the 3x3 block with rows sum a_i^2 lambda_i^m (1, lambda_i, h(lambda_i)),
// m = 0, 1, 2. Eigenvalues are divided by m_1 = sum a_i^2 lambda_i, which is
// what rescaling by the mean degree does to the sampled graph.
inline Eigen::Matrix3d lis_gamma_zw(const SbmSpec& s, const LisParams& p) {
  const SpectralData sd = sbm_spectrum(s);
  double m1 = 0.0;
  for (Eigen::Index i = 0; i < sd.eigenvalues.size(); ++i)
    m1 += sd.overlaps[i] * sd.overlaps[i] * sd.eigenvalues[i];
  if (!(m1 > 0.0)) throw InvalidSpec("block model has zero mean degree");
  Eigen::Matrix3d g = Eigen::Matrix3d::Zero();
  for (Eigen::Index i = 0; i < sd.eigenvalues.size(); ++i) {
    const double lam = sd.eigenvalues[i] / m1;
    if (!(p.rho0 * lam < 1.0)) {
      std::ostringstream msg;
      msg << "relevance check requires rho0 * lambda < 1 (rho0=" << p.rho0 << ", lambda=" << lam
          << ")";
      throw SpectralValidityError(msg.str());
    }
    const double a2 = sd.overlaps[i] * sd.overlaps[i];
    const Eigen::Vector3d b(1.0, lam, relevance_h(lam, p));
    for (int m = 0; m < 3; ++m) g.row(m) += a2 * std::pow(lam, m) * b.transpose();
  }
  return g;
}

// The same limit in the units of (1/n) Zt^T Wt with Zt = (1, AX/d, A^2X/d^2)
// and Wt = (1, AX/d, AY/d): mean-mu covariates contribute the mu factors.
inline Eigen::Matrix3d lis_gamma_zw_scaled(const SbmSpec& s, const LisParams& p) {
  const Eigen::Vector3d rows(1.0, p.mu, p.mu);
  const Eigen::Vector3d cols(1.0, p.mu, 1.0);
  return rows.asDiagonal() * lis_gamma_zw(s, p) * cols.asDiagonal();
}

inline Eigen::Matrix3d empirical_gamma_zw(const Graph& g, const Observations& obs) {
  const double d = g.mean_degree();
  if (!(d > 0.0)) throw InvalidSpec("graph has no edges");
  const SparseRM A = adjacency_matrix(g);
  const auto n = obs.X.size();
  Matrix Z(n, 3), W(n, 3);
  Z.col(0).setOnes();
  W.col(0).setOnes();
  const Vector ax = A * obs.X;
  Z.col(1) = ax / d;
  Z.col(2) = (A * ax) / (d * d);
  W.col(1) = ax / d;
  W.col(2) = (A * obs.Y) / d;
  return Z.transpose() * W / static_cast<double>(n);
}

inline IdentificationVerdict relevance_check(const SbmSpec& s, const LisParams& p,
                                             double tol_eig = kDefaultTolEig,
                                             double tol_overlap = kDefaultTolOverlap,
                                             double tol_kappa = 1e-12) {
  IdentificationVerdict v = sbm_identification(s, tol_eig, tol_overlap);
  const Eigen::Matrix3d g = lis_gamma_zw(s, p);
  v.gamma_zw_min_sv = Eigen::JacobiSVD<Eigen::Matrix3d>(g).singularValues()[2];
  v.kappa = relevance_kappa(p);
  if (!v.identified) return v;
  if (std::abs(v.kappa) <= tol_kappa) {
    v.identified = false;
    v.witness = Witness::curvature_zero;
  }
  return v;
}

inline IdentificationVerdict relevance_check(const Graphon& f, const LisParams& p, int quad_n = 300,
                                             double tol_eig = kDefaultTolEig,
                                             double tol_overlap = kDefaultTolOverlap) {
  if (f.blocks) return relevance_check(*f.blocks, p, tol_eig, tol_overlap);
  return relevance_check(grid_sbm(f.f, quad_n), p, tol_eig, tol_overlap);
}

// ---------------------------------------------------------------------------
// Output

inline void write_verdict_report(std::ostream& os, const IdentificationVerdict& v) {
  os << std::setprecision(10);
  os << "identified: " << (v.identified ? "yes" : "no") << '\n';
  os << "witness: " << to_string(v.witness) << '\n';
  if (!v.eigenvalues.empty()) {
    os << "eigenvalues:";
    for (double x : v.eigenvalues) os << ' ' << x;
    os << "\noverlaps:";
    for (double x : v.overlaps) os << ' ' << x;
    os << '\n';
    os << "distinct eigenvalues: " << v.distinct << ", with nonzero overlap: " << v.relevant << '\n';
  }
  if (v.witness_vector) {
    os << "orthogonal eigenvector:";
    for (Eigen::Index i = 0; i < v.witness_vector->size(); ++i) os << ' ' << (*v.witness_vector)[i];
    os << '\n';
  }
  os << "min gram eigenvalue: " << v.min_gram_eig << '\n';
  if (!std::isnan(v.kappa)) os << "kappa: " << v.kappa << '\n';
  if (!std::isnan(v.gamma_zw_min_sv)) os << "min singular value of Gamma_ZW: " << v.gamma_zw_min_sv << '\n';
  os << "tolerances: eig " << v.tol_eig << ", overlap " << v.tol_overlap << '\n';
}

inline void write_verdict_csv_header(std::ostream& os) {
  os << "identified,witness,min_gram_eig,kappa\n";
}

inline void write_verdict_csv_row(std::ostream& os, const IdentificationVerdict& v) {
  std::ostringstream s;
  s << std::setprecision(17) << (v.identified ? 1 : 0) << ',' << to_string(v.witness) << ','
    << v.min_gram_eig << ',' << v.kappa << '\n';
  os << s.str();
}

}  // namespace peerfx
