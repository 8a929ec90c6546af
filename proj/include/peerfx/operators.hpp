#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "peerfx/errors.hpp"
#include "peerfx/graph.hpp"
#include "peerfx/rng.hpp"

namespace peerfx {

using SparseRM = Eigen::SparseMatrix<double, Eigen::RowMajor>;

inline SparseRM adjacency_matrix(const Graph& g) {
  const auto n = static_cast<Eigen::Index>(g.n());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(2 * g.num_edges());
  for (std::size_t i = 0; i < g.n(); ++i)
    for (NodeId j : g.neighbors(i)) trip.emplace_back(static_cast<int>(i), static_cast<int>(j), 1.0);
  SparseRM a(n, n);
  a.setFromTriplets(trip.begin(), trip.end());
  return a;
}

// G = D^{-1} A with w_i = 1/d_i, and w_i = 1 for isolated nodes (their rows
// of A are empty, so the row of G stays zero either way).
class RowNormOp {
 public:
  explicit RowNormOp(const Graph& g) : graph_(&g), weights_(static_cast<Eigen::Index>(g.n())) {
    for (std::size_t i = 0; i < g.n(); ++i) {
      const int d = g.degree(i);
      weights_[static_cast<Eigen::Index>(i)] = d > 0 ? 1.0 / d : 1.0;
    }
    A_ = adjacency_matrix(g);
    G_ = weights_.asDiagonal() * A_;
    Gt_ = SparseRM(G_.transpose());
  }

  const Graph& graph() const { return *graph_; }
  std::size_t n() const { return graph_->n(); }
  const Vector& weights() const { return weights_; }
  const SparseRM& G() const { return G_; }
  const SparseRM& Gt() const { return Gt_; }
  const SparseRM& A() const { return A_; }

  Matrix apply(const Matrix& x) const { return G_ * x; }
  Matrix apply_transpose(const Matrix& x) const { return Gt_ * x; }

  // ||G||_F^2 = sum over non-isolated nodes of 1/d_i.
  double frobenius_sq_closed() const {
    double s = 0.0;
    for (int d : graph_->degrees())
      if (d > 0) s += 1.0 / d;
    return s;
  }

  Matrix to_dense() const { return Matrix(G_); }

 private:
  const Graph* graph_;
  Vector weights_;
  SparseRM A_, G_, Gt_;
};

// Parameters of the resolvent (I - rho M)^{-1}. `bound` is an upper bound on
// the spectral radius of M: 1 for G, lambda_1(A) for the adjacency matrix.
struct ResolventSpec {
  double rho = 0.0;
  double tol = 1e-10;
  int max_iter = 0;  // 0: derived from tol and the contraction rate
  double bound = 1.0;

  double rate() const { return std::abs(rho) * bound; }

  int iteration_cap() const {
    if (max_iter > 0) return max_iter;
    const double r = rate();
    if (r <= 0.0) return 1;
    return 10 * static_cast<int>(std::ceil(std::log(1.0 / tol) / std::log(1.0 / r)));
  }
};

struct SolveInfo {
  int iterations = 0;
  double residual = 0.0;  // max column residual relative to that column's norm
};

// Neumann iteration x <- v + rho M x. The residual of the current iterate,
// (I - rho M)x - v, equals rho (M x_k - M x_{k-1}), so each sweep needs one
// product with M. Converged when every column meets tol relative to its rhs.
inline Matrix neumann_solve(const std::function<Matrix(const Matrix&)>& M, const Matrix& v,
                            const ResolventSpec& spec, SolveInfo* info = nullptr) {
  if (spec.rate() >= 1.0) {
    std::ostringstream msg;
    msg << "resolvent requires |rho| * bound < 1 (rho=" << spec.rho << ", bound=" << spec.bound
        << ")";
    throw SpectralValidityError(msg.str());
  }
  if (spec.rho == 0.0) {
    if (info) *info = {0, 0.0};
    return v;
  }
  const Eigen::ArrayXd vnorm = v.colwise().norm().transpose().array();
  const int cap = spec.iteration_cap();
  Matrix x = v;
  Matrix g_prev = Matrix::Zero(v.rows(), v.cols());
  double worst = 0.0;
  for (int it = 0; it <= cap; ++it) {
    Matrix g = M(x);
    const Eigen::ArrayXd r = ((g - g_prev).colwise().norm().transpose().array()) * std::abs(spec.rho);
    worst = 0.0;
    for (Eigen::Index c = 0; c < r.size(); ++c) {
      const double rel = vnorm[c] > 0.0 ? r[c] / vnorm[c] : r[c];
      worst = std::max(worst, rel);
    }
    if (worst <= spec.tol) {
      if (info) *info = {it, worst};
      return x;
    }
    x = v + spec.rho * g;
    g_prev = std::move(g);
  }
  std::ostringstream msg;
  msg << "resolvent solve did not converge in " << cap << " iterations (rho=" << spec.rho
      << ", residual=" << worst << ", tol=" << spec.tol << ")";
  throw NumericError(msg.str());
}

// ---------------------------------------------------------------------------
// Operator words

enum class Letter { G, Gt, Sinv, Sinvt, H, Ht, I, A, At };

inline std::string to_string(Letter l) {
  switch (l) {
    case Letter::G: return "G";
    case Letter::Gt: return "G^T";
    case Letter::Sinv: return "S^-1";
    case Letter::Sinvt: return "S^-T";
    case Letter::H: return "H";
    case Letter::Ht: return "H^T";
    case Letter::I: return "I";
    case Letter::A: return "A";
    case Letter::At: return "A^T";
  }
  return "?";
}

inline Letter letter_from_string(const std::string& s) {
  for (Letter l : {Letter::G, Letter::Gt, Letter::Sinv, Letter::Sinvt, Letter::H, Letter::Ht,
                   Letter::I, Letter::A, Letter::At}) {
    if (to_string(l) == s) return l;
  }
  throw InvalidSpec("unknown operator letter '" + s + "'");
}

// A matrix product M = L_1 L_2 ... L_k. Applying it to v evaluates L_k first.
struct OperatorWord {
  std::vector<Letter> letters;

  OperatorWord() = default;
  OperatorWord(std::initializer_list<Letter> ls) : letters(ls) {}

  // Space separated letters, e.g. "G H" or "G^T S^-1".
  static OperatorWord parse(const std::string& text) {
    OperatorWord w;
    std::istringstream is(text);
    std::string tok;
    while (is >> tok) w.letters.push_back(letter_from_string(tok));
    if (w.letters.empty()) throw InvalidSpec("empty operator word");
    return w;
  }

  bool needs_resolvent() const {
    for (Letter l : letters)
      if (l == Letter::Sinv || l == Letter::Sinvt || l == Letter::H || l == Letter::Ht) return true;
    return false;
  }

  bool is_single(Letter l) const { return letters.size() == 1 && letters[0] == l; }

  std::string str() const {
    std::string s;
    for (std::size_t i = 0; i < letters.size(); ++i) {
      if (i) s += ' ';
      s += to_string(letters[i]);
    }
    return s;
  }
};

// Everything needed to evaluate words: G, the resolvent, and (beta, delta)
// for H = (beta I + delta G) S^{-1}.
struct OperatorContext {
  const RowNormOp* op = nullptr;
  std::optional<ResolventSpec> resolvent;
  double beta = 0.0;
  double delta = 0.0;

  OperatorContext(const RowNormOp& g) : op(&g) {}
  OperatorContext(const RowNormOp& g, ResolventSpec r, double b, double d)
      : op(&g), resolvent(r), beta(b), delta(d) {}
};

inline Matrix apply_word(const OperatorContext& ctx, const OperatorWord& word, const Matrix& v) {
  if (word.letters.empty()) throw InvalidSpec("empty operator word");
  if (word.needs_resolvent() && !ctx.resolvent) {
    throw InvalidSpec("word '" + word.str() + "' needs a resolvent specification");
  }
  if (v.rows() != static_cast<Eigen::Index>(ctx.op->n())) {
    throw InvalidSpec("vector length does not match graph size");
  }
  const RowNormOp& g = *ctx.op;
  auto solve = [&](const Matrix& x) {
    return neumann_solve([&](const Matrix& y) { return g.apply(y); }, x, *ctx.resolvent);
  };
  auto solve_t = [&](const Matrix& x) {
    return neumann_solve([&](const Matrix& y) { return g.apply_transpose(y); }, x, *ctx.resolvent);
  };
  Matrix x = v;
  for (auto it = word.letters.rbegin(); it != word.letters.rend(); ++it) {
    switch (*it) {
      case Letter::G: x = g.apply(x); break;
      case Letter::Gt: x = g.apply_transpose(x); break;
      case Letter::A:
      case Letter::At: x = g.A() * x; break;
      case Letter::I: break;
      case Letter::Sinv: x = solve(x); break;
      case Letter::Sinvt: x = solve_t(x); break;
      case Letter::H: {
        Matrix y = solve(x);
        x = ctx.beta * y + ctx.delta * g.apply(y);
        break;
      }
      case Letter::Ht: {
        Matrix y = ctx.beta * x + ctx.delta * g.apply_transpose(x);
        x = solve_t(y);
        break;
      }
    }
  }
  return x;
}

inline Vector apply_word(const OperatorContext& ctx, const OperatorWord& word, const Vector& v) {
  return apply_word(ctx, word, Matrix(v)).col(0);
}

// ---------------------------------------------------------------------------
// Traces

struct TraceOptions {
  std::size_t dense_threshold = 3000;
  int probes = 200;
  std::uint64_t seed = 0x5eed;
  Eigen::Index block = 128;
};

struct TraceMoment {
  double value = 0.0;     // Tr(M_A^T M_B)
  double trace_a = 0.0;   // Tr(M_A)
  double trace_b = 0.0;   // Tr(M_B)
  double centered = 0.0;  // value - trace_a * trace_b / n
  double se = 0.0;        // standard error of value; 0 on the exact path
  bool estimated = false;
};

inline Matrix rademacher_block(Eigen::Index n, Eigen::Index k, std::uint64_t seed) {
  Engine eng = make_engine(seed);
  std::bernoulli_distribution coin(0.5);
  Matrix z(n, k);
  for (Eigen::Index c = 0; c < k; ++c)
    for (Eigen::Index r = 0; r < n; ++r) z(r, c) = coin(eng) ? 1.0 : -1.0;
  return z;
}

// Feeds blocks of basis vectors (exact path) or Rademacher probes (estimated
// path) to `visit`. Each call receives the block and the index of its first
// column so the caller can pick diagonal entries.
inline bool for_each_probe_block(std::size_t n, const TraceOptions& opt,
                                 const std::function<void(const Matrix&, Eigen::Index)>& visit) {
  const auto nn = static_cast<Eigen::Index>(n);
  if (n <= opt.dense_threshold) {
    for (Eigen::Index start = 0; start < nn; start += opt.block) {
      const Eigen::Index k = std::min(opt.block, nn - start);
      Matrix e = Matrix::Zero(nn, k);
      for (Eigen::Index c = 0; c < k; ++c) e(start + c, c) = 1.0;
      visit(e, start);
    }
    return false;
  }
  const Matrix z = rademacher_block(nn, opt.probes, split_seed(opt.seed, stream::probes));
  visit(z, -1);
  return true;
}

// Per-column contributions ⟨M_A e, M_B e⟩ or z^T M_A^T M_B z.
inline Eigen::ArrayXd column_dots(const Matrix& a, const Matrix& b) {
  return (a.array() * b.array()).colwise().sum().transpose();
}

// Per-column diagonal terms: e_c^T M e_c on the exact path, z^T M z otherwise.
inline Eigen::ArrayXd column_diag(const Matrix& probe, const Matrix& m, Eigen::Index start) {
  if (start >= 0) {
    Eigen::ArrayXd out(m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[c] = m(start + c, c);
    return out;
  }
  return column_dots(probe, m);
}

struct Accumulator {
  double sum = 0.0, sumsq = 0.0;
  long count = 0;
  void add(const Eigen::ArrayXd& v) {
    sum += v.sum();
    sumsq += v.square().sum();
    count += static_cast<long>(v.size());
  }
  double mean() const { return count ? sum / count : 0.0; }
  double se() const {
    if (count < 2) return 0.0;
    const double m = mean();
    const double var = (sumsq - count * m * m) / (count - 1);
    return std::sqrt(std::max(var, 0.0) / count);
  }
};

inline TraceMoment trace_moment(const OperatorContext& ctx, const OperatorWord& wa,
                                const OperatorWord& wb, const TraceOptions& opt = {}) {
  const std::size_t n = ctx.op->n();
  TraceMoment out;
  Accumulator val, ta, tb;
  out.estimated = for_each_probe_block(n, opt, [&](const Matrix& e, Eigen::Index start) {
    const Matrix ma = apply_word(ctx, wa, e);
    const Matrix mb = apply_word(ctx, wb, e);
    val.add(column_dots(ma, mb));
    ta.add(column_diag(e, ma, start));
    tb.add(column_diag(e, mb, start));
  });
  if (out.estimated) {
    out.value = val.mean();
    out.trace_a = ta.mean();
    out.trace_b = tb.mean();
    out.se = val.se();
  } else {
    out.value = val.sum;
    out.trace_a = ta.sum;
    out.trace_b = tb.sum;
  }
  out.centered = out.value - out.trace_a * out.trace_b / static_cast<double>(n);
  return out;
}

// ||M||_F^2. The single-letter word [G] uses the closed form.
inline double frobenius_sq(const OperatorContext& ctx, const OperatorWord& w,
                           const TraceOptions& opt = {}) {
  if (w.is_single(Letter::G)) return ctx.op->frobenius_sq_closed();
  return trace_moment(ctx, w, w, opt).value;
}

// ---------------------------------------------------------------------------
// Moment report

struct LimParams {
  double alpha = 1.0;
  double beta = 1.5;
  double delta = 0.6;
  double rho = 0.3;
  double mu = 2.0;
  double sigma = 1.0;
  double sigma_eps = 0.1;

  void validate() const {
    if (!(std::abs(rho) < 1.0))
      throw SpectralValidityError("LIM requires |rho| < 1 (rho=" + std::to_string(rho) + ")");
    if (!(sigma >= 0.0)) throw InvalidSpec("sigma must be nonnegative");
    if (!(sigma_eps >= 0.0)) throw InvalidSpec("sigma_eps must be nonnegative");
  }
};

using Mat2 = Eigen::Matrix2d;
using Vec2 = Eigen::Vector2d;

struct MomentReport {
  std::size_t n = 0;
  bool estimated = false;  // Hutchinson path used for at least one trace
  double sigma = 0.0, sigma_eps = 0.0;

  double norm_G_sq = 0.0;   // ||G||_F^2
  double norm_G2_sq = 0.0;  // ||G^2||_F^2
  double eta = 0.0;         // ||G^2||_F / ||G||_F

  // Normalised by ||G||_F^2.
  double m_G_G = 1.0;
  double m_G_GH = 0.0;
  double m_GH_GH = 0.0;
  double m_GS_GS = 0.0;
  double m_I_GS = 0.0;
  // Centered: Tr(A^T B) - Tr(A)Tr(B)/n, same normalisation.
  double mc_GH_GH = 0.0;
  double mc_GS_GS = 0.0;
  // Normalised by ||G^2||_F^2.
  double mp_G2_GH = 0.0;  // centered
  double mp_G2_G2 = 0.0;  // centered
  double m_G2_G2 = 1.0;   // uncentered, equal to 1 by construction

  std::map<std::string, double> standard_errors;

  Mat2 Gamma_WW = Mat2::Zero();  // built from centered moments
  Mat2 Gamma_WW_uncentered = Mat2::Zero();
  Mat2 Sigma_WW = Mat2::Zero();
  std::optional<Vec2> bias;  // predicted OLS bias of (delta, rho)
  std::optional<Vec2> bias_uncentered;
  std::optional<Mat2> ols_cov;  // of ||G||_F (theta_hat - theta - b)
  std::optional<Mat2> Gamma_ZW_inv;
  Mat2 Sigma_ZZ = Mat2::Zero();  // (2,2) entry uses the uncentered moment
  Mat2 Sigma_ZZ_centered = Mat2::Zero();
  std::optional<Mat2> tsls_cov;  // of ||G^2||_F (theta_hat - theta)
  std::vector<std::string> degeneracies;
};

namespace detail {

inline std::optional<Mat2> safe_inverse(const Mat2& m, const std::string& name,
                                        std::vector<std::string>& log) {
  const double scale = std::abs(m(0, 0) * m(1, 1)) + std::abs(m(0, 1) * m(1, 0));
  const double det = m.determinant();
  if (!(std::abs(det) >= 1e-12 * scale) || scale == 0.0) {
    std::ostringstream s;
    s << name << " numerically singular (det=" << det << ", scale=" << scale << ")";
    log.push_back(s.str());
    return std::nullopt;
  }
  return m.inverse();
}

inline Mat2 gamma_ww(double s2, double se2, double mGG, double mGGH, double mGHGH, double mGSGS) {
  Mat2 g;
  g << s2 * mGG, s2 * mGGH, s2 * mGGH, s2 * mGHGH + se2 * mGSGS;
  return g;
}

}  // namespace detail

// Finite-n proxies of the limiting network moments and the predicted OLS
// bias/covariance and 2SLS covariance assembled from them. One pass over
// basis blocks (or probes) evaluates every product that is needed.
inline MomentReport moment_report(const RowNormOp& op, const LimParams& p,
                                  const TraceOptions& opt = {}) {
  p.validate();
  const std::size_t n = op.n();
  if (n == 0) throw InvalidSpec("moment_report on an empty graph");
  ResolventSpec res{p.rho};
  OperatorContext ctx(op, res, p.beta, p.delta);

  Accumulator t_G_GH, t_GH_GH, t_GS_GS, t_I_GS, t_G2_GH, t_G2_G2, tr_GH, tr_G2;
  const bool estimated = for_each_probe_block(n, opt, [&](const Matrix& e, Eigen::Index start) {
    const Matrix ge = op.apply(e);
    const Matrix g2e = op.apply(ge);
    const Matrix se = neumann_solve([&](const Matrix& y) { return op.apply(y); }, e, res);
    const Matrix gse = op.apply(se);
    const Matrix he = p.beta * se + p.delta * gse;
    const Matrix ghe = op.apply(he);
    t_G_GH.add(column_dots(ge, ghe));
    t_GH_GH.add(column_dots(ghe, ghe));
    t_GS_GS.add(column_dots(gse, gse));
    t_I_GS.add(column_diag(e, gse, start));
    t_G2_GH.add(column_dots(g2e, ghe));
    t_G2_G2.add(column_dots(g2e, g2e));
    tr_GH.add(column_diag(e, ghe, start));
    tr_G2.add(column_diag(e, g2e, start));
  });
  auto total = [&](const Accumulator& a) {
    return estimated ? a.mean() : a.sum;
  };
  const double fG = op.frobenius_sq_closed();
  const double fG2 = total(t_G2_G2);
  const double nd = static_cast<double>(n);

  MomentReport r;
  r.n = n;
  r.estimated = estimated;
  r.sigma = p.sigma;
  r.sigma_eps = p.sigma_eps;
  r.norm_G_sq = fG;
  r.norm_G2_sq = fG2;
  r.eta = fG > 0 ? std::sqrt(fG2 / fG) : 0.0;
  if (fG <= 0.0) {
    r.degeneracies.push_back("graph has no edges; ||G||_F = 0");
    return r;
  }
  const double trGS = total(t_I_GS);
  const double trGH = total(tr_GH);
  const double trG2 = total(tr_G2);
  r.m_G_G = 1.0;
  r.m_G_GH = total(t_G_GH) / fG;
  r.m_GH_GH = total(t_GH_GH) / fG;
  r.m_GS_GS = total(t_GS_GS) / fG;
  r.m_I_GS = trGS / fG;
  r.mc_GH_GH = (total(t_GH_GH) - trGH * trGH / nd) / fG;
  r.mc_GS_GS = (total(t_GS_GS) - trGS * trGS / nd) / fG;
  if (fG2 > 0.0) {
    r.mp_G2_GH = (total(t_G2_GH) - trG2 * trGH / nd) / fG2;
    r.mp_G2_G2 = (fG2 - trG2 * trG2 / nd) / fG2;
    r.m_G2_G2 = 1.0;
  }
  if (estimated) {
    r.standard_errors["m_G_GH"] = t_G_GH.se() / fG;
    r.standard_errors["m_GH_GH"] = t_GH_GH.se() / fG;
    r.standard_errors["m_GS_GS"] = t_GS_GS.se() / fG;
    r.standard_errors["m_I_GS"] = t_I_GS.se() / fG;
    r.standard_errors["norm_G2_sq"] = t_G2_G2.se();
  }

  const double s2 = p.sigma * p.sigma;
  const double se2 = p.sigma_eps * p.sigma_eps;
  r.Gamma_WW = detail::gamma_ww(s2, se2, r.m_G_G, r.m_G_GH, r.mc_GH_GH, r.mc_GS_GS);
  r.Gamma_WW_uncentered = detail::gamma_ww(s2, se2, r.m_G_G, r.m_G_GH, r.m_GH_GH, r.m_GS_GS);
  r.Sigma_WW << se2 * s2 * r.m_G_G, se2 * s2 * r.m_G_GH, se2 * s2 * r.m_G_GH, se2 * s2 * r.mc_GH_GH;

  const Vec2 endog(0.0, r.m_I_GS);
  if (auto inv = detail::safe_inverse(r.Gamma_WW, "Gamma_WW", r.degeneracies)) {
    r.bias = se2 * (*inv) * endog;
    r.ols_cov = (*inv) * r.Sigma_WW * inv->transpose();
  }
  if (auto inv = detail::safe_inverse(r.Gamma_WW_uncentered, "Gamma_WW_uncentered", r.degeneracies)) {
    r.bias_uncentered = se2 * (*inv) * endog;
  }

  r.Sigma_ZZ << se2 * s2 * r.m_G_G, 0.0, 0.0, se2 * s2 * r.m_G2_G2;
  r.Sigma_ZZ_centered << se2 * s2 * r.m_G_G, 0.0, 0.0, se2 * s2 * r.mp_G2_G2;
  const double denom = s2 * r.m_G_G * r.mp_G2_GH;
  if (s2 > 0.0 && std::abs(r.mp_G2_GH) > 1e-12 && std::isfinite(denom)) {
    Mat2 gi;
    gi << r.eta / s2, -r.m_G_GH / denom, 0.0, 1.0 / (s2 * r.mp_G2_GH);
    r.Gamma_ZW_inv = gi;
    r.tsls_cov = gi * r.Sigma_ZZ * gi.transpose();
  } else {
    r.degeneracies.push_back("m'_{G^2,GH} numerically zero; Gamma_ZW not invertible");
  }
  return r;
}

// Flat "name = value" record.
inline void write_moment_report(std::ostream& os, const MomentReport& r) {
  auto put = [&](const std::string& k, double v) {
    os << k << " = " << std::setprecision(17) << v << '\n';
  };
  auto put_mat = [&](const std::string& k, const Mat2& m) {
    put(k + "_11", m(0, 0));
    put(k + "_12", m(0, 1));
    put(k + "_21", m(1, 0));
    put(k + "_22", m(1, 1));
  };
  os << "n = " << r.n << '\n';
  os << "estimated = " << (r.estimated ? 1 : 0) << '\n';
  put("sigma", r.sigma);
  put("sigma_eps", r.sigma_eps);
  put("norm_G_sq", r.norm_G_sq);
  put("norm_G2_sq", r.norm_G2_sq);
  put("eta", r.eta);
  put("m_G_G", r.m_G_G);
  put("m_G_GH", r.m_G_GH);
  put("m_GH_GH", r.m_GH_GH);
  put("m_GS_GS", r.m_GS_GS);
  put("m_I_GS", r.m_I_GS);
  put("mc_GH_GH", r.mc_GH_GH);
  put("mc_GS_GS", r.mc_GS_GS);
  put("mp_G2_GH", r.mp_G2_GH);
  put("mp_G2_G2", r.mp_G2_G2);
  put("m_G2_G2", r.m_G2_G2);
  for (const auto& [k, v] : r.standard_errors) put("se_" + k, v);
  put_mat("Gamma_WW", r.Gamma_WW);
  put_mat("Gamma_WW_uncentered", r.Gamma_WW_uncentered);
  put_mat("Sigma_WW", r.Sigma_WW);
  if (r.bias) {
    put("bias_delta", (*r.bias)[0]);
    put("bias_rho", (*r.bias)[1]);
  }
  if (r.bias_uncentered) {
    put("bias_uncentered_delta", (*r.bias_uncentered)[0]);
    put("bias_uncentered_rho", (*r.bias_uncentered)[1]);
  }
  if (r.ols_cov) put_mat("ols_cov", *r.ols_cov);
  if (r.Gamma_ZW_inv) put_mat("Gamma_ZW_inv", *r.Gamma_ZW_inv);
  put_mat("Sigma_ZZ", r.Sigma_ZZ);
  put_mat("Sigma_ZZ_centered", r.Sigma_ZZ_centered);
  if (r.tsls_cov) put_mat("tsls_cov", *r.tsls_cov);
  for (std::size_t i = 0; i < r.degeneracies.size(); ++i)
    os << "degenerate_" << i << " = " << r.degeneracies[i] << '\n';
}

inline std::map<std::string, std::string> read_key_values(std::istream& is) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos)
      throw FormatError("key-value line " + std::to_string(line_no) + ": missing ' = '");
    out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

}  // namespace peerfx
