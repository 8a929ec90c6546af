#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "peerfx/errors.hpp"
#include "peerfx/rng.hpp"

namespace peerfx {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

// Simple undirected graph in compressed-row form. Rows are sorted, so the
// structure is canonical for a given edge set. Immutable after construction.
class Graph {
 public:
  Graph() = default;

  // Builds from undirected edges; each pair may be given in either order.
  // Self-loops, duplicates and out-of-range ids are rejected.
  Graph(std::size_t n, std::vector<Edge> edges) : n_(n) {
    for (auto& [a, b] : edges) {
      if (a >= n || b >= n) {
        throw InvalidSpec("edge (" + std::to_string(a) + "," + std::to_string(b) +
                          ") out of range for n=" + std::to_string(n));
      }
      if (a == b) throw InvalidSpec("self-loop at node " + std::to_string(a));
      if (a > b) std::swap(a, b);
    }
    std::sort(edges.begin(), edges.end());
    if (std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
      throw InvalidSpec("duplicate edge in edge list");
    }
    degrees_.assign(n, 0);
    for (const auto& [a, b] : edges) {
      ++degrees_[a];
      ++degrees_[b];
    }
    offsets_.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) offsets_[i + 1] = offsets_[i] + degrees_[i];
    neighbors_.resize(offsets_[n]);
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (const auto& [a, b] : edges) {
      neighbors_[fill[a]++] = b;
      neighbors_[fill[b]++] = a;
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::sort(neighbors_.begin() + offsets_[i], neighbors_.begin() + offsets_[i + 1]);
    }
  }

  std::size_t n() const { return n_; }
  std::size_t num_edges() const { return neighbors_.size() / 2; }
  int degree(std::size_t i) const { return degrees_[i]; }
  const std::vector<int>& degrees() const { return degrees_; }

  std::span<const NodeId> neighbors(std::size_t i) const {
    return {neighbors_.data() + offsets_[i], neighbors_.data() + offsets_[i + 1]};
  }

  bool has_edge(std::size_t i, std::size_t j) const {
    auto row = neighbors(i);
    return std::binary_search(row.begin(), row.end(), static_cast<NodeId>(j));
  }

  double mean_degree() const {
    return n_ == 0 ? 0.0 : static_cast<double>(neighbors_.size()) / static_cast<double>(n_);
  }
  int min_degree() const {
    return degrees_.empty() ? 0 : *std::min_element(degrees_.begin(), degrees_.end());
  }
  int max_degree() const {
    return degrees_.empty() ? 0 : *std::max_element(degrees_.begin(), degrees_.end());
  }
  std::size_t isolated_count() const {
    return static_cast<std::size_t>(std::count(degrees_.begin(), degrees_.end(), 0));
  }

  // Edges with i < j in lexicographic order.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(num_edges());
    for (std::size_t i = 0; i < n_; ++i) {
      for (NodeId j : neighbors(i)) {
        if (j > i) out.emplace_back(static_cast<NodeId>(i), j);
      }
    }
    return out;
  }

  // y = A x
  Vector multiply(const Vector& x) const {
    Vector y(static_cast<Eigen::Index>(n_));
    for (std::size_t i = 0; i < n_; ++i) {
      double s = 0.0;
      for (NodeId j : neighbors(i)) s += x[j];
      y[static_cast<Eigen::Index>(i)] = s;
    }
    return y;
  }

  Matrix to_dense() const {
    const auto n = static_cast<Eigen::Index>(n_);
    Matrix a = Matrix::Zero(n, n);
    for (std::size_t i = 0; i < n_; ++i) {
      for (NodeId j : neighbors(i)) a(static_cast<Eigen::Index>(i), j) = 1.0;
    }
    return a;
  }

  // Symmetry, hollow diagonal, sorted unique rows, degrees equal row lengths.
  bool check_invariants() const {
    if (offsets_.size() != n_ + 1 || degrees_.size() != n_) return false;
    for (std::size_t i = 0; i < n_; ++i) {
      auto row = neighbors(i);
      if (static_cast<int>(row.size()) != degrees_[i]) return false;
      for (std::size_t k = 0; k < row.size(); ++k) {
        if (row[k] == i || row[k] >= n_) return false;
        if (k > 0 && row[k] <= row[k - 1]) return false;
        if (!has_edge(row[k], i)) return false;
      }
    }
    return true;
  }

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.n_ == b.n_ && a.offsets_ == b.offsets_ && a.neighbors_ == b.neighbors_;
  }

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeId> neighbors_;
  std::vector<int> degrees_;
};

// ---------------------------------------------------------------------------
// Ensembles

enum class EnsembleKind { erdos_renyi, bipartite_union, clique_union, sbm, graphon };

inline std::string to_string(EnsembleKind k) {
  switch (k) {
    case EnsembleKind::erdos_renyi: return "erdos_renyi";
    case EnsembleKind::bipartite_union: return "bipartite_union";
    case EnsembleKind::clique_union: return "clique_union";
    case EnsembleKind::sbm: return "sbm";
    case EnsembleKind::graphon: return "graphon";
  }
  return "unknown";
}

inline EnsembleKind ensemble_kind_from_string(const std::string& s) {
  if (s == "erdos_renyi" || s == "er") return EnsembleKind::erdos_renyi;
  if (s == "bipartite_union" || s == "bipartite") return EnsembleKind::bipartite_union;
  if (s == "clique_union" || s == "clique") return EnsembleKind::clique_union;
  if (s == "sbm") return EnsembleKind::sbm;
  if (s == "graphon") return EnsembleKind::graphon;
  throw InvalidSpec("unknown ensemble kind '" + s + "'");
}

using GraphonFn = std::function<double(double, double)>;

// Degree scale d(n) = round(c * n^alpha), clamped to at least 1.
struct DegreeLaw {
  double c = 1.0;
  double alpha = 0.5;

  // Chooses c so that d(n_ref) == d_ref exactly before rounding.
  static DegreeLaw calibrated(double alpha, double n_ref, double d_ref) {
    return {d_ref / std::pow(n_ref, alpha), alpha};
  }

  int at(std::size_t n) const {
    const double d = c * std::pow(static_cast<double>(n), alpha);
    return std::max(1, static_cast<int>(std::lround(d)));
  }
};

struct EnsembleSpec {
  EnsembleKind kind = EnsembleKind::erdos_renyi;
  std::size_t n = 0;
  DegreeLaw law{};
  std::optional<int> explicit_degree;  // overrides law when set
  // sbm payload
  Matrix P;
  Vector pi;
  // graphon payload; sparsity p_n defaults to d(n)/n
  GraphonFn graphon;
  std::optional<double> sparsity;
  std::uint64_t seed = 0;

  int degree() const { return explicit_degree ? *explicit_degree : law.at(n); }
  double p_n() const {
    return sparsity ? *sparsity : static_cast<double>(degree()) / static_cast<double>(n);
  }
};

namespace detail {

// Batagelj-Brandes geometric skipping over pairs (w < v) of [0, n).
template <class Emit>
void sample_pairs_within(std::size_t n, double p, Engine& eng, Emit&& emit) {
  if (n < 2 || p <= 0.0) return;
  if (p >= 1.0) {
    for (std::size_t v = 1; v < n; ++v)
      for (std::size_t w = 0; w < v; ++w) emit(w, v);
    return;
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double log_q = std::log1p(-p);
  std::int64_t v = 1, w = -1;
  const auto nn = static_cast<std::int64_t>(n);
  while (v < nn) {
    const double r = unif(eng);
    w += 1 + static_cast<std::int64_t>(std::floor(std::log1p(-r) / log_q));
    while (w >= v && v < nn) {
      w -= v;
      ++v;
    }
    if (v < nn) emit(static_cast<std::size_t>(w), static_cast<std::size_t>(v));
  }
}

// Same skipping over the na x nb rectangle of cross pairs.
template <class Emit>
void sample_pairs_between(std::size_t na, std::size_t nb, double p, Engine& eng, Emit&& emit) {
  if (na == 0 || nb == 0 || p <= 0.0) return;
  if (p >= 1.0) {
    for (std::size_t a = 0; a < na; ++a)
      for (std::size_t b = 0; b < nb; ++b) emit(a, b);
    return;
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double log_q = std::log1p(-p);
  const auto total = static_cast<std::int64_t>(na * nb);
  std::int64_t k = -1;
  while (true) {
    const double r = unif(eng);
    k += 1 + static_cast<std::int64_t>(std::floor(std::log1p(-r) / log_q));
    if (k >= total || k < 0) break;
    emit(static_cast<std::size_t>(k) / nb, static_cast<std::size_t>(k) % nb);
  }
}

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidSpec(msg);
}

}  // namespace detail

// Each unordered pair is an edge with probability d/(n-1), so E[d_i] = d.
inline Graph gen_erdos_renyi(std::size_t n, double d, std::uint64_t seed) {
  detail::require(n >= 2, "erdos_renyi needs n >= 2");
  detail::require(d >= 1.0 && d < static_cast<double>(n),
                  "erdos_renyi needs 1 <= d < n (d=" + std::to_string(d) + ", n=" +
                      std::to_string(n) + ")");
  Engine eng = make_engine(seed);
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(static_cast<double>(n) * d / 2 * 1.1) + 16);
  const double p = d / static_cast<double>(n - 1);
  detail::sample_pairs_within(n, p, eng, [&](std::size_t w, std::size_t v) {
    edges.emplace_back(static_cast<NodeId>(w), static_cast<NodeId>(v));
  });
  return Graph(n, std::move(edges));
}

// Disjoint union of K_{d,d}. Leftover nodes form one smaller balanced complete
// bipartite block; a single leftover node joins the last full block instead,
// so no node is ever isolated.
inline Graph gen_bipartite_union(std::size_t n, int d) {
  detail::require(d >= 1, "bipartite_union needs d >= 1");
  detail::require(2 * static_cast<std::size_t>(d) <= n, "bipartite_union needs 2d <= n");
  const auto dd = static_cast<std::size_t>(d);
  std::vector<std::pair<std::size_t, std::size_t>> blocks(n / (2 * dd), {dd, dd});
  const std::size_t rem = n % (2 * dd);
  if (rem == 1) {
    blocks.back().second += 1;
  } else if (rem >= 2) {
    blocks.emplace_back(rem / 2, rem - rem / 2);
  }
  std::vector<Edge> edges;
  std::size_t start = 0;
  for (auto [left, right] : blocks) {
    for (std::size_t a = 0; a < left; ++a)
      for (std::size_t b = 0; b < right; ++b)
        edges.emplace_back(static_cast<NodeId>(start + a), static_cast<NodeId>(start + left + b));
    start += left + right;
  }
  return Graph(n, std::move(edges));
}

// Disjoint union of K_{d+1}. Leftover nodes form one smaller clique; a single
// leftover node joins the last full clique.
inline Graph gen_clique_union(std::size_t n, int d) {
  detail::require(d >= 1, "clique_union needs d >= 1");
  detail::require(static_cast<std::size_t>(d) + 1 <= n, "clique_union needs d+1 <= n");
  const auto b = static_cast<std::size_t>(d) + 1;
  std::vector<std::size_t> sizes(n / b, b);
  const std::size_t rem = n % b;
  if (rem == 1) {
    sizes.back() += 1;
  } else if (rem >= 2) {
    sizes.push_back(rem);
  }
  std::vector<Edge> edges;
  std::size_t start = 0;
  for (auto s : sizes) {
    for (std::size_t a = 0; a < s; ++a)
      for (std::size_t c = a + 1; c < s; ++c)
        edges.emplace_back(static_cast<NodeId>(start + a), static_cast<NodeId>(start + c));
    start += s;
  }
  return Graph(n, std::move(edges));
}

struct SbmSample {
  Graph graph;
  std::vector<int> membership;
};

inline void validate_sbm(const Matrix& P, const Vector& pi, double p_n) {
  detail::require(P.rows() == P.cols() && P.rows() > 0, "sbm: P must be square and nonempty");
  detail::require(pi.size() == P.rows(), "sbm: pi length must match P");
  for (Eigen::Index a = 0; a < P.rows(); ++a) {
    for (Eigen::Index b = 0; b < P.cols(); ++b) {
      detail::require(P(a, b) >= 0.0 && P(a, b) <= 1.0, "sbm: P entries must lie in [0,1]");
      detail::require(P(a, b) == P(b, a), "sbm: P must be symmetric");
    }
  }
  detail::require((pi.array() >= 0.0).all(), "sbm: pi entries must be nonnegative");
  detail::require(std::abs(pi.sum() - 1.0) <= 1e-9, "sbm: pi must sum to 1");
  detail::require(p_n > 0.0, "sbm: sparsity p_n must be positive");
  detail::require(p_n * P.maxCoeff() <= 1.0 + 1e-12, "sbm: p_n * max(P) must be <= 1");
}

// Memberships i.i.d. from pi; edge (i,j) present with probability p_n P[c_i, c_j].
inline SbmSample gen_sbm_sample(const Matrix& P, const Vector& pi, double p_n, std::size_t n,
                                std::uint64_t seed) {
  validate_sbm(P, pi, p_n);
  Engine eng = make_engine(seed);
  std::discrete_distribution<int> block(pi.data(), pi.data() + pi.size());
  SbmSample out;
  out.membership.resize(n);
  const auto K = static_cast<std::size_t>(P.rows());
  std::vector<std::vector<NodeId>> members(K);
  for (std::size_t i = 0; i < n; ++i) {
    out.membership[i] = block(eng);
    members[static_cast<std::size_t>(out.membership[i])].push_back(static_cast<NodeId>(i));
  }
  std::vector<Edge> edges;
  for (std::size_t a = 0; a < K; ++a) {
    for (std::size_t b = a; b < K; ++b) {
      const double p = std::min(1.0, p_n * P(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
      const auto& ma = members[a];
      const auto& mb = members[b];
      if (a == b) {
        detail::sample_pairs_within(ma.size(), p, eng, [&](std::size_t w, std::size_t v) {
          edges.emplace_back(ma[w], ma[v]);
        });
      } else {
        detail::sample_pairs_between(ma.size(), mb.size(), p, eng, [&](std::size_t x, std::size_t y) {
          edges.emplace_back(ma[x], mb[y]);
        });
      }
    }
  }
  out.graph = Graph(n, std::move(edges));
  return out;
}

inline Graph gen_sbm(const Matrix& P, const Vector& pi, double p_n, std::size_t n, std::uint64_t seed) {
  return gen_sbm_sample(P, pi, p_n, n, seed).graph;
}

struct GraphonSample {
  Graph graph;
  std::vector<double> latent;    // U_i
  std::size_t clipped_pairs = 0;  // pairs where p_n f(U_i,U_j) > 1
};

// A_ij ~ Bernoulli(p_n f(U_i, U_j)), U_i ~ Uniform(0,1). Probabilities above
// one are clipped and counted.
inline GraphonSample gen_graphon_sample(const GraphonFn& f, double p_n, std::size_t n,
                                        std::uint64_t seed) {
  detail::require(static_cast<bool>(f), "graphon: function handle is empty");
  detail::require(p_n > 0.0, "graphon: sparsity p_n must be positive");
  Engine eng = make_engine(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  GraphonSample out;
  out.latent.resize(n);
  for (auto& u : out.latent) u = unif(eng);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double fv = f(out.latent[i], out.latent[j]);
      if (!(fv >= 0.0)) {
        throw InvalidSpec("graphon: f returned a negative or non-finite value");
      }
      double p = p_n * fv;
      if (p > 1.0) {
        p = 1.0;
        ++out.clipped_pairs;
      }
      if (unif(eng) < p) edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
    }
  }
  out.graph = Graph(n, std::move(edges));
  return out;
}

inline Graph gen_graphon(const GraphonFn& f, double p_n, std::size_t n, std::uint64_t seed) {
  return gen_graphon_sample(f, p_n, n, seed).graph;
}

// Dispatch on spec.kind.
inline Graph realize(const EnsembleSpec& spec) {
  switch (spec.kind) {
    case EnsembleKind::erdos_renyi:
      return gen_erdos_renyi(spec.n, spec.degree(), spec.seed);
    case EnsembleKind::bipartite_union:
      return gen_bipartite_union(spec.n, spec.degree());
    case EnsembleKind::clique_union:
      return gen_clique_union(spec.n, spec.degree());
    case EnsembleKind::sbm:
      return gen_sbm(spec.P, spec.pi, spec.p_n(), spec.n, spec.seed);
    case EnsembleKind::graphon:
      return gen_graphon(spec.graphon, spec.p_n(), spec.n, spec.seed);
  }
  throw InvalidSpec("unhandled ensemble kind");
}

// ---------------------------------------------------------------------------
// Structural statistics

struct CycleCensus {
  std::int64_t c3 = 0;            // Tr(A^3): closed 3-walks, 6 per triangle
  std::int64_t c4 = 0;            // Tr(A^4) - sum_i d_i
  std::int64_t open_triples = 0;  // ordered open wedges
  double clustering = 0.0;        // c3 / (c3 + open_triples)

  friend bool operator==(const CycleCensus&, const CycleCensus&) = default;
};

inline CycleCensus cycle_census(const Graph& g) {
  const std::size_t n = g.n();
  CycleCensus out;
  std::int64_t tr4 = 0, wedges = 0, deg_sum = 0;
  std::vector<std::int64_t> paths2(n, 0);
  std::vector<NodeId> touched;
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t di = g.degree(i);
    deg_sum += di;
    wedges += di * (di - 1);
    auto row_i = g.neighbors(i);
    for (NodeId j : row_i) {
      // common neighbours of i and j close a 3-walk i->j->k->i
      auto row_j = g.neighbors(j);
      std::size_t a = 0, b = 0;
      while (a < row_i.size() && b < row_j.size()) {
        if (row_i[a] < row_j[b]) {
          ++a;
        } else if (row_j[b] < row_i[a]) {
          ++b;
        } else {
          ++out.c3;
          ++a;
          ++b;
        }
      }
      for (NodeId k : row_j) {
        if (paths2[k]++ == 0) touched.push_back(k);
      }
    }
    for (NodeId k : touched) {
      tr4 += paths2[k] * paths2[k];
      paths2[k] = 0;
    }
    touched.clear();
  }
  out.c4 = tr4 - deg_sum;
  out.open_triples = wedges - out.c3;
  const std::int64_t denom = out.c3 + out.open_triples;
  out.clustering = denom > 0 ? static_cast<double>(out.c3) / static_cast<double>(denom) : 0.0;
  return out;
}

// Largest adjacency eigenvalue by power iteration on A + I (the shift keeps
// bipartite graphs from oscillating between +/- lambda_1). Converged when the
// eigen-residual ||Ax - theta x|| is below tol * theta.
inline double spectral_radius(const Graph& g, double tol = 1e-10, int max_iter = 50000) {
  const auto n = static_cast<Eigen::Index>(g.n());
  if (n == 0 || g.num_edges() == 0) return 0.0;
  Vector x = Vector::Ones(n) / std::sqrt(static_cast<double>(n));
  double theta = 0.0;
  double resid = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector ax = g.multiply(x);
    theta = x.dot(ax);
    resid = (ax - theta * x).norm();
    if (resid <= tol * theta) return theta;
    Vector next = ax + x;
    x = next / next.norm();
  }
  std::ostringstream msg;
  msg << "spectral_radius: no convergence after " << max_iter << " iterations (theta=" << theta
      << ", residual=" << resid << ", tol=" << tol << ")";
  throw NumericError(msg.str());
}

// ---------------------------------------------------------------------------
// Edge-list format: "n <count>" header, then one "i j" line per edge, i < j.

inline void write_edge_list(std::ostream& os, const Graph& g) {
  os << "n " << g.n() << '\n';
  for (const auto& [i, j] : g.edges()) os << i << ' ' << j << '\n';
}

inline Graph read_edge_list(std::istream& is) {
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> n;
  std::vector<Edge> edges;
  auto fail = [&](const std::string& msg) {
    throw FormatError("edge list line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    if (!n) {
      std::string tag;
      long long count = -1;
      if (!(ls >> tag >> count) || tag != "n" || count < 0) fail("expected header 'n <count>'");
      n = static_cast<std::size_t>(count);
      continue;
    }
    long long i = -1, j = -1;
    if (!(ls >> i >> j)) fail("expected 'i j'");
    std::string extra;
    if (ls >> extra) fail("trailing content '" + extra + "'");
    if (i < 0 || j < 0 || static_cast<std::size_t>(i) >= *n || static_cast<std::size_t>(j) >= *n)
      fail("node id out of range");
    if (i >= j) fail("expected i < j");
    edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
  }
  if (!n) throw FormatError("edge list: missing 'n <count>' header");
  try {
    return Graph(*n, std::move(edges));
  } catch (const InvalidSpec& e) {
    throw FormatError(std::string("edge list: ") + e.what());
  }
}

inline Graph read_edge_list_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open edge list '" + path + "'");
  return read_edge_list(in);
}

}  // namespace peerfx
