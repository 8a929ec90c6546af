#pragma once

#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

#include "peerfx/graph.hpp"
#include "peerfx/operators.hpp"

namespace peerfx {

enum class Flag { holds, borderline, violated };

inline std::string to_string(Flag f) {
  switch (f) {
    case Flag::holds: return "holds";
    case Flag::borderline: return "borderline";
    case Flag::violated: return "violated";
  }
  return "unknown";
}

struct GraphDiagnostics {
  std::size_t n = 0;
  std::size_t edges = 0;
  int min_degree = 0;
  double mean_degree = 0.0;
  int max_degree = 0;
  std::size_t isolated = 0;
  double c1 = 0.0;  // min degree / mean degree
  double c2 = 0.0;  // max degree / mean degree
  double norm_G_sq = 0.0;
  double norm_G2_sq = 0.0;
  CycleCensus census;
  double triangle_ratio = 0.0;  // c3 * d / c4
  double lambda1 = 0.0;
  Flag regularity = Flag::holds;
  Flag triangles = Flag::holds;
};

// Finite-n readings of near-degree regularity and the triangle/4-cycle
// condition. Thresholds are qualitative: the conditions are asymptotic.
inline GraphDiagnostics diagnose(const Graph& g) {
  GraphDiagnostics d;
  d.n = g.n();
  d.edges = g.num_edges();
  d.min_degree = g.min_degree();
  d.mean_degree = g.mean_degree();
  d.max_degree = g.max_degree();
  d.isolated = g.isolated_count();
  if (d.mean_degree > 0) {
    d.c1 = d.min_degree / d.mean_degree;
    d.c2 = d.max_degree / d.mean_degree;
  }
  const RowNormOp op(g);
  d.norm_G_sq = op.frobenius_sq_closed();
  OperatorContext ctx(op);
  d.norm_G2_sq = frobenius_sq(ctx, OperatorWord{Letter::G, Letter::G});
  d.census = cycle_census(g);
  d.triangle_ratio = d.census.c4 > 0 ? static_cast<double>(d.census.c3) * d.mean_degree /
                                           static_cast<double>(d.census.c4)
                                     : 0.0;
  d.lambda1 = spectral_radius(g);
  if (d.isolated > 0 || d.c1 < 0.1 || d.c2 > 10.0) {
    d.regularity = Flag::violated;
  } else if (d.c1 < 0.5 || d.c2 > 2.0) {
    d.regularity = Flag::borderline;
  }
  if (d.triangle_ratio >= 0.5) {
    d.triangles = Flag::violated;
  } else if (d.triangle_ratio >= 0.1) {
    d.triangles = Flag::borderline;
  }
  return d;
}

inline void write_diagnostics(std::ostream& os, const GraphDiagnostics& d) {
  os << std::setprecision(8);
  os << "n = " << d.n << '\n';
  os << "edges = " << d.edges << '\n';
  os << "degree_min = " << d.min_degree << '\n';
  os << "degree_mean = " << d.mean_degree << '\n';
  os << "degree_max = " << d.max_degree << '\n';
  os << "isolated = " << d.isolated << '\n';
  os << "c1 = " << d.c1 << '\n';
  os << "c2 = " << d.c2 << '\n';
  os << "norm_G_sq = " << d.norm_G_sq << '\n';
  os << "norm_G2_sq = " << d.norm_G2_sq << '\n';
  os << "c3 = " << d.census.c3 << '\n';
  os << "c4 = " << d.census.c4 << '\n';
  os << "open_triples = " << d.census.open_triples << '\n';
  os << "clustering = " << d.census.clustering << '\n';
  os << "c3_d_over_c4 = " << d.triangle_ratio << '\n';
  os << "lambda1 = " << d.lambda1 << '\n';
  os << "degree_regularity = " << to_string(d.regularity) << '\n';
  os << "few_triangles = " << to_string(d.triangles) << '\n';
}

}  // namespace peerfx
