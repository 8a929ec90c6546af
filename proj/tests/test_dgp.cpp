#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "peerfx/dgp.hpp"

using namespace peerfx;

namespace {

Matrix dense_G(const Graph& g) {
  Matrix G = g.to_dense();
  for (Eigen::Index i = 0; i < G.rows(); ++i)
    if (g.degree(i) > 0) G.row(i) /= g.degree(i);
  return G;
}

}  // namespace

TEST(SimulateLim, InterceptOnly) {
  const Graph g = gen_erdos_renyi(2000, 10, 1);
  LimParams p;
  p.beta = p.delta = p.rho = 0.0;
  const Dataset d = simulate_lim(RowNormOp(g), p, 5);
  EXPECT_LT((d.Y - (p.alpha * Vector::Ones(2000) + d.eps)).norm(), 1e-12);
  EXPECT_LT(std::abs(d.Y.mean() - p.alpha), 4 * p.sigma_eps / std::sqrt(2000.0));
}

TEST(SimulateLim, MatchesDirectSolve) {
  const Graph g = gen_erdos_renyi(300, 9, 2);
  const LimParams p;
  const Dataset d = simulate_lim(RowNormOp(g), p, 8);
  const Matrix G = dense_G(g);
  const Matrix S = Matrix::Identity(300, 300) - p.rho * G;
  const Vector rhs = p.alpha * Vector::Ones(300) + p.beta * d.X + p.delta * G * d.X + d.eps;
  const Vector y = S.partialPivLu().solve(rhs);
  EXPECT_LT((d.Y - y).norm(), 1e-9 * y.norm());
  // reduced form Y = alpha S^-1 1 + H X + S^-1 eps
  const Matrix Sinv = S.inverse();
  const Matrix H = (p.beta * Matrix::Identity(300, 300) + p.delta * G) * Sinv;
  const Vector rf = p.alpha * Sinv * Vector::Ones(300) + H * d.X + Sinv * d.eps;
  EXPECT_LT((d.Y - rf).norm(), 1e-9 * rf.norm());
}

TEST(SimulateLim, RegularGraphLevel) {
  // With sigma = 0, X = mu and G1 = 1: Y = (alpha + mu beta + mu delta)/(1 - rho) + S^-1 eps.
  const Graph g = gen_clique_union(60, 5);
  LimParams p;
  p.sigma = 0.0;
  const Dataset d = simulate_lim(RowNormOp(g), p, 3);
  const double level = (p.alpha + p.mu * p.beta + p.mu * p.delta) / (1 - p.rho);
  const Matrix S = Matrix::Identity(60, 60) - p.rho * dense_G(g);
  const Vector noise = S.partialPivLu().solve(d.eps);
  EXPECT_LT((d.Y - Vector::Constant(60, level) - noise).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(SimulateLim, DrawsAreReproducible) {
  const Graph g = gen_erdos_renyi(200, 8, 1);
  const RowNormOp op(g);
  const LimParams p;
  const Dataset a = simulate_lim(op, p, 99), b = simulate_lim(op, p, 99), c = simulate_lim(op, p, 100);
  EXPECT_EQ(a.X, b.X);
  EXPECT_EQ(a.Y, b.Y);
  EXPECT_NE(a.X, c.X);
  EXPECT_EQ(a.seed, 99u);
}

TEST(SimulateLim, MomentsOfDraws) {
  const Graph g = gen_erdos_renyi(20000, 5, 1);
  const LimParams p;
  const Dataset d = simulate_lim(RowNormOp(g), p, 4);
  const double n = 20000;
  EXPECT_LT(std::abs(d.X.mean() - p.mu), 4 * p.sigma / std::sqrt(n));
  const double sx = std::sqrt((d.X.array() - d.X.mean()).square().sum() / (n - 1));
  EXPECT_NEAR(sx, p.sigma, 4 * p.sigma / std::sqrt(2 * n));
  const double se = std::sqrt(d.eps.squaredNorm() / n);
  EXPECT_NEAR(se, p.sigma_eps, 4 * p.sigma_eps / std::sqrt(2 * n));
  // X and eps independent: sample correlation within 4/sqrt(n)
  const Vector xc = d.X.array() - d.X.mean();
  const double corr = xc.dot(d.eps) / (xc.norm() * d.eps.norm());
  EXPECT_LT(std::abs(corr), 4 / std::sqrt(n));
}

TEST(SimulateLim, RejectsInvalidRho) {
  const Graph g = gen_erdos_renyi(50, 5, 1);
  LimParams p;
  p.rho = -1.0;
  EXPECT_THROW(simulate_lim(RowNormOp(g), p, 1), SpectralValidityError);
}

TEST(SimulateLis, RegularGraphLevel) {
  // A1 = d 1 and rho_n = rho0/d: level (alpha + mu beta + mu delta0)/(1 - rho0).
  const Graph g = gen_clique_union(60, 5);
  LisParams p;
  p.sigma = 0.0;
  p.sigma_eps = 0.0;
  const Dataset d = simulate_lis(g, p, 3);
  const double level = (p.alpha + p.mu * p.beta + p.mu * p.delta0) / (1 - p.rho0);
  EXPECT_LT((d.Y - Vector::Constant(60, level)).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_DOUBLE_EQ(d.degree_scale, 5.0);
  EXPECT_NEAR(d.lambda1, 5.0, 1e-9);
}

TEST(SimulateLis, MatchesDirectSolve) {
  Matrix P(2, 2);
  P << 0.9, 0.2, 0.2, 0.5;
  const Graph g = gen_sbm(P, Vector::Constant(2, 0.5), 0.1, 300, 4);
  const LisParams p;
  const Dataset d = simulate_lis(g, p, 6);
  const double dbar = g.mean_degree();
  const Matrix A = g.to_dense();
  const Matrix S = Matrix::Identity(300, 300) - (p.rho0 / dbar) * A;
  const Vector rhs = p.alpha * Vector::Ones(300) + p.beta * d.X + (p.delta0 / dbar) * A * d.X + d.eps;
  const Vector y = S.partialPivLu().solve(rhs);
  EXPECT_LT((d.Y - y).norm(), 1e-9 * y.norm());
}

TEST(SimulateLis, SpectralCheck) {
  // rho0 = 2 on a regular graph gives |rho_n| lambda_1 = 2.
  const Graph g = gen_clique_union(30, 4);
  LisParams p;
  p.rho0 = 2.0;
  try {
    simulate_lis(g, p, 1);
    FAIL() << "expected a spectral validity error";
  } catch (const SpectralValidityError& e) {
    EXPECT_NE(std::string(e.what()).find("lambda_1=4"), std::string::npos) << e.what();
  }
  EXPECT_THROW(simulate_lis(Graph(4, {}), LisParams{}, 1), InvalidSpec);
  const LisScaling s = lis_scaling(g, LisParams{});
  EXPECT_DOUBLE_EQ(s.rho_n, 0.3 / 4);
  EXPECT_DOUBLE_EQ(s.delta_n, 0.6 / 4);
}

TEST(Dataset, CsvLayout) {
  Dataset d;
  d.X = Vector::LinSpaced(2, 1.0, 2.0);
  d.Y = Vector::LinSpaced(2, 3.0, 4.0);
  d.eps = Vector::Zero(2);
  std::ostringstream a, b;
  write_dataset_csv(a, d);
  write_dataset_csv(b, d, true);
  EXPECT_EQ(a.str(), "node_id,x,y\n0,1,3\n1,2,4\n");
  EXPECT_EQ(b.str(), "node_id,x,y,eps\n0,1,3,0\n1,2,4,0\n");
}
