#pragma once

#include <string>

#include "peerfx/errors.hpp"

namespace peerfx {

// Built-in experiment definitions for the six simulation figures. The same
// text ships as configs/figN.ini.
inline std::string figure_config(int k) {
  const std::string common_params =
      "[params]\n"
      "alpha = 1\n"
      "delta = 0.6\n"
      "rho = 0.3\n"
      "mu = 2\n"
      "sigma = 1\n"
      "sigma_eps = 0.1\n";
  const std::string grid =
      "[grid]\n"
      "start = 100\n"
      "stop = 2000\n"
      "step = 100\n";
  auto head = [](const std::string& name, const std::string& est, bool pseudo) {
    return "[experiment]\n"
           "name = " + name + "\n"
           "model = lim\n"
           "estimators = " + est + "\n"
           "replications = 200\n"
           "seed = 20240101\n"
           "output = out/" + name + "\n" +
           (pseudo ? "pseudo_solve = true\n" : "");
  };
  auto ensemble = [](const std::string& kind, const std::string& alpha) {
    return "[ensemble]\n"
           "kind = " + kind + "\n"
           "degree_alpha = " + alpha + "\n"
           "calibrate_n = 100\n"
           "calibrate_d = 10\n";
  };
  switch (k) {
    case 1:
      return "# Erdos-Renyi, d proportional to n^(1/2)\n" + head("fig1", "ols_lim, tsls_lim", false) +
             grid + ensemble("erdos_renyi", "0.5") + common_params + "beta = 1.5\n";
    case 2:
      return "# Erdos-Renyi, d proportional to n^(1/4)\n" + head("fig2", "ols_lim, tsls_lim", false) +
             grid + ensemble("erdos_renyi", "0.25") + common_params + "beta = 1.5\n";
    case 3:
      return "# Erdos-Renyi, d proportional to n^(1/4), no direct effect\n" +
             head("fig3", "ols_lim, tsls_lim", false) + grid + ensemble("erdos_renyi", "0.25") +
             common_params + "beta = 0\n";
    case 4:
      return "# union of complete bipartite graphs, no direct effect\n" +
             head("fig4", "ols_lim, tsls_lim", false) + grid +
             ensemble("bipartite_union", "0.25") + common_params + "beta = 0\n";
    case 5:
      return "# union of cliques, OLS\n" + head("fig5", "ols_lim", false) + grid +
             ensemble("clique_union", "0.25") + common_params + "beta = 1.5\n";
    case 6:
      return "# union of cliques, 2SLS\n" + head("fig6", "tsls_lim", true) + grid +
             ensemble("clique_union", "0.25") + common_params + "beta = 1.5\n";
    default:
      throw InvalidSpec("figure must be 1..6 (got " + std::to_string(k) + ")");
  }
}

}  // namespace peerfx
