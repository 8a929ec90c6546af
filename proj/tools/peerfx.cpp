// Command-line front end: experiments, figure reproduction, graph
// diagnostics, identification checks and plotting.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "peerfx/diagnose.hpp"
#include "peerfx/experiment.hpp"
#include "peerfx/figures.hpp"
#include "peerfx/graph.hpp"
#include "peerfx/identify.hpp"
#include "peerfx/operators.hpp"
#include "peerfx/plot.hpp"

namespace fs = std::filesystem;
using namespace peerfx;

namespace {

struct GraphSource {
  std::string file;
  std::string kind = "erdos_renyi";
  std::size_t n = 0;
  int degree = 0;
  std::uint64_t seed = 1;
};

void add_graph_options(CLI::App* app, GraphSource& src) {
  app->add_option("--graph", src.file, "edge-list file");
  app->add_option("--ensemble", src.kind, "erdos_renyi | bipartite_union | clique_union");
  app->add_option("--n", src.n, "node count");
  app->add_option("--degree", src.degree, "degree d");
  app->add_option("--seed", src.seed, "generator seed");
}

Graph load_graph(const GraphSource& src) {
  if (!src.file.empty()) return read_edge_list_file(src.file);
  if (src.n == 0 || src.degree == 0)
    throw InvalidSpec("give --graph FILE or --ensemble with --n and --degree");
  switch (ensemble_kind_from_string(src.kind)) {
    case EnsembleKind::erdos_renyi: return gen_erdos_renyi(src.n, src.degree, src.seed);
    case EnsembleKind::bipartite_union: return gen_bipartite_union(src.n, src.degree);
    case EnsembleKind::clique_union: return gen_clique_union(src.n, src.degree);
    default: throw InvalidSpec("ensemble '" + src.kind + "' needs a config file");
  }
}

void finish_run(const ExperimentResult& res, const std::string& out, bool plot) {
  write_experiment(res, out);
  std::size_t bad = 0, unstable = 0;
  for (const auto& r : res.rows) {
    if (r.status == Status::unstable || r.status == Status::singular) ++unstable;
    if (!(r.status == Status::ok || r.status == Status::unstable)) ++bad;
  }
  std::cout << "wrote " << res.rows.size() << " rows to " << out << " (" << unstable
            << " unstable, " << bad << " failed)\n";
  if (plot) {
    const auto t = CsvTable::read_file((fs::path(out) / "summary.csv").string());
    for (const auto& p : plot_summary(t, (fs::path(out) / res.config.name).string()))
      std::cout << "wrote " << p << '\n';
  }
}

Matrix parse_matrix_arg(const std::string& text) {
  auto kv = KeyValueFile::parse_string("m = " + text);
  return detail::parse_matrix(kv, "m");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"peer-effect simulation and estimation toolkit"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "run an experiment from a config file");
  std::string config_path, out_override;
  int threads = -1;
  bool plot_after = false;
  run->add_option("config", config_path, "config file")->required();
  run->add_option("--output", out_override, "output directory");
  run->add_option("--threads", threads, "worker threads (0 = all cores)");
  run->add_flag("--plot", plot_after, "also write SVG plots");

  // reproduce-figure
  auto* repro = app.add_subcommand("reproduce-figure", "run one of the built-in figure experiments");
  int figure = 0;
  int reps = 0;
  bool print_config = false;
  repro->add_option("figure", figure, "figure number 1..6")->required()->check(CLI::Range(1, 6));
  repro->add_option("--output", out_override, "output directory");
  repro->add_option("--threads", threads, "worker threads (0 = all cores)");
  repro->add_option("--replications", reps, "override the replication count");
  repro->add_flag("--print-config", print_config, "print the config and exit");
  repro->add_flag("--plot", plot_after, "also write SVG plots");

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "structural statistics and assumption flags");
  GraphSource gsrc;
  add_graph_options(diag, gsrc);
  bool moments = false;
  LimParams lim;
  diag->add_flag("--moments", moments, "also print the network moment report");
  diag->add_option("--beta", lim.beta);
  diag->add_option("--delta", lim.delta);
  diag->add_option("--rho", lim.rho);
  diag->add_option("--sigma", lim.sigma);
  diag->add_option("--sigma-eps", lim.sigma_eps);

  // identify
  auto* ident = app.add_subcommand("identify", "identification checks for the sums model");
  std::string example, matrix_text, pi_text, graphon_name;
  bool as_E = false, csv = false, relevance = false;
  double perturb = 0.0, tol_overlap = kDefaultTolOverlap;
  int trials = 200;
  std::uint64_t ident_seed = 7;
  LisParams lis;
  ident->add_option("--example", example, "disconnected | rounded");
  ident->add_option("--P", matrix_text, "block matrix, rows separated by ';'");
  ident->add_option("--pi", pi_text, "community shares, space separated");
  ident->add_flag("--E", as_E, "the matrix given is E = P diag(pi)");
  ident->add_option("--graphon", graphon_name, "constant | linear | rank-one");
  ident->add_option("--perturb", perturb, "perturbation magnitude for a restoration sweep");
  ident->add_option("--trials", trials, "number of perturbations");
  ident->add_option("--seed", ident_seed, "perturbation seed");
  ident->add_option("--tol-overlap", tol_overlap, "overlap tolerance");
  ident->add_flag("--relevance", relevance, "also run the instrument relevance check");
  ident->add_option("--alpha", lis.alpha);
  ident->add_option("--beta", lis.beta);
  ident->add_option("--delta0", lis.delta0);
  ident->add_option("--rho0", lis.rho0);
  ident->add_option("--mu", lis.mu);
  ident->add_flag("--csv", csv, "print a CSV row instead of a report");

  // plot
  auto* plot = app.add_subcommand("plot", "SVG plots from a summary CSV");
  std::string summary_path, plot_prefix;
  plot->add_option("summary", summary_path, "summary.csv")->required();
  plot->add_option("--output", plot_prefix, "output path prefix")->required();

  // graph
  auto* graph = app.add_subcommand("graph", "generate a graph and write it as an edge list");
  GraphSource gen;
  std::string graph_out;
  add_graph_options(graph, gen);
  graph->add_option("--output", graph_out, "edge-list file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run || *repro) {
      ExperimentConfig cfg;
      if (*run) {
        cfg = load_config(config_path);
      } else {
        const std::string text = figure_config(figure);
        if (print_config) {
          std::cout << text;
          return 0;
        }
        cfg = parse_config(text);
        if (reps > 0) cfg.replications = reps;
      }
      if (!out_override.empty()) cfg.output_dir = out_override;
      if (threads >= 0) cfg.threads = threads;
      const ExperimentResult res = run_experiment(cfg);
      finish_run(res, cfg.output_dir, plot_after);
    } else if (*diag) {
      const Graph g = load_graph(gsrc);
      write_diagnostics(std::cout, diagnose(g));
      if (moments) {
        const RowNormOp op(g);
        write_moment_report(std::cout, moment_report(op, lim));
      }
    } else if (*ident) {
      std::optional<SbmSpec> spec;
      if (example == "disconnected") {
        Matrix E(3, 3);
        E << 1, 0, 0, 0, 1, 0.5, 0, 0.5, 1;
        spec = SbmSpec::from_E(E / 3.0, Vector::Constant(3, 1.0 / 3));
      } else if (example == "rounded") {
        Matrix E(3, 3);
        E << 0.2321, 0.0718, 0.0295, 0.0718, 0.0728, 0.0287, 0.0295, 0.0287, 0.0618;
        spec = SbmSpec::from_E(E, Vector::Constant(3, 1.0 / 3));
      } else if (!example.empty()) {
        throw InvalidSpec("unknown example '" + example + "'");
      } else if (!matrix_text.empty()) {
        const Matrix M = parse_matrix_arg(matrix_text);
        Vector pi = Vector::Constant(M.rows(), 1.0 / static_cast<double>(M.rows()));
        if (!pi_text.empty()) {
          const Matrix p = parse_matrix_arg(pi_text);
          pi = Eigen::Map<const Vector>(p.data(), p.size());
        }
        spec = as_E ? SbmSpec::from_E(M, pi) : SbmSpec{M, pi};
      }
      if (spec) {
        const IdentificationVerdict v =
            relevance ? relevance_check(*spec, lis, kDefaultTolEig, tol_overlap)
                      : sbm_identification(*spec, kDefaultTolEig, tol_overlap);
        if (csv) {
          write_verdict_csv_header(std::cout);
          write_verdict_csv_row(std::cout, v);
        } else {
          write_verdict_report(std::cout, v);
        }
        if (perturb > 0.0) {
          const Matrix E = spec->E();
          int ok = 0;
          for (int t = 0; t < trials; ++t) {
            const Matrix Ep = perturb_symmetric(E, perturb, split_seed(ident_seed, t));
            if (sbm_identification(SbmSpec::from_E(Ep, spec->pi), kDefaultTolEig, tol_overlap)
                    .identified)
              ++ok;
          }
          std::cout << "identified after perturbation: " << ok << " / " << trials << '\n';
        }
      } else if (!graphon_name.empty()) {
        GraphonFn f;
        if (graphon_name == "constant") {
          f = [](double, double) { return 0.5; };
        } else if (graphon_name == "linear") {
          f = [](double u, double v) { return u + v; };
        } else if (graphon_name == "rank-one") {
          f = [](double u, double v) { return (0.5 + u) * (0.5 + v); };
        } else {
          throw InvalidSpec("unknown graphon '" + graphon_name + "'");
        }
        const IdentificationVerdict v = degree_codegree_check(f);
        if (csv) {
          write_verdict_csv_header(std::cout);
          write_verdict_csv_row(std::cout, v);
        } else {
          write_verdict_report(std::cout, v);
        }
      } else {
        throw InvalidSpec("identify needs --example, --P or --graphon");
      }
    } else if (*plot) {
      for (const auto& p : plot_summary(CsvTable::read_file(summary_path), plot_prefix))
        std::cout << "wrote " << p << '\n';
    } else if (*graph) {
      const Graph g = load_graph(gen);
      if (graph_out.empty()) {
        write_edge_list(std::cout, g);
      } else {
        std::ofstream f(graph_out);
        if (!f) throw FormatError("cannot write '" + graph_out + "'");
        write_edge_list(f, g);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
