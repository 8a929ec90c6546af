#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "peerfx/dgp.hpp"
#include "peerfx/errors.hpp"
#include "peerfx/estimators.hpp"
#include "peerfx/graph.hpp"
#include "peerfx/identify.hpp"
#include "peerfx/operators.hpp"
#include "peerfx/rng.hpp"

namespace peerfx {

// ---------------------------------------------------------------------------
// Flat sectioned key-value files:
//   # comment
//   [section]
//   key = value

class KeyValueFile {
 public:
  struct Entry {
    std::string value;
    std::size_t line = 0;
    mutable bool used = false;
  };

  static KeyValueFile parse(std::istream& is, const std::string& source = "<config>") {
    KeyValueFile kv;
    kv.source_ = source;
    std::string line, section;
    std::size_t no = 0;
    while (std::getline(is, line)) {
      ++no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string t = trim(line);
      if (t.empty()) continue;
      if (t.front() == '[') {
        if (t.back() != ']' || t.size() < 3) kv.fail(no, "malformed section header '" + t + "'");
        section = trim(t.substr(1, t.size() - 2));
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos) kv.fail(no, "expected 'key = value'");
      const std::string key = trim(t.substr(0, eq));
      const std::string val = trim(t.substr(eq + 1));
      if (key.empty()) kv.fail(no, "empty key");
      const std::string full = section.empty() ? key : section + "." + key;
      if (kv.entries_.count(full)) kv.fail(no, "duplicate key '" + full + "'");
      kv.entries_[full] = {val, no};
    }
    return kv;
  }

  static KeyValueFile parse_string(const std::string& text, const std::string& source = "<config>") {
    std::istringstream is(text);
    return parse(is, source);
  }

  static KeyValueFile parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open config '" + path + "'");
    return parse(in, path);
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  std::string get(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw FormatError(source_ + ": missing required key '" + key + "'");
    it->second.used = true;
    return it->second.value;
  }

  std::string get(const std::string& key, const std::string& fallback) const {
    return has(key) ? get(key) : fallback;
  }

  double number(const std::string& key) const {
    const std::string v = get(key);
    return to_number(key, v);
  }

  double number(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }

  std::vector<double> numbers(const std::string& key, char sep = ',') const {
    std::vector<double> out;
    for (const auto& tok : split(get(key), sep)) out.push_back(to_number(key, tok));
    return out;
  }

  std::vector<std::string> list(const std::string& key, char sep = ',') const {
    return split(get(key), sep);
  }

  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail(line_of(key), "expected a boolean for '" + key + "'");
    return false;
  }

  // Every key must have been read; catches typos.
  void require_all_used() const {
    for (const auto& [k, e] : entries_)
      if (!e.used) fail(e.line, "unknown key '" + k + "'");
  }

  std::size_t line_of(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
  }

  [[noreturn]] void fail(std::size_t line, const std::string& msg) const {
    throw FormatError(source_ + ":" + std::to_string(line) + ": " + msg);
  }

  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  static std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) {
      cur = trim(cur);
      if (!cur.empty()) out.push_back(cur);
    }
    return out;
  }

 private:
  double to_number(const std::string& key, const std::string& v) const {
    try {
      std::size_t pos = 0;
      const double x = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      fail(line_of(key), "expected a number for '" + key + "', got '" + v + "'");
    }
  }

  std::string source_;
  std::map<std::string, Entry> entries_;
};

// ---------------------------------------------------------------------------
// Experiment configuration

enum class ModelKind { lim, lis };

struct ExperimentConfig {
  std::string name = "experiment";
  ModelKind model = ModelKind::lim;
  EnsembleKind ensemble = EnsembleKind::erdos_renyi;
  std::vector<std::size_t> grid;
  DegreeLaw law{};
  std::optional<int> explicit_degree;
  // block model payload; sparsity p_n = sparsity_c * n^(-sparsity_alpha)
  Matrix P;
  Vector pi;
  double sparsity_c = 0.0;
  double sparsity_alpha = 0.5;
  LimParams lim{};
  LisParams lis{};
  std::vector<EstimatorKind> estimators{EstimatorKind::ols_lim, EstimatorKind::tsls_lim};
  int replications = 200;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  bool pseudo_solve = false;
  int threads = 0;  // 0: hardware concurrency

  void validate() const {
    if (grid.empty()) throw InvalidSpec("n grid is empty");
    for (std::size_t i = 1; i < grid.size(); ++i)
      if (grid[i] <= grid[i - 1]) throw InvalidSpec("n grid must be strictly ascending");
    if (replications < 1) throw InvalidSpec("replications must be >= 1");
    if (estimators.empty()) throw InvalidSpec("no estimators requested");
    for (auto e : estimators) {
      const bool lis_est = e == EstimatorKind::tsls_lis;
      if (lis_est != (model == ModelKind::lis))
        throw InvalidSpec("estimator " + to_string(e) + " does not match the model");
    }
    if (model == ModelKind::lim) lim.validate();
    if (model == ModelKind::lis) lis.validate();
    for (std::size_t n : grid) {
      const int d = degree_at(n);
      switch (ensemble) {
        case EnsembleKind::erdos_renyi:
          if (d < 1 || static_cast<std::size_t>(d) >= n)
            throw InvalidSpec("erdos_renyi needs 1 <= d < n at n=" + std::to_string(n));
          break;
        case EnsembleKind::bipartite_union:
          if (2 * static_cast<std::size_t>(d) > n)
            throw InvalidSpec("bipartite_union needs 2d <= n at n=" + std::to_string(n));
          break;
        case EnsembleKind::clique_union:
          if (static_cast<std::size_t>(d) + 1 > n)
            throw InvalidSpec("clique_union needs d+1 <= n at n=" + std::to_string(n));
          break;
        case EnsembleKind::sbm:
          validate_sbm(P, pi, sparsity_at(n));
          break;
        case EnsembleKind::graphon:
          throw InvalidSpec("graphon ensembles are not supported in config files");
      }
    }
  }

  int degree_at(std::size_t n) const { return explicit_degree ? *explicit_degree : law.at(n); }
  double sparsity_at(std::size_t n) const {
    return sparsity_c * std::pow(static_cast<double>(n), -sparsity_alpha);
  }
};

namespace detail {

inline Matrix parse_matrix(const KeyValueFile& kv, const std::string& key) {
  std::vector<std::vector<double>> rows;
  for (const auto& r : KeyValueFile::split(kv.get(key), ';')) {
    std::vector<double> row;
    std::istringstream is(r);
    double x;
    while (is >> x) row.push_back(x);
    if (!is.eof()) kv.fail(kv.line_of(key), "bad number in matrix '" + key + "'");
    rows.push_back(row);
  }
  if (rows.empty()) kv.fail(kv.line_of(key), "empty matrix '" + key + "'");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) kv.fail(kv.line_of(key), "ragged matrix '" + key + "'");
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

}  // namespace detail

inline ExperimentConfig config_from_kv(const KeyValueFile& kv) {
  ExperimentConfig c;
  c.name = kv.get("experiment.name", c.name);
  const std::string model = kv.get("experiment.model", "lim");
  if (model == "lim") {
    c.model = ModelKind::lim;
  } else if (model == "lis") {
    c.model = ModelKind::lis;
  } else {
    kv.fail(kv.line_of("experiment.model"), "model must be 'lim' or 'lis'");
  }
  c.replications = static_cast<int>(kv.number("experiment.replications", 200));
  c.seed = static_cast<std::uint64_t>(kv.number("experiment.seed", 1));
  c.output_dir = kv.get("experiment.output", c.output_dir);
  c.threads = static_cast<int>(kv.number("experiment.threads", 0));
  c.pseudo_solve = kv.flag("experiment.pseudo_solve", false);
  c.estimators.clear();
  const std::string default_est = c.model == ModelKind::lis ? "tsls_lis" : "ols_lim, tsls_lim";
  for (const auto& s : KeyValueFile::split(kv.get("experiment.estimators", default_est), ',')) {
    try {
      c.estimators.push_back(estimator_from_string(s));
    } catch (const InvalidSpec& e) {
      kv.fail(kv.line_of("experiment.estimators"), e.what());
    }
  }

  if (kv.has("grid.values")) {
    for (double x : kv.numbers("grid.values")) c.grid.push_back(static_cast<std::size_t>(x));
  } else {
    const double start = kv.number("grid.start");
    const double stop = kv.number("grid.stop");
    const double step = kv.number("grid.step");
    if (!(step > 0)) kv.fail(kv.line_of("grid.step"), "step must be positive");
    for (double n = start; n <= stop + 1e-9; n += step) c.grid.push_back(static_cast<std::size_t>(n));
  }

  try {
    c.ensemble = ensemble_kind_from_string(kv.get("ensemble.kind"));
  } catch (const InvalidSpec& e) {
    kv.fail(kv.line_of("ensemble.kind"), e.what());
  }
  const double alpha = kv.number("ensemble.degree_alpha", 0.5);
  if (kv.has("ensemble.degree")) {
    c.explicit_degree = static_cast<int>(kv.number("ensemble.degree"));
  } else if (kv.has("ensemble.degree_c")) {
    c.law = {kv.number("ensemble.degree_c"), alpha};
  } else {
    c.law = DegreeLaw::calibrated(alpha, kv.number("ensemble.calibrate_n", 100),
                                  kv.number("ensemble.calibrate_d", 10));
  }
  if (c.ensemble == EnsembleKind::sbm) {
    c.P = detail::parse_matrix(kv, "ensemble.P");
    if (kv.has("ensemble.pi")) {
      const auto v = kv.numbers("ensemble.pi");
      c.pi = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    } else {
      c.pi = Vector::Constant(c.P.rows(), 1.0 / static_cast<double>(c.P.rows()));
    }
    c.sparsity_c = kv.number("ensemble.sparsity_c");
    c.sparsity_alpha = kv.number("ensemble.sparsity_alpha", 0.5);
  }

  if (c.model == ModelKind::lim) {
    c.lim.alpha = kv.number("params.alpha", c.lim.alpha);
    c.lim.beta = kv.number("params.beta", c.lim.beta);
    c.lim.delta = kv.number("params.delta", c.lim.delta);
    c.lim.rho = kv.number("params.rho", c.lim.rho);
    c.lim.mu = kv.number("params.mu", c.lim.mu);
    c.lim.sigma = kv.number("params.sigma", c.lim.sigma);
    c.lim.sigma_eps = kv.number("params.sigma_eps", c.lim.sigma_eps);
  } else {
    c.lis.alpha = kv.number("params.alpha", c.lis.alpha);
    c.lis.beta = kv.number("params.beta", c.lis.beta);
    c.lis.delta0 = kv.number("params.delta0", c.lis.delta0);
    c.lis.rho0 = kv.number("params.rho0", c.lis.rho0);
    c.lis.mu = kv.number("params.mu", c.lis.mu);
    c.lis.sigma = kv.number("params.sigma", c.lis.sigma);
    c.lis.sigma_eps = kv.number("params.sigma_eps", c.lis.sigma_eps);
  }
  kv.require_all_used();
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  return config_from_kv(KeyValueFile::parse_file(path));
}

inline ExperimentConfig parse_config(const std::string& text) {
  return config_from_kv(KeyValueFile::parse_string(text));
}

// ---------------------------------------------------------------------------
// Running

struct ResultRow {
  std::size_t n = 0;
  int d = 0;
  EstimatorKind estimator = EstimatorKind::ols_lim;
  int replication = 0;
  double delta_err = std::numeric_limits<double>::quiet_NaN();
  double rho_err = std::numeric_limits<double>::quiet_NaN();
  double cond = std::numeric_limits<double>::quiet_NaN();
  Status status = Status::failed;
};

struct SummaryRow {
  std::size_t n = 0;
  int d = 0;
  EstimatorKind estimator = EstimatorKind::ols_lim;
  std::string param;  // "delta" or "rho"
  int reps_ok = 0;
  int failures = 0;
  int unstable = 0;
  double mean = 0.0, sd = 0.0, se = 0.0, lo = 0.0, hi = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<ResultRow> rows;
  std::vector<Estimate> estimates;  // aligned with rows
  std::vector<SummaryRow> summary;
  std::size_t clipped_pairs = 0;
};

// Sample quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct Moments {
  double mean = 0.0, sd = 0.0, se = 0.0;
};

inline Moments sample_moments(const std::vector<double>& v) {
  Moments m;
  if (v.empty()) return m;
  double s = 0.0;
  for (double x : v) s += x;
  m.mean = s / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    m.se = m.sd / std::sqrt(static_cast<double>(v.size()));
  }
  return m;
}

// Seed of replication r at grid point k.
inline std::uint64_t replication_seed(std::uint64_t base, std::size_t k, int r) {
  return split_seed(base, {static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(r)});
}

inline Graph build_graph(const ExperimentConfig& c, std::size_t n, std::uint64_t seed) {
  const int d = c.degree_at(n);
  switch (c.ensemble) {
    case EnsembleKind::erdos_renyi: return gen_erdos_renyi(n, d, seed);
    case EnsembleKind::bipartite_union: return gen_bipartite_union(n, d);
    case EnsembleKind::clique_union: return gen_clique_union(n, d);
    case EnsembleKind::sbm: return gen_sbm(c.P, c.pi, c.sparsity_at(n), n, seed);
    case EnsembleKind::graphon: break;
  }
  throw InvalidSpec("unsupported ensemble in experiment");
}

// One replication: a fresh graph, one dataset, every requested estimator.
inline std::vector<Estimate> run_replication(const ExperimentConfig& c, std::size_t k, int r) {
  const std::size_t n = c.grid[k];
  const std::uint64_t seed = replication_seed(c.seed, k, r);
  const Graph g = build_graph(c, n, split_seed(seed, stream::graph));
  const std::uint64_t data_seed = split_seed(seed, stream::data);
  std::vector<Estimate> out;
  TslsOptions topt;
  topt.pseudo_solve = c.pseudo_solve;
  auto failed = [&](EstimatorKind kind, const std::string& why) {
    Estimate e;
    e.estimator = kind;
    e.status = Status::failed;
    e.message = why;
    e.n = n;
    e.d = g.mean_degree();
    e.seed = data_seed;
    return e;
  };
  if (c.model == ModelKind::lim) {
    const RowNormOp op(g);
    Dataset data;
    try {
      data = simulate_lim(op, c.lim, data_seed);
    } catch (const std::exception& ex) {
      for (auto kind : c.estimators) out.push_back(failed(kind, ex.what()));
      return out;
    }
    for (auto kind : c.estimators) {
      try {
        out.push_back(kind == EstimatorKind::ols_lim ? ols_lim(op, data) : tsls_lim(op, data, topt));
      } catch (const std::exception& ex) {
        out.push_back(failed(kind, ex.what()));
      }
    }
  } else {
    try {
      const Dataset data = simulate_lis(g, c.lis, data_seed);
      out.push_back(tsls_lis(g, data, topt));
    } catch (const std::exception& ex) {
      out.push_back(failed(EstimatorKind::tsls_lis, ex.what()));
    }
  }
  return out;
}

inline std::vector<SummaryRow> summarize(const ExperimentConfig& c, const std::vector<ResultRow>& rows) {
  std::vector<SummaryRow> out;
  std::map<std::pair<std::size_t, int>, std::vector<const ResultRow*>> groups;
  for (const auto& r : rows) groups[{r.n, static_cast<int>(r.estimator)}].push_back(&r);
  for (const auto& [key, members] : groups) {
    for (const char* param : {"delta", "rho"}) {
      SummaryRow s;
      s.n = key.first;
      s.estimator = static_cast<EstimatorKind>(key.second);
      s.d = c.degree_at(s.n);
      s.param = param;
      std::vector<double> v;
      for (const ResultRow* r : members) {
        const bool ok = r->status == Status::ok || r->status == Status::unstable;
        const double x = std::string(param) == "delta" ? r->delta_err : r->rho_err;
        if (r->status == Status::unstable || r->status == Status::singular) ++s.unstable;
        if (ok && std::isfinite(x)) {
          v.push_back(x);
        } else {
          ++s.failures;
        }
      }
      s.reps_ok = static_cast<int>(v.size());
      const Moments m = sample_moments(v);
      s.mean = m.mean;
      s.sd = m.sd;
      s.se = m.se;
      s.lo = quantile(v, 0.025);
      s.hi = quantile(v, 0.975);
      out.push_back(s);
    }
  }
  return out;
}

// Grid points x replications on a worker pool. Output order does not depend
// on scheduling: rows are sorted by (n, estimator, replication).
inline ExperimentResult run_experiment(const ExperimentConfig& c) {
  c.validate();
  struct Task {
    std::size_t k;
    int r;
  };
  std::vector<Task> tasks;
  for (std::size_t k = 0; k < c.grid.size(); ++k)
    for (int r = 0; r < c.replications; ++r) tasks.push_back({k, r});
  std::vector<std::vector<Estimate>> results(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        results[i] = run_replication(c, tasks[i].k, tasks[i].r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  unsigned nthreads = c.threads > 0 ? static_cast<unsigned>(c.threads)
                                    : std::max(1u, std::thread::hardware_concurrency());
  nthreads = std::min<unsigned>(nthreads, static_cast<unsigned>(std::max<std::size_t>(1, tasks.size())));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  ExperimentResult res;
  res.config = c;
  struct Keyed {
    ResultRow row;
    Estimate est;
  };
  std::vector<Keyed> all;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    for (const Estimate& e : results[i]) {
      ResultRow row;
      row.n = c.grid[tasks[i].k];
      row.d = c.degree_at(row.n);
      row.estimator = e.estimator;
      row.replication = tasks[i].r;
      row.cond = e.cond;
      row.status = e.status;
      if (e.usable()) {
        const double delta = c.model == ModelKind::lim ? c.lim.delta : c.lis.delta0;
        const double rho = c.model == ModelKind::lim ? c.lim.rho : c.lis.rho0;
        row.delta_err = e.delta() - delta;
        row.rho_err = e.rho() - rho;
      }
      all.push_back({row, e});
    }
  }
  std::stable_sort(all.begin(), all.end(), [](const Keyed& a, const Keyed& b) {
    if (a.row.n != b.row.n) return a.row.n < b.row.n;
    if (a.row.estimator != b.row.estimator) return a.row.estimator < b.row.estimator;
    return a.row.replication < b.row.replication;
  });
  for (auto& k : all) {
    res.rows.push_back(k.row);
    res.estimates.push_back(std::move(k.est));
  }
  res.summary = summarize(c, res.rows);
  return res;
}

// ---------------------------------------------------------------------------
// CSV output

inline std::string fmt(double x) {
  std::ostringstream s;
  s << std::setprecision(17) << x;
  return s.str();
}

inline void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << "n,d,estimator,replication,delta_err,rho_err,cond,status\n";
  for (const auto& r : rows)
    os << r.n << ',' << r.d << ',' << to_string(r.estimator) << ',' << r.replication << ','
       << fmt(r.delta_err) << ',' << fmt(r.rho_err) << ',' << fmt(r.cond) << ','
       << to_string(r.status) << '\n';
}

inline void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << "n,d,estimator,param,reps_ok,failures,unstable,mean,sd,se,lo,hi\n";
  for (const auto& s : rows)
    os << s.n << ',' << s.d << ',' << to_string(s.estimator) << ',' << s.param << ',' << s.reps_ok
       << ',' << s.failures << ',' << s.unstable << ',' << fmt(s.mean) << ',' << fmt(s.sd) << ','
       << fmt(s.se) << ',' << fmt(s.lo) << ',' << fmt(s.hi) << '\n';
}

// results.csv, estimates.csv and summary.csv under dir.
inline void write_experiment(const ExperimentResult& res, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw FormatError("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("results.csv");
    write_results_csv(f, res.rows);
  }
  {
    auto f = open("estimates.csv");
    write_estimate_header(f);
    for (const auto& e : res.estimates) write_estimate_row(f, e);
  }
  {
    auto f = open("summary.csv");
    write_summary_csv(f, res.summary);
  }
}

}  // namespace peerfx
