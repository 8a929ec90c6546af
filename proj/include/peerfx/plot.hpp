#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "peerfx/errors.hpp"

namespace peerfx {

// Minimal CSV table: header row, comma separated, no quoting.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  static CsvTable read(std::istream& is, const std::string& source = "<csv>") {
    CsvTable t;
    std::string line;
    std::size_t no = 0;
    auto split = [](const std::string& s) {
      std::vector<std::string> out;
      std::string cur;
      std::istringstream ls(s);
      while (std::getline(ls, cur, ',')) {
        if (!cur.empty() && cur.back() == '\r') cur.pop_back();
        out.push_back(cur);
      }
      if (!s.empty() && s.back() == ',') out.emplace_back();
      return out;
    };
    while (std::getline(is, line)) {
      ++no;
      if (line.empty() || line == "\r") continue;
      auto cells = split(line);
      if (t.header.empty()) {
        t.header = cells;
        continue;
      }
      if (cells.size() != t.header.size())
        throw FormatError(source + ":" + std::to_string(no) + ": expected " +
                          std::to_string(t.header.size()) + " fields, got " +
                          std::to_string(cells.size()));
      t.rows.push_back(std::move(cells));
    }
    if (t.header.empty()) throw FormatError(source + ": empty CSV");
    return t;
  }

  static CsvTable read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path + "'");
    return read(in, path);
  }

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw FormatError("missing column '" + name + "'");
  }
};

namespace detail {

inline std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

inline std::string tick_label(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", std::abs(x) < 1e-12 ? 0.0 : x);
  return buf;
}

struct Series {
  std::vector<double> n, mean, lo, hi;
  bool band = false;
};

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
  return colors[i % 6];
}

}  // namespace detail

// One SVG for a single parameter: mean error line per estimator, shaded
// 2.5-97.5 percentile band when there is more than one replication, and a
// dashed zero line.
inline std::string render_svg(const std::map<std::string, detail::Series>& series,
                              const std::string& title) {
  const double W = 640, H = 420, L = 70, R = 20, T = 40, B = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 0.0, ymax = 0.0;
  for (const auto& [name, s] : series) {
    for (std::size_t i = 0; i < s.n.size(); ++i) {
      xmin = std::min(xmin, s.n[i]);
      xmax = std::max(xmax, s.n[i]);
      for (double y : {s.mean[i], s.lo[i], s.hi[i]}) {
        if (!std::isfinite(y)) continue;
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
    }
  }
  if (!(xmax > xmin)) {
    xmin -= 1;
    xmax += 1;
  }
  if (!(ymax > ymin)) {
    ymin -= 1;
    ymax += 1;
  }
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double y) { return T + (ymax - y) / (ymax - ymin) * (H - T - B); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"15\">"
    << title << "</text>\n";
  // axes
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 5.0;
    const double yv = ymin + (ymax - ymin) * i / 5.0;
    o << "<text x=\"" << detail::num(px(xv)) << "\" y=\"" << H - B + 18
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
      << detail::tick_label(xv) << "</text>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << detail::num(py(yv) + 4)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << detail::tick_label(yv) << "</text>\n";
  }
  o << "<text x=\"" << W / 2 << "\" y=\"" << H - 12
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">n</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << detail::num(py(0)) << "\" x2=\"" << W - R << "\" y2=\""
    << detail::num(py(0)) << "\" stroke=\"black\" stroke-dasharray=\"5,4\"/>\n";

  std::size_t idx = 0;
  for (const auto& [name, s] : series) {
    const char* col = detail::palette(idx);
    if (s.band && s.n.size() > 0) {
      o << "<polygon fill=\"" << col << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < s.n.size(); ++i)
        o << detail::num(px(s.n[i])) << ',' << detail::num(py(s.hi[i])) << ' ';
      for (std::size_t i = s.n.size(); i-- > 0;)
        o << detail::num(px(s.n[i])) << ',' << detail::num(py(s.lo[i])) << ' ';
      o << "\"/>\n";
    }
    o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.n.size(); ++i)
      o << detail::num(px(s.n[i])) << ',' << detail::num(py(s.mean[i])) << ' ';
    o << "\"/>\n";
    const double ly = T + 16 + 18 * static_cast<double>(idx);
    o << "<line x1=\"" << W - R - 150 << "\" y1=\"" << ly << "\" x2=\"" << W - R - 126 << "\" y2=\""
      << ly << "\" stroke=\"" << col << "\" stroke-width=\"2\"/>\n";
    o << "<text class=\"legend\" x=\"" << W - R - 120 << "\" y=\"" << ly + 4
      << "\" font-family=\"sans-serif\" font-size=\"12\">" << name << "</text>\n";
    ++idx;
  }
  o << "</svg>\n";
  return o.str();
}

// Reads a summary table and writes <prefix>_<param>.svg for every parameter
// present. Returns the written paths.
inline std::vector<std::string> plot_summary(const CsvTable& t, const std::string& prefix) {
  const auto cn = t.column("n");
  const auto ce = t.column("estimator");
  const auto cp = t.column("param");
  const auto cm = t.column("mean");
  const auto cl = t.column("lo");
  const auto ch = t.column("hi");
  const auto cr = t.column("reps_ok");
  std::map<std::string, std::map<std::string, detail::Series>> by_param;
  for (const auto& row : t.rows) {
    auto& s = by_param[row[cp]][row[ce]];
    try {
      s.n.push_back(std::stod(row[cn]));
      s.mean.push_back(std::stod(row[cm]));
      s.lo.push_back(std::stod(row[cl]));
      s.hi.push_back(std::stod(row[ch]));
      if (std::stoi(row[cr]) > 1) s.band = true;
    } catch (const std::exception&) {
      throw FormatError("non-numeric value in summary row");
    }
  }
  std::vector<std::string> written;
  for (const auto& [param, series] : by_param) {
    const std::string path = prefix + "_" + param + ".svg";
    if (auto parent = std::filesystem::path(path).parent_path(); !parent.empty())
      std::filesystem::create_directories(parent);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot write '" + path + "'");
    f << render_svg(series, "error in " + param);
    written.push_back(path);
  }
  return written;
}

}  // namespace peerfx
