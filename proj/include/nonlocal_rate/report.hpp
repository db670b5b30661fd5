#pragma once

// Tables, CSV / JSON output and self-contained SVG line plots.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace nonlocal_rate {

/// Shortest round-trip-safe text for a double ("nan" / "inf" spelled out).
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  if (std::strtod(buf, nullptr) != v) std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using Cell = std::variant<double, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw std::logic_error("table row has the wrong number of cells");
    rows.push_back(std::move(row));
  }

  std::vector<double> column(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw std::out_of_range("no column '" + name + "'");
    const auto k = static_cast<std::size_t>(it - columns.begin());
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(std::holds_alternative<double>(r[k]) ? std::get<double>(r[k]) : NAN);
    return out;
  }

  std::string to_csv() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
    out << '\n';
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        out << (i ? "," : "");
        if (const auto* d = std::get_if<double>(&r[i]))
          out << format_number(*d);
        else
          out << std::get<std::string>(r[i]);
      }
      out << '\n';
    }
    return out.str();
  }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) {
      nlohmann::json obj = nlohmann::json::object();
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (const auto* d = std::get_if<double>(&r[i]))
          obj[columns[i]] = std::isfinite(*d) ? nlohmann::json(*d) : nlohmann::json(format_number(*d));
        else
          obj[columns[i]] = std::get<std::string>(r[i]);
      }
      arr.push_back(obj);
    }
    return arr;
  }
};

struct Series {
  std::string name;
  std::vector<double> x, y;
};

struct Plot {
  std::string title;
  std::string x_label, y_label;
  bool log_x = false, log_y = false;
  std::vector<Series> series;
};

/// Axes, ticks, one polyline with markers per series and a legend.
inline std::string render_svg(const Plot& plot) {
  constexpr double W = 640, H = 440, L = 80, R = 160, T = 40, B = 60;
  auto tx = [&](double v) { return plot.log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return plot.log_y ? std::log10(std::abs(v)) : v; };
  auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!plot.log_x || x > 0) && (!plot.log_y || y != 0);
  };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : plot.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double px = 0.05 * (x1 - x0), py = 0.05 * (y1 - y0);
  x0 -= px, x1 += px, y0 -= py, y1 += py;
  auto X = [&](double v) { return L + (W - L - R) * (v - x0) / (x1 - x0); };
  auto Y = [&](double v) { return H - B - (H - T - B) * (v - y0) / (y1 - y0); };
  auto num = [](double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.2f", v);
    return std::string(b);
  };
  auto label = [](double v, bool log) {
    char b[32];
    std::snprintf(b, sizeof b, "%.3g", log ? std::pow(10.0, v) : v);
    return std::string(b);
  };
  auto esc = [](const std::string& s) {
    std::string o;
    for (char c : s) {
      if (c == '<') o += "&lt;";
      else if (c == '>') o += "&gt;";
      else if (c == '&') o += "&amp;";
      else o += c;
    }
    return o;
  };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << num(W / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << esc(plot.title)
    << "</text>\n";
  o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double vx = x0 + (x1 - x0) * k / 4.0, vy = y0 + (y1 - y0) * k / 4.0;
    o << "<line x1=\"" << num(X(vx)) << "\" y1=\"" << H - B << "\" x2=\"" << num(X(vx)) << "\" y2=\"" << H - B + 5
      << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << num(X(vx)) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">"
      << label(vx, plot.log_x) << "</text>\n";
    o << "<line x1=\"" << L - 5 << "\" y1=\"" << num(Y(vy)) << "\" x2=\"" << L << "\" y2=\"" << num(Y(vy))
      << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << L - 8 << "\" y=\"" << num(Y(vy) + 4) << "\" text-anchor=\"end\">" << label(vy, plot.log_y)
      << "</text>\n";
  }
  o << "<text x=\"" << num(L + (W - L - R) / 2) << "\" y=\"" << H - 18 << "\" text-anchor=\"middle\">"
    << esc(plot.x_label) << (plot.log_x ? " (log)" : "") << "</text>\n";
  o << "<text x=\"18\" y=\"" << num(T + (H - T - B) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
    << num(T + (H - T - B) / 2) << ")\">" << esc(plot.y_label) << (plot.log_y ? " (log)" : "") << "</text>\n";
  for (std::size_t s = 0; s < plot.series.size(); ++s) {
    const auto& ser = plot.series[s];
    const char* col = colors[s % 6];
    std::string pts;
    for (std::size_t i = 0; i < ser.x.size(); ++i) {
      if (!usable(ser.x[i], ser.y[i])) continue;
      pts += num(X(tx(ser.x[i]))) + "," + num(Y(ty(ser.y[i]))) + " ";
      o << "<circle cx=\"" << num(X(tx(ser.x[i]))) << "\" cy=\"" << num(Y(ty(ser.y[i]))) << "\" r=\"3\" fill=\""
        << col << "\"/>\n";
    }
    if (!pts.empty())
      o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"" << pts << "\"/>\n";
    const double ly = T + 16 + 18 * s;
    o << "<line x1=\"" << W - R + 12 << "\" y1=\"" << num(ly) << "\" x2=\"" << W - R + 32 << "\" y2=\"" << num(ly)
      << "\" stroke=\"" << col << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << W - R + 38 << "\" y=\"" << num(ly + 4) << "\">" << esc(ser.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("error writing " + path.string());
}

}  // namespace nonlocal_rate
