#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace qdbh::svg {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
  bool line = true;
  bool markers = true;
};

/// Minimal line/marker plot written straight to SVG.
struct Plot {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool log_x = false;
  bool log_y = false;
  std::vector<Series> series;
  std::optional<double> vline;  ///< e.g. the crossing point
  std::string vline_label;
  int width = 640;
  int height = 440;

  std::string render() const {
    const double ml = 70, mr = 150, mt = 40, mb = 55;
    const double pw = width - ml - mr, ph = height - mt - mb;
    auto tx = [&](double x) { return log_x ? std::log10(x) : x; };
    auto ty = [&](double y) { return log_y ? std::log10(y) : y; };
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series)
      for (auto [x, y] : s.points) {
        if ((log_x && x <= 0) || (log_y && y <= 0) || !std::isfinite(x) || !std::isfinite(y)) continue;
        x0 = std::min(x0, tx(x));
        x1 = std::max(x1, tx(x));
        y0 = std::min(y0, ty(y));
        y1 = std::max(y1, ty(y));
      }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    const double padx = 0.03 * (x1 - x0), pady = 0.05 * (y1 - y0);
    x0 -= padx, x1 += padx, y0 -= pady, y1 += pady;
    auto px = [&](double x) { return ml + (tx(x) - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return mt + ph - (ty(y) - y0) / (y1 - y0) * ph; };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
    std::string o;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" font-family=\"sans-serif\" "
                  "font-size=\"12\">\n<rect width=\"100%%\" height=\"100%%\" fill=\"white\"/>\n",
                  width, height);
    o += buf;
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" stroke=\"black\"/>\n", ml,
                  mt, pw, ph);
    o += buf;
    for (int k = 0; k <= 5; ++k) {
      const double fx = x0 + (x1 - x0) * k / 5.0, fy = y0 + (y1 - y0) * k / 5.0;
      const double vx = log_x ? std::pow(10.0, fx) : fx, vy = log_y ? std::pow(10.0, fy) : fy;
      std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%.3g</text>\n",
                    ml + pw * k / 5.0, mt + ph + 18, vx);
      o += buf;
      std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.3g</text>\n", ml - 6,
                    mt + ph - ph * k / 5.0 + 4, vy);
      o += buf;
    }
    o += "<text x=\"" + std::to_string(ml + pw / 2) + "\" y=\"" + std::to_string(height - 12) +
         "\" text-anchor=\"middle\">" + escape(xlabel) + "</text>\n";
    o += "<text x=\"18\" y=\"" + std::to_string(mt + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         std::to_string(mt + ph / 2) + ")\">" + escape(ylabel) + "</text>\n";
    o += "<text x=\"" + std::to_string(ml + pw / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" +
         escape(title) + "</text>\n";
    if (vline && (!log_x || *vline > 0)) {
      std::snprintf(buf, sizeof buf,
                    "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n",
                    px(*vline), mt, px(*vline), mt + ph);
      o += buf;
      if (!vline_label.empty()) {
        std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" fill=\"gray\">", px(*vline) + 4, mt + 14);
        o += buf + escape(vline_label) + "</text>\n";
      }
    }
    for (std::size_t si = 0; si < series.size(); ++si) {
      const auto& s = series[si];
      const char* c = colors[si % 7];
      std::string path;
      for (auto [x, y] : s.points) {
        if ((log_x && x <= 0) || (log_y && y <= 0) || !std::isfinite(x) || !std::isfinite(y)) continue;
        std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", path.empty() ? "" : " ", px(x), py(y));
        path += buf;
      }
      if (s.line && !path.empty())
        o += "<polyline fill=\"none\" stroke=\"" + std::string(c) + "\" stroke-width=\"1.5\" points=\"" + path + "\"/>\n";
      if (s.markers)
        for (auto [x, y] : s.points) {
          if ((log_x && x <= 0) || (log_y && y <= 0) || !std::isfinite(x) || !std::isfinite(y)) continue;
          std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"%s\"/>\n", px(x), py(y), c);
          o += buf;
        }
      std::snprintf(buf, sizeof buf,
                    "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"%s\" stroke-width=\"2\"/>\n",
                    ml + pw + 12, mt + 14 + 18.0 * si, ml + pw + 32, mt + 14 + 18.0 * si, c);
      o += buf;
      std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\">", ml + pw + 38, mt + 18 + 18.0 * si);
      o += buf + escape(s.name) + "</text>\n";
    }
    o += "</svg>\n";
    return o;
  }

  void write(const std::string& path) const {
    std::ofstream out(path);
    out << render();
  }

  static std::string escape(const std::string& s) {
    std::string o;
    for (char ch : s) {
      if (ch == '<') o += "&lt;";
      else if (ch == '>') o += "&gt;";
      else if (ch == '&') o += "&amp;";
      else o += ch;
    }
    return o;
  }
};

}  // namespace qdbh::svg
