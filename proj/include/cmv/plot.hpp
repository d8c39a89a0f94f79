#pragma once

// Standalone SVG rendering of the log-log convergence figure: scatter of
// mean e_N against N, the fitted line, and a slope -1 reference guide.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cmv/diagnostics.hpp"

namespace cmv {

namespace detail {

inline std::string fmt(const char* spec, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace detail

/// Renders (N, mean error) points on log-log axes to a standalone SVG file.
inline void render_plot(const std::vector<std::pair<double, double>>& points,
                        const std::string& path) {
  if (points.size() < 2) throw std::invalid_argument("render_plot: need >= 2 points");
  std::vector<double> ns, es;
  for (const auto& [n, e] : points) {
    if (!(n > 0.0) || !(e > 0.0))
      throw std::invalid_argument("render_plot: log-log plot needs positive values");
    ns.push_back(n);
    es.push_back(e);
  }
  const SlopeFit fit = fit_slope(ns, es);  // also rejects < 2 distinct N

  std::vector<double> lx(ns.size()), ly(ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) {
    lx[i] = std::log10(ns[i]);
    ly[i] = std::log10(es[i]);
  }
  const double lx0 = *std::min_element(lx.begin(), lx.end());
  const double lx1 = *std::max_element(lx.begin(), lx.end());
  double cx = 0.0, cy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    cx += lx[i];
    cy += ly[i];
  }
  cx /= static_cast<double>(lx.size());
  cy /= static_cast<double>(lx.size());

  // log10 ordinates of the fitted line and the slope -1 guide at an abscissa
  const auto fit_at = [&](double x) { return fit.intercept / std::log(10.0) + fit.slope * x; };
  const auto guide_at = [&](double x) { return cy - (x - cx); };

  double ly0 = *std::min_element(ly.begin(), ly.end());
  double ly1 = *std::max_element(ly.begin(), ly.end());
  for (const double x : {lx0, lx1}) {
    ly0 = std::min({ly0, fit_at(x), guide_at(x)});
    ly1 = std::max({ly1, fit_at(x), guide_at(x)});
  }
  if (ly1 == ly0) {
    ly0 -= 0.5;
    ly1 += 0.5;
  }
  const double pad = 0.05 * (ly1 - ly0);
  ly0 -= pad;
  ly1 += pad;

  const double W = 640, H = 480, ML = 70, MR = 25, MT = 40, MB = 55;
  const auto sx = [&](double x) { return ML + (x - lx0) / (lx1 - lx0) * (W - ML - MR); };
  const auto sy = [&](double y) { return H - MB - (y - ly0) / (ly1 - ly0) * (H - MT - MB); };
  const auto px = [&](double v) { return detail::fmt("%.2f", v); };

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
         "viewBox=\"0 0 640 480\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"480\" fill=\"white\"/>\n";
  svg += "<rect x=\"" + px(ML) + "\" y=\"" + px(MT) + "\" width=\"" + px(W - ML - MR) +
         "\" height=\"" + px(H - MT - MB) + "\" fill=\"none\" stroke=\"black\"/>\n";
  svg += "<text x=\"" + px(W / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">mean "
         "e_N vs N (log-log)</text>\n";

  for (std::size_t i = 0; i < lx.size(); ++i) {
    const std::string x = px(sx(lx[i]));
    svg += "<line x1=\"" + x + "\" y1=\"" + px(H - MB) + "\" x2=\"" + x + "\" y2=\"" +
           px(H - MB + 5) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + x + "\" y=\"" + px(H - MB + 18) + "\" text-anchor=\"middle\">" +
           detail::fmt("%.0f", ns[i]) + "</text>\n";
  }
  svg += "<text x=\"" + px(W / 2) + "\" y=\"" + px(H - 12) +
         "\" text-anchor=\"middle\">N</text>\n";

  for (int dec = static_cast<int>(std::ceil(ly0)); dec <= static_cast<int>(std::floor(ly1));
       ++dec) {
    const std::string y = px(sy(static_cast<double>(dec)));
    svg += "<line x1=\"" + px(ML - 5) + "\" y1=\"" + y + "\" x2=\"" + px(ML) + "\" y2=\"" + y +
           "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + px(ML - 8) + "\" y=\"" + y +
           "\" text-anchor=\"end\" dominant-baseline=\"middle\">1e" + std::to_string(dec) +
           "</text>\n";
  }
  svg += "<text x=\"16\" y=\"" + px(H / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 "
         "16 " + px(H / 2) + ")\">mean e_N</text>\n";

  svg += "<line x1=\"" + px(sx(lx0)) + "\" y1=\"" + px(sy(guide_at(lx0))) + "\" x2=\"" +
         px(sx(lx1)) + "\" y2=\"" + px(sy(guide_at(lx1))) +
         "\" stroke=\"#888888\" stroke-dasharray=\"6 4\"/>\n";
  svg += "<line x1=\"" + px(sx(lx0)) + "\" y1=\"" + px(sy(fit_at(lx0))) + "\" x2=\"" +
         px(sx(lx1)) + "\" y2=\"" + px(sy(fit_at(lx1))) + "\" stroke=\"#d62728\" "
         "stroke-width=\"1.5\"/>\n";

  for (std::size_t i = 0; i < lx.size(); ++i) {
    svg += "<circle cx=\"" + px(sx(lx[i])) + "\" cy=\"" + px(sy(ly[i])) +
           "\" r=\"4\" fill=\"#1f77b4\"/>\n";
  }

  svg += "<text x=\"" + px(W - MR - 8) + "\" y=\"" + px(MT + 18) +
         "\" text-anchor=\"end\" fill=\"#d62728\">fit slope " + detail::fmt("%.2f", fit.slope) +
         "</text>\n";
  svg += "<text x=\"" + px(W - MR - 8) + "\" y=\"" + px(MT + 34) +
         "\" text-anchor=\"end\" fill=\"#888888\">reference slope -1.00</text>\n";
  svg += "</svg>\n";

  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("render_plot: cannot open " + path);
  f << svg;
  if (!f) throw std::runtime_error("render_plot: failed writing " + path);
}

}  // namespace cmv
