// Copyright 2026 The sonalab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "sona/tensor.hpp"

namespace sona {
namespace svg {

inline std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// Evenly spaced hues; deterministic per class index.
inline std::string class_color(int index, int count) {
  const double h = 360.0 * index / std::max(1, count);
  const double s = 0.75, v = 0.85;
  const double c = v * s;
  const double x = c * (1.0 - std::fabs(std::fmod(h / 60.0, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (h < 60) { r = c; g = x; }
  else if (h < 120) { r = x; g = c; }
  else if (h < 180) { g = c; b = x; }
  else if (h < 240) { g = x; b = c; }
  else if (h < 300) { r = x; b = c; }
  else { r = c; b = x; }
  const double m = v - c;
  char buf[12];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(255 * (r + m)),
                static_cast<int>(255 * (g + m)), static_cast<int>(255 * (b + m)));
  return buf;
}

inline std::string method_color(const std::string& method) {
  if (method == "sona") return "#1f77b4";
  if (method == "sona_no_mm") return "#ff7f0e";
  if (method == "pdgan") return "#2ca02c";
  if (method == "san_only") return "#d62728";
  return "#7f7f7f";
}

struct Panel {
  double x0, y0, w, h;        // pixel box
  double xmin, xmax, ymin, ymax;  // data box

  double px(double x) const { return x0 + (x - xmin) / (xmax - xmin) * w; }
  double py(double y) const { return y0 + h - (y - ymin) / (ymax - ymin) * h; }
};

inline void draw_axes(std::string& out, const Panel& p, const std::string& title,
                      const std::string& xlabel, const std::string& ylabel) {
  out += "<rect x='" + num(p.x0) + "' y='" + num(p.y0) + "' width='" + num(p.w) +
         "' height='" + num(p.h) + "' fill='none' stroke='#444' stroke-width='1'/>\n";
  out += "<text x='" + num(p.x0 + p.w / 2) + "' y='" + num(p.y0 - 8) +
         "' text-anchor='middle' font-size='13' font-family='sans-serif'>" + title +
         "</text>\n";
  out += "<text x='" + num(p.x0 + p.w / 2) + "' y='" + num(p.y0 + p.h + 28) +
         "' text-anchor='middle' font-size='11' font-family='sans-serif'>" + xlabel +
         "</text>\n";
  out += "<text x='" + num(p.x0 - 34) + "' y='" + num(p.y0 + p.h / 2) +
         "' text-anchor='middle' font-size='11' font-family='sans-serif' transform='rotate(-90 " +
         num(p.x0 - 34) + " " + num(p.y0 + p.h / 2) + ")'>" + ylabel + "</text>\n";
  // Min/max ticks on both axes.
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "<text x='%s' y='%s' font-size='9' font-family='sans-serif'>%s</text>\n",
                num(p.x0).c_str(), num(p.y0 + p.h + 14).c_str(), num(p.xmin).c_str());
  out += buf;
  std::snprintf(buf, sizeof buf,
                "<text x='%s' y='%s' font-size='9' font-family='sans-serif' "
                "text-anchor='end'>%s</text>\n",
                num(p.x0 + p.w).c_str(), num(p.y0 + p.h + 14).c_str(), num(p.xmax).c_str());
  out += buf;
  std::snprintf(buf, sizeof buf,
                "<text x='%s' y='%s' font-size='9' font-family='sans-serif' "
                "text-anchor='end'>%s</text>\n",
                num(p.x0 - 4).c_str(), num(p.y0 + 4).c_str(), num(p.ymax).c_str());
  out += buf;
  std::snprintf(buf, sizeof buf,
                "<text x='%s' y='%s' font-size='9' font-family='sans-serif' "
                "text-anchor='end'>%s</text>\n",
                num(p.x0 - 4).c_str(), num(p.y0 + p.h).c_str(), num(p.ymin).c_str());
  out += buf;
}

inline std::string document(double width, double height, const std::string& body) {
  return "<svg xmlns='http://www.w3.org/2000/svg' width='" + num(width) + "' height='" +
         num(height) + "' viewBox='0 0 " + num(width) + " " + num(height) + "'>\n" +
         "<rect width='100%' height='100%' fill='white'/>\n" + body + "</svg>\n";
}

/// Side-by-side scatter of ground-truth and generated samples, colored by
/// class, with exactly one legend entry per class. Empty inputs yield a
/// valid figure with a caption.
inline std::string scatter_figure(const Tensor& truth, const std::vector<int>& y_truth,
                                  const Tensor& generated, const std::vector<int>& y_gen,
                                  int class_count) {
  const double panel_w = 320, panel_h = 320;
  const double legend_w = 64.0 * (1 + (class_count > 0 ? (class_count - 1) / 20 : 0)) + 60;
  const double width = 2 * panel_w + legend_w + 90, height = panel_h + 70;

  double lim = 1.0;
  const auto extend = [&lim](const Tensor& t) {
    for (double v : t.values) lim = std::max(lim, std::fabs(v) * 1.1);
  };
  extend(truth);
  extend(generated);

  Panel left{40, 30, panel_w, panel_h, -lim, lim, -lim, lim};
  Panel right{40 + panel_w + 30, 30, panel_w, panel_h, -lim, lim, -lim, lim};

  std::string body;
  draw_axes(body, left, "ground truth", "x1", "x2");
  draw_axes(body, right, "generated", "x1", "x2");

  const auto dots = [&](const Panel& p, const Tensor& x, const std::vector<int>& y) {
    for (int i = 0; i < x.rows; ++i) {
      body += "<circle cx='" + num(p.px(x.at(i, 0))) + "' cy='" + num(p.py(x.at(i, 1))) +
              "' r='2' fill='" + class_color(y[i], class_count) + "' fill-opacity='0.7'/>\n";
    }
  };
  dots(left, truth, y_truth);
  dots(right, generated, y_gen);

  if (truth.rows == 0 && generated.rows == 0)
    body += "<text x='" + num(width / 2) + "' y='" + num(height / 2) +
            "' text-anchor='middle' font-size='16' font-family='sans-serif'>no data</text>\n";

  // Legend wraps into 20-entry columns so large class counts stay inside
  // the canvas.
  const double lx0 = 40 + 2 * panel_w + 60;
  for (int c = 0; c < class_count; ++c) {
    const double lx = lx0 + 58.0 * (c / 20);
    const double ly = 40 + 14.0 * (c % 20);
    body += "<g class='legend-entry'><circle cx='" + num(lx) + "' cy='" + num(ly) +
            "' r='4' fill='" + class_color(c, class_count) + "'/><text x='" + num(lx + 10) +
            "' y='" + num(ly + 4) + "' font-size='10' font-family='sans-serif'>class " +
            std::to_string(c) + "</text></g>\n";
  }
  return document(width, height, body);
}

/// One curve point per (method, N) with a band across seeds.
struct CurvePoint {
  int n = 0;
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};
using CurveSeries = std::map<std::string, std::vector<CurvePoint>>;  // method -> points

inline void draw_series(std::string& out, const Panel& p, const CurveSeries& series) {
  for (const auto& [method, pts] : series) {
    const std::string color = method_color(method);
    if (pts.size() > 1) {
      std::string band = "<polygon fill='" + color + "' fill-opacity='0.15' points='";
      for (const auto& pt : pts) band += num(p.px(pt.n)) + "," + num(p.py(pt.hi)) + " ";
      for (auto it = pts.rbegin(); it != pts.rend(); ++it)
        band += num(p.px(it->n)) + "," + num(p.py(it->lo)) + " ";
      band += "'/>\n";
      out += band;
    }
    std::string line = "<polyline fill='none' stroke='" + color + "' stroke-width='2' points='";
    for (const auto& pt : pts) line += num(p.px(pt.n)) + "," + num(p.py(pt.mean)) + " ";
    line += "'/>\n";
    out += line;
    for (const auto& pt : pts)
      out += "<circle cx='" + num(p.px(pt.n)) + "' cy='" + num(p.py(pt.mean)) +
             "' r='3' fill='" + color + "'/>\n";
  }
}

/// Metric-versus-class-count panels (W2, cW2, NF) with one series per
/// method.
inline std::string curves_figure(const CurveSeries& w2s, const CurveSeries& cw2s,
                                 const CurveSeries& nfs) {
  const double panel_w = 280, panel_h = 240;
  const double width = 3 * (panel_w + 70) + 140, height = panel_h + 80;

  const auto bounds = [](const CurveSeries& s, double* xmin, double* xmax, double* ymax) {
    *xmin = 1e300;
    *xmax = -1e300;
    *ymax = 1e-9;
    for (const auto& [m, pts] : s) {
      for (const auto& pt : pts) {
        *xmin = std::min(*xmin, static_cast<double>(pt.n));
        *xmax = std::max(*xmax, static_cast<double>(pt.n));
        *ymax = std::max(*ymax, pt.hi);
      }
    }
    if (*xmin > *xmax) {
      *xmin = 0;
      *xmax = 1;
    }
    if (*xmin == *xmax) *xmax = *xmin + 1;
  };

  std::string body;
  const char* titles[3] = {"W2", "cW2", "NF"};
  const CurveSeries* all[3] = {&w2s, &cw2s, &nfs};
  bool any = false;
  for (int k = 0; k < 3; ++k) {
    double xmin, xmax, ymax;
    bounds(*all[k], &xmin, &xmax, &ymax);
    Panel p{60 + k * (panel_w + 70), 40, panel_w, panel_h, xmin, xmax, 0.0, ymax * 1.05};
    draw_axes(body, p, titles[k], "classes N", titles[k]);
    draw_series(body, p, *all[k]);
    for (const auto& [m, pts] : *all[k]) any = any || !pts.empty();
  }

  double ly = 44;
  const double lx = 3 * (panel_w + 70) + 70;
  for (const auto& [method, pts] : w2s) {
    body += "<g class='legend-entry'><rect x='" + num(lx) + "' y='" + num(ly - 8) +
            "' width='14' height='4' fill='" + method_color(method) + "'/><text x='" +
            num(lx + 20) + "' y='" + num(ly) + "' font-size='11' font-family='sans-serif'>" +
            method + "</text></g>\n";
    ly += 16;
  }
  if (!any)
    body += "<text x='" + num(width / 2) + "' y='" + num(height / 2) +
            "' text-anchor='middle' font-size='16' font-family='sans-serif'>no data</text>\n";
  return document(width, height, body);
}

}  // namespace svg
}  // namespace sona
