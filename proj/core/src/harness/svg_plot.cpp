#include "fairmarl/harness/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace fairmarl {

double quantile_of(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile level outside [0, 1]");
  std::sort(values.begin(), values.end());
  double pos = q * static_cast<double>(values.size() - 1);
  std::size_t lo = static_cast<std::size_t>(pos);
  double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] * (1.0 - frac) + values[lo + 1] * frac;
}

double median_of(std::vector<double> values) { return quantile_of(std::move(values), 0.5); }

BoxStats box_stats(const std::string& label, const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("boxplot of an empty sample");
  BoxStats b;
  b.label = label;
  b.lo = *std::min_element(values.begin(), values.end());
  b.hi = *std::max_element(values.begin(), values.end());
  b.q1 = quantile_of(values, 0.25);
  b.med = quantile_of(values, 0.5);
  b.q3 = quantile_of(values, 0.75);
  return b;
}

void mark_nondominated(std::vector<ParetoPoint>& points) {
  for (auto& p : points) {
    p.nondominated = true;
    for (const auto& q : points) {
      bool better_or_equal = q.disparity <= p.disparity && q.mean_reward >= p.mean_reward;
      bool strictly_better = q.disparity < p.disparity || q.mean_reward > p.mean_reward;
      if (better_or_equal && strictly_better) {
        p.nondominated = false;
        break;
      }
    }
  }
}

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};
constexpr int kPaletteSize = 8;

std::string fnum(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&')
      out += "&amp;";
    else if (c == '<')
      out += "&lt;";
    else if (c == '>')
      out += "&gt;";
    else
      out += c;
  }
  return out;
}

struct Range {
  double lo = 0.0;
  double hi = 1.0;

  void expand(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (hi <= lo) {
      lo -= 0.5;
      hi += 0.5;
    } else {
      double m = 0.05 * (hi - lo);
      lo -= m;
      hi += m;
    }
  }
};

struct Frame {
  double x0, y0, w, h;  // plot area in canvas coordinates
  Range xr, yr;

  double px(double x) const { return x0 + (x - xr.lo) / (xr.hi - xr.lo) * w; }
  double py(double y) const { return y0 + h - (y - yr.lo) / (yr.hi - yr.lo) * h; }
};

void draw_axes(std::ostringstream& svg, const Frame& f, const std::string& x_label,
               const std::string& y_label, bool x_ticks) {
  svg << "<rect x='" << fnum(f.x0) << "' y='" << fnum(f.y0) << "' width='" << fnum(f.w)
      << "' height='" << fnum(f.h) << "' fill='none' stroke='#333333'/>\n";
  for (int i = 0; i <= 4; ++i) {
    double ty = f.yr.lo + (f.yr.hi - f.yr.lo) * i / 4.0;
    double y = f.py(ty);
    svg << "<line x1='" << fnum(f.x0 - 4) << "' y1='" << fnum(y) << "' x2='" << fnum(f.x0)
        << "' y2='" << fnum(y) << "' stroke='#333333'/>\n";
    svg << "<text x='" << fnum(f.x0 - 8) << "' y='" << fnum(y + 3)
        << "' font-size='10' text-anchor='end'>" << tick_label(ty) << "</text>\n";
    if (x_ticks) {
      double tx = f.xr.lo + (f.xr.hi - f.xr.lo) * i / 4.0;
      double x = f.px(tx);
      svg << "<line x1='" << fnum(x) << "' y1='" << fnum(f.y0 + f.h) << "' x2='" << fnum(x)
          << "' y2='" << fnum(f.y0 + f.h + 4) << "' stroke='#333333'/>\n";
      svg << "<text x='" << fnum(x) << "' y='" << fnum(f.y0 + f.h + 16)
          << "' font-size='10' text-anchor='middle'>" << tick_label(tx) << "</text>\n";
    }
  }
  svg << "<text x='" << fnum(f.x0 + f.w / 2) << "' y='" << fnum(f.y0 + f.h + 32)
      << "' font-size='11' text-anchor='middle'>" << escape(x_label) << "</text>\n";
  svg << "<text x='14' y='" << fnum(f.y0 + f.h / 2)
      << "' font-size='11' text-anchor='middle' transform='rotate(-90 14 "
      << fnum(f.y0 + f.h / 2) << ")'>" << escape(y_label) << "</text>\n";
}

std::string svg_open(double w, double h, const std::string& title) {
  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << fnum(w) << "' height='" << fnum(h)
      << "' viewBox='0 0 " << fnum(w) << " " << fnum(h) << "'>\n";
  svg << "<rect width='" << fnum(w) << "' height='" << fnum(h) << "' fill='#ffffff'/>\n";
  svg << "<text x='" << fnum(w / 2) << "' y='20' font-size='13' text-anchor='middle'>"
      << escape(title) << "</text>\n";
  return svg.str();
}

}  // namespace

std::string svg_line_chart(const std::vector<SvgSeries>& series, const std::string& title,
                           const std::string& x_label, const std::string& y_label) {
  if (series.empty()) throw std::invalid_argument("no series to plot");
  double width = 760, height = 420;
  Frame f{60, 36, width - 60 - 190, height - 36 - 56, {}, {}};
  bool have = false;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("series length mismatch");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!have) {
        f.xr = Range{s.x[i], s.x[i]};
        f.yr = Range{s.y[i], s.y[i]};
        have = true;
      }
      f.xr.expand(s.x[i]);
      f.yr.expand(s.y[i]);
    }
  }
  if (!have) throw std::invalid_argument("all series are empty");
  f.xr.pad();
  f.yr.pad();

  std::ostringstream svg;
  svg << svg_open(width, height, title);
  draw_axes(svg, f, x_label, y_label, true);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kPalette[k % kPaletteSize];
    svg << "<polyline fill='none' stroke='" << color << "' stroke-width='1.3' points='";
    for (std::size_t i = 0; i < series[k].x.size(); ++i) {
      if (i) svg << ' ';
      svg << fnum(f.px(series[k].x[i])) << ',' << fnum(f.py(series[k].y[i]));
    }
    svg << "'/>\n";
    double ly = 40 + 14 * static_cast<double>(k);
    svg << "<line x1='" << fnum(f.x0 + f.w + 12) << "' y1='" << fnum(ly) << "' x2='"
        << fnum(f.x0 + f.w + 30) << "' y2='" << fnum(ly) << "' stroke='" << color
        << "' stroke-width='2'/>\n";
    svg << "<text x='" << fnum(f.x0 + f.w + 34) << "' y='" << fnum(ly + 3)
        << "' font-size='10'>" << escape(series[k].label) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string svg_boxplot(const std::vector<BoxStats>& boxes, const std::string& title,
                        const std::string& y_label) {
  if (boxes.empty()) throw std::invalid_argument("no boxes to plot");
  double width = std::max(360.0, 120.0 + 70.0 * static_cast<double>(boxes.size()));
  double height = 420;
  Frame f{60, 36, width - 60 - 30, height - 36 - 70, {}, {}};
  f.yr = Range{boxes.front().lo, boxes.front().lo};
  for (const auto& b : boxes) {
    f.yr.expand(b.lo);
    f.yr.expand(b.hi);
  }
  f.yr.pad();
  f.xr = Range{0.0, static_cast<double>(boxes.size())};

  std::ostringstream svg;
  svg << svg_open(width, height, title);
  draw_axes(svg, f, "", y_label, false);
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    const BoxStats& b = boxes[k];
    double cx = f.px(static_cast<double>(k) + 0.5);
    double half = 0.3 * f.w / static_cast<double>(boxes.size());
    const char* color = kPalette[k % kPaletteSize];
    svg << "<line x1='" << fnum(cx) << "' y1='" << fnum(f.py(b.lo)) << "' x2='" << fnum(cx)
        << "' y2='" << fnum(f.py(b.q1)) << "' stroke='#333333'/>\n";
    svg << "<line x1='" << fnum(cx) << "' y1='" << fnum(f.py(b.q3)) << "' x2='" << fnum(cx)
        << "' y2='" << fnum(f.py(b.hi)) << "' stroke='#333333'/>\n";
    for (double w : {b.lo, b.hi})
      svg << "<line x1='" << fnum(cx - half / 2) << "' y1='" << fnum(f.py(w)) << "' x2='"
          << fnum(cx + half / 2) << "' y2='" << fnum(f.py(w)) << "' stroke='#333333'/>\n";
    svg << "<rect x='" << fnum(cx - half) << "' y='" << fnum(f.py(b.q3)) << "' width='"
        << fnum(2 * half) << "' height='" << fnum(f.py(b.q1) - f.py(b.q3)) << "' fill='" << color
        << "' fill-opacity='0.35' stroke='#333333'/>\n";
    svg << "<line x1='" << fnum(cx - half) << "' y1='" << fnum(f.py(b.med)) << "' x2='"
        << fnum(cx + half) << "' y2='" << fnum(f.py(b.med))
        << "' stroke='#111111' stroke-width='2'/>\n";
    svg << "<text x='" << fnum(cx) << "' y='" << fnum(f.y0 + f.h + 16)
        << "' font-size='9' text-anchor='middle'>" << escape(b.label) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string svg_pareto(const std::vector<ParetoPoint>& points, const std::string& title,
                       const std::string& x_label, const std::string& y_label) {
  if (points.empty()) throw std::invalid_argument("no points to plot");
  double width = 640, height = 420;
  Frame f{60, 36, width - 60 - 40, height - 36 - 56, {}, {}};
  f.xr = Range{points.front().disparity, points.front().disparity};
  f.yr = Range{points.front().mean_reward, points.front().mean_reward};
  for (const auto& p : points) {
    f.xr.expand(p.disparity);
    f.yr.expand(p.mean_reward);
  }
  f.xr.pad();
  f.yr.pad();

  std::ostringstream svg;
  svg << svg_open(width, height, title);
  draw_axes(svg, f, x_label, y_label, true);

  std::vector<ParetoPoint> front;
  for (const auto& p : points)
    if (p.nondominated) front.push_back(p);
  std::sort(front.begin(), front.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
    if (a.disparity != b.disparity) return a.disparity < b.disparity;
    return a.mean_reward < b.mean_reward;
  });
  if (front.size() > 1) {
    svg << "<polyline fill='none' stroke='#d62728' stroke-width='1.2' stroke-dasharray='4 3' "
           "points='";
    for (std::size_t i = 0; i < front.size(); ++i) {
      if (i) svg << ' ';
      svg << fnum(f.px(front[i].disparity)) << ',' << fnum(f.py(front[i].mean_reward));
    }
    svg << "'/>\n";
  }
  for (const auto& p : points) {
    if (p.nondominated) {
      svg << "<circle cx='" << fnum(f.px(p.disparity)) << "' cy='" << fnum(f.py(p.mean_reward))
          << "' r='4' fill='#d62728'/>\n";
      svg << "<text x='" << fnum(f.px(p.disparity) + 6) << "' y='"
          << fnum(f.py(p.mean_reward) - 5) << "' font-size='9'>" << escape(p.label)
          << "</text>\n";
    } else {
      svg << "<circle cx='" << fnum(f.px(p.disparity)) << "' cy='" << fnum(f.py(p.mean_reward))
          << "' r='3' fill='#999999'/>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace fairmarl
