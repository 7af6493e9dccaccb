#pragma once

#include <string>
#include <vector>

namespace fairmarl {

// Small order statistics used by the sweep aggregation and the plots.
double median_of(std::vector<double> values);          // throws on empty input
double quantile_of(std::vector<double> values, double q);  // linear interpolation

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct BoxStats {
  std::string label;
  double lo = 0.0, q1 = 0.0, med = 0.0, q3 = 0.0, hi = 0.0;
};

BoxStats box_stats(const std::string& label, const std::vector<double>& values);

struct ParetoPoint {
  std::string label;
  double disparity = 0.0;    // minimized
  double mean_reward = 0.0;  // maximized
  bool nondominated = false;
};

// Flags every point not dominated by another (lower-or-equal disparity and
// higher-or-equal reward, strict in at least one).
void mark_nondominated(std::vector<ParetoPoint>& points);

// Self-contained SVG documents; identical inputs render identical bytes.
std::string svg_line_chart(const std::vector<SvgSeries>& series, const std::string& title,
                           const std::string& x_label, const std::string& y_label);
std::string svg_boxplot(const std::vector<BoxStats>& boxes, const std::string& title,
                        const std::string& y_label);
std::string svg_pareto(const std::vector<ParetoPoint>& points, const std::string& title,
                       const std::string& x_label, const std::string& y_label);

}  // namespace fairmarl
