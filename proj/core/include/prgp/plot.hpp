#pragma once

#include <string>
#include <utility>
#include <vector>

#include "prgp/evaluation.hpp"
#include "prgp/train.hpp"

namespace prgp {

// Least-squares trend line over paired data: (slope, intercept).
std::pair<double, double> least_squares_line(const std::vector<double>& x,
                                             const std::vector<double>& y);

struct ScatterSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<double> x;
  std::vector<double> y;
  bool trend_line = true;  // annotates slope/intercept, plus the y=x guide
};

void write_scatter_svg(const std::string& path, const ScatterSpec& spec);

struct LineSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct LineSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<LineSeries> series;
};

void write_line_svg(const std::string& path, const LineSpec& spec);

struct BarSpec {
  std::string title;
  std::string y_label;
  std::vector<std::string> groups;                       // e.g. output dimensions
  std::vector<std::pair<std::string, std::vector<double>>> series;  // per model
};

void write_bar_svg(const std::string& path, const BarSpec& spec);

struct NamedTrace {
  std::string model;
  std::vector<TraceRow> rows;
};

// Batch emission under out_dir: predicted-vs-truth scatters per
// (model, dimension) named <case>_<model>_<dimension>.svg, one convergence
// curve per trace, and RMSE/MAPE bar charts across the report.
std::vector<std::string> emit_plots(const EvalReport& report,
                                    const std::vector<NamedTrace>& traces,
                                    const std::vector<MethodPredictions>& predictions,
                                    const std::string& out_dir, const std::string& case_name);

}  // namespace prgp
