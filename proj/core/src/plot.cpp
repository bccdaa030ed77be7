#include "prgp/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace prgp {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 480;
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 20;
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 50;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Range {
  double lo = 0.0;
  double hi = 1.0;

  void expand(double v) {
    if (!std::isfinite(v)) {
      return;
    }
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }

  void pad() {
    if (!(hi > lo)) {
      hi = lo + 1.0;
    }
    const double margin = 0.05 * (hi - lo);
    lo -= margin;
    hi += margin;
  }
};

Range range_of(const std::vector<double>& values) {
  Range r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (double v : values) {
    r.expand(v);
  }
  if (!std::isfinite(r.lo)) {
    r.lo = 0.0;
    r.hi = 1.0;
  }
  r.pad();
  return r;
}

class Svg {
 public:
  explicit Svg(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) {
      throw IoError("plot: cannot write " + path);
    }
    out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
         << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
         << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  }

  void frame(const std::string& title, const std::string& x_label, const std::string& y_label,
             const Range& xr, const Range& yr) {
    xr_ = xr;
    yr_ = yr;
    out_ << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" "
         << "font-family=\"sans-serif\" font-size=\"15\">" << title << "</text>\n";
    out_ << "<rect x=\"" << kMarginLeft << "\" y=\"" << kMarginTop << "\" width=\""
         << plot_w() << "\" height=\"" << plot_h()
         << "\" fill=\"none\" stroke=\"black\"/>\n";
    out_ << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12
         << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << x_label
         << "</text>\n";
    out_ << "<text x=\"16\" y=\"" << kHeight / 2
         << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
         << "transform=\"rotate(-90 16 " << kHeight / 2 << ")\">" << y_label << "</text>\n";
    // Corner tick labels.
    label(kMarginLeft, kHeight - kMarginBottom + 16, fmt(xr_.lo), "start");
    label(kWidth - kMarginRight, kHeight - kMarginBottom + 16, fmt(xr_.hi), "end");
    label(kMarginLeft - 6, kHeight - kMarginBottom, fmt(yr_.lo), "end");
    label(kMarginLeft - 6, kMarginTop + 10, fmt(yr_.hi), "end");
  }

  double sx(double x) const {
    return kMarginLeft + (x - xr_.lo) / (xr_.hi - xr_.lo) * plot_w();
  }
  double sy(double y) const {
    return kHeight - kMarginBottom - (y - yr_.lo) / (yr_.hi - yr_.lo) * plot_h();
  }

  void circle(double x, double y, const char* color) {
    out_ << "<circle cx=\"" << fmt(sx(x)) << "\" cy=\"" << fmt(sy(y))
         << "\" r=\"2.2\" fill=\"" << color << "\" fill-opacity=\"0.6\"/>\n";
  }

  void polyline(const std::vector<double>& x, const std::vector<double>& y, const char* color) {
    out_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.4\" points=\"";
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!std::isfinite(y[i])) {
        continue;
      }
      out_ << fmt(sx(x[i])) << ',' << fmt(sy(y[i])) << ' ';
    }
    out_ << "\"/>\n";
  }

  void line(double x1, double y1, double x2, double y2, const char* color, bool dashed) {
    out_ << "<line x1=\"" << fmt(sx(x1)) << "\" y1=\"" << fmt(sy(y1)) << "\" x2=\"" << fmt(sx(x2))
         << "\" y2=\"" << fmt(sy(y2)) << "\" stroke=\"" << color << "\"";
    if (dashed) {
      out_ << " stroke-dasharray=\"5,4\"";
    }
    out_ << "/>\n";
  }

  void rect(double x, double y, double w, double h, const char* color) {
    out_ << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(w)
         << "\" height=\"" << fmt(h) << "\" fill=\"" << color << "\"/>\n";
  }

  void label(double px, double py, const std::string& text, const char* anchor) {
    out_ << "<text x=\"" << fmt(px) << "\" y=\"" << fmt(py) << "\" text-anchor=\"" << anchor
         << "\" font-family=\"sans-serif\" font-size=\"11\">" << text << "</text>\n";
  }

  void raw_label(double px, double py, const std::string& text, const char* color) {
    out_ << "<text x=\"" << fmt(px) << "\" y=\"" << fmt(py)
         << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << color << "\">" << text
         << "</text>\n";
  }

  static double plot_w() { return kWidth - kMarginLeft - kMarginRight; }
  static double plot_h() { return kHeight - kMarginTop - kMarginBottom; }

  void close() {
    out_ << "</svg>\n";
    if (!out_) {
      throw IoError("plot: write failed");
    }
  }

 private:
  std::ofstream out_;
  Range xr_;
  Range yr_;
};

std::string sanitize(const std::string& name) {
  std::string out;
  for (char c : name) {
    out += (std::isalnum(static_cast<unsigned char>(c)) != 0) ? c : '_';
  }
  return out;
}

}  // namespace

std::pair<double, double> least_squares_line(const std::vector<double>& x,
                                             const std::vector<double>& y) {
  if (x.size() != y.size() || x.empty()) {
    throw InputDomainError("least_squares_line: paired non-empty data required");
  }
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double var = sxx - sx * sx / n;
  if (!(std::abs(var) > 0.0)) {
    return {std::numeric_limits<double>::quiet_NaN(), sy / n};
  }
  const double slope = (sxy - sx * sy / n) / var;
  return {slope, (sy - slope * sx) / n};
}

void write_scatter_svg(const std::string& path, const ScatterSpec& spec) {
  Svg svg(path);
  Range xr = range_of(spec.x);
  Range yr = range_of(spec.y);
  svg.frame(spec.title, spec.x_label, spec.y_label, xr, yr);
  for (std::size_t i = 0; i < spec.x.size(); ++i) {
    svg.circle(spec.x[i], spec.y[i], kPalette[0]);
  }
  if (spec.trend_line && spec.x.size() >= 2) {
    const auto [slope, intercept] = least_squares_line(spec.x, spec.y);
    if (std::isfinite(slope)) {
      svg.line(xr.lo, slope * xr.lo + intercept, xr.hi, slope * xr.hi + intercept, kPalette[1],
               false);
      svg.raw_label(kMarginLeft + 8, kMarginTop + 16,
                    "trend: slope=" + fmt(slope) + " intercept=" + fmt(intercept), kPalette[1]);
    }
    svg.line(std::max(xr.lo, yr.lo), std::max(xr.lo, yr.lo), std::min(xr.hi, yr.hi),
             std::min(xr.hi, yr.hi), "#999999", true);
  }
  svg.close();
}

void write_line_svg(const std::string& path, const LineSpec& spec) {
  Svg svg(path);
  Range xr, yr;
  bool first = true;
  for (const LineSeries& s : spec.series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        xr = Range{s.x[i], s.x[i]};
        yr = Range{s.y[i], s.y[i]};
        first = false;
      }
      xr.expand(s.x[i]);
      yr.expand(s.y[i]);
    }
  }
  if (first) {
    xr = Range{0, 1};
    yr = Range{0, 1};
  }
  xr.pad();
  yr.pad();
  svg.frame(spec.title, spec.x_label, spec.y_label, xr, yr);
  int color = 0;
  for (const LineSeries& s : spec.series) {
    svg.polyline(s.x, s.y, kPalette[color % 10]);
    svg.raw_label(kMarginLeft + 8, kMarginTop + 16 + 14 * color, s.label, kPalette[color % 10]);
    ++color;
  }
  svg.close();
}

void write_bar_svg(const std::string& path, const BarSpec& spec) {
  Svg svg(path);
  Range yr{0.0, 0.0};
  for (const auto& [label, values] : spec.series) {
    for (double v : values) {
      yr.expand(v);
    }
  }
  yr.pad();
  yr.lo = std::min(yr.lo, 0.0);
  const Range xr{0.0, static_cast<double>(spec.groups.size())};
  svg.frame(spec.title, "", spec.y_label, xr, yr);
  const std::size_t n_series = std::max<std::size_t>(1, spec.series.size());
  const double group_w = 1.0;
  const double bar_w = group_w * 0.8 / static_cast<double>(n_series);
  for (std::size_t g = 0; g < spec.groups.size(); ++g) {
    for (std::size_t s = 0; s < spec.series.size(); ++s) {
      const double value = spec.series[s].second[g];
      if (!std::isfinite(value)) {
        continue;
      }
      const double x0 = static_cast<double>(g) + 0.1 + bar_w * static_cast<double>(s);
      const double px = svg.sx(x0);
      const double pw = svg.sx(x0 + bar_w) - px;
      const double py = svg.sy(std::max(value, 0.0));
      const double ph = std::abs(svg.sy(value) - svg.sy(0.0));
      svg.rect(px, py, pw, ph, kPalette[s % 10]);
    }
    svg.label(svg.sx(static_cast<double>(g) + 0.5), kHeight - kMarginBottom + 16,
              spec.groups[g], "middle");
  }
  for (std::size_t s = 0; s < spec.series.size(); ++s) {
    svg.raw_label(kMarginLeft + 8, kMarginTop + 16 + 14 * static_cast<double>(s),
                  spec.series[s].first, kPalette[s % 10]);
  }
  svg.close();
}

std::vector<std::string> emit_plots(const EvalReport& report,
                                    const std::vector<NamedTrace>& traces,
                                    const std::vector<MethodPredictions>& predictions,
                                    const std::string& out_dir, const std::string& case_name) {
  std::vector<std::string> written;
  auto path_for = [&](const std::string& stem) {
    return out_dir + "/" + sanitize(case_name) + "_" + sanitize(stem) + ".svg";
  };

  // Predicted-vs-truth scatter per (model, dimension).
  for (const MethodPredictions& mp : predictions) {
    for (int j = 0; j < kTrajectoryDims; ++j) {
      if (mp.y_true.rows() == 0) {
        continue;
      }
      ScatterSpec spec;
      spec.title = mp.name + ": " + output_dim_name(j);
      spec.x_label = "ground truth";
      spec.y_label = "estimate";
      spec.x.assign(mp.y_true.col(j).data(), mp.y_true.col(j).data() + mp.y_true.rows());
      spec.y.assign(mp.y_hat.col(j).data(), mp.y_hat.col(j).data() + mp.y_hat.rows());
      const std::string path = path_for(mp.name + "_" + output_dim_name(j));
      write_scatter_svg(path, spec);
      written.push_back(path);
    }
  }

  // Negative-ELBO convergence curves.
  for (const NamedTrace& trace : traces) {
    LineSpec spec;
    spec.title = trace.model + ": negative ELBO";
    spec.x_label = "iteration";
    spec.y_label = "negative ELBO";
    LineSeries series;
    series.label = trace.model;
    for (const TraceRow& row : trace.rows) {
      series.x.push_back(static_cast<double>(row.iteration));
      series.y.push_back(row.negative_elbo);
    }
    spec.series.push_back(std::move(series));
    const std::string path = path_for(trace.model + "_convergence");
    write_line_svg(path, spec);
    written.push_back(path);
  }

  // RMSE / MAPE bars across models and dimensions.
  std::vector<std::string> models;
  std::vector<std::string> dims;
  for (const EvalCell& cell : report.cells) {
    if (std::find(models.begin(), models.end(), cell.model) == models.end()) {
      models.push_back(cell.model);
    }
    if (std::find(dims.begin(), dims.end(), cell.dimension) == dims.end()) {
      dims.push_back(cell.dimension);
    }
  }
  if (!report.cells.empty()) {
    for (const char* metric : {"rmse", "mape"}) {
      BarSpec spec;
      spec.title = std::string(metric) + " by model and dimension";
      spec.y_label = metric;
      spec.groups = dims;
      for (const std::string& model : models) {
        std::vector<double> values(dims.size(), std::numeric_limits<double>::quiet_NaN());
        for (const EvalCell& cell : report.cells) {
          if (cell.model != model) {
            continue;
          }
          const auto at = std::find(dims.begin(), dims.end(), cell.dimension) - dims.begin();
          values[static_cast<std::size_t>(at)] =
              std::string(metric) == "rmse" ? cell.rmse : cell.mape;
        }
        spec.series.emplace_back(model, std::move(values));
      }
      const std::string path = path_for(metric);
      write_bar_svg(path, spec);
      written.push_back(path);
    }
  }
  return written;
}

}  // namespace prgp
