#include "vrql/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <map>

#include "vrql/errors.hpp"

namespace vrql {

namespace {

void append(std::string& out, const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  out += buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;      // data ranges
  double px0 = 0.0, px1 = 1.0, py_top = 0.0, py_bot = 1.0;  // pixel box

  double sx(double x) const { return px0 + (x - x0) / (x1 - x0) * (px1 - px0); }
  double sy(double y) const { return py_bot - (y - y0) / (y1 - y0) * (py_bot - py_top); }
};

void pad_range(double& lo, double& hi) {
  if (hi - lo <= 0.0) {
    lo -= 1.0;
    hi += 1.0;
    return;
  }
  const double pad = 0.08 * (hi - lo);
  lo -= pad;
  hi += pad;
}

void open_svg(std::string& out, const PlotStyle& style, const std::string& default_title,
              const Frame& f) {
  append(out, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
  append(out,
         "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"%d\" height=\"%d\" "
         "viewBox=\"0 0 %d %d\">\n",
         style.width, style.height, style.width, style.height);
  append(out, "<rect x=\"0\" y=\"0\" width=\"%d\" height=\"%d\" fill=\"#ffffff\"/>\n", style.width,
         style.height);
  append(out,
         "<defs><clipPath id=\"plot\"><rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\"/>"
         "</clipPath></defs>\n",
         f.px0, f.py_top, f.px1 - f.px0, f.py_bot - f.py_top);
  const std::string title = style.title.empty() ? default_title : style.title;
  append(out,
         "<text x=\"%.2f\" y=\"24\" font-family=\"Helvetica, Arial, sans-serif\" font-size=\"16\" "
         "fill=\"#111111\">%s</text>\n",
         f.px0, escape_xml(title).c_str());
}

void draw_frame_box(std::string& out, const Frame& f) {
  append(out,
         "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"none\" "
         "stroke=\"#333333\" stroke-width=\"1\"/>\n",
         f.px0, f.py_top, f.px1 - f.px0, f.py_bot - f.py_top);
}

void draw_x_ticks(std::string& out, const Frame& f, int count) {
  for (int i = 0; i < count; ++i) {
    const double x = f.x0 + (f.x1 - f.x0) * i / (count - 1);
    const double px = f.sx(x);
    append(out, "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#dddddd\"/>\n", px,
           f.py_top, px, f.py_bot);
    append(out, "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#333333\"/>\n", px,
           f.py_bot, px, f.py_bot + 5.0);
    append(out,
           "<text x=\"%.2f\" y=\"%.2f\" text-anchor=\"middle\" font-family=\"Helvetica, Arial, "
           "sans-serif\" font-size=\"12\" fill=\"#111111\">%.3g</text>\n",
           px, f.py_bot + 18.0, x);
  }
}

void draw_y_tick(std::string& out, const Frame& f, double y, const std::string& label) {
  const double py = f.sy(y);
  append(out, "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#dddddd\"/>\n", f.px0, py,
         f.px1, py);
  append(out, "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#333333\"/>\n",
         f.px0 - 5.0, py, f.px0, py);
  append(out,
         "<text x=\"%.2f\" y=\"%.2f\" text-anchor=\"end\" font-family=\"Helvetica, Arial, "
         "sans-serif\" font-size=\"12\" fill=\"#111111\">%s</text>\n",
         f.px0 - 8.0, py + 4.0, label.c_str());
}

void draw_axis_labels(std::string& out, const PlotStyle& style, const Frame& f, const char* xlabel,
                      const char* ylabel) {
  append(out,
         "<text x=\"%.2f\" y=\"%.2f\" text-anchor=\"middle\" font-family=\"Helvetica, Arial, "
         "sans-serif\" font-size=\"13\" fill=\"#111111\">%s</text>\n",
         0.5 * (f.px0 + f.px1), static_cast<double>(style.height) - 10.0, xlabel);
  append(out,
         "<text x=\"18\" y=\"%.2f\" text-anchor=\"middle\" font-family=\"Helvetica, Arial, "
         "sans-serif\" font-size=\"13\" fill=\"#111111\" transform=\"rotate(-90 18 %.2f)\">%s</text>\n",
         0.5 * (f.py_top + f.py_bot), 0.5 * (f.py_top + f.py_bot), ylabel);
}

void legend_entry(std::string& out, const Frame& f, int slot, const char* color, const char* dash,
                  const std::string& label) {
  const double y = f.py_top + 16.0 + 18.0 * slot;
  if (dash == nullptr) {
    append(out, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\" fill=\"%s\"/>\n", f.px0 + 14.0, y - 4.0, color);
  } else {
    append(out,
           "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"%s\" stroke-width=\"2\" "
           "stroke-dasharray=\"%s\"/>\n",
           f.px0 + 6.0, y - 4.0, f.px0 + 24.0, y - 4.0, color, dash);
  }
  append(out,
         "<text x=\"%.2f\" y=\"%.2f\" font-family=\"Helvetica, Arial, sans-serif\" font-size=\"12\" "
         "fill=\"#111111\">%s</text>\n",
         f.px0 + 30.0, y, escape_xml(label).c_str());
}

void clipped_line(std::string& out, const Frame& f, double slope, double intercept, const char* color,
                  const char* dash) {
  const double ya = intercept + slope * f.x0;
  const double yb = intercept + slope * f.x1;
  append(out,
         "<line clip-path=\"url(#plot)\" x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" "
         "stroke=\"%s\" stroke-width=\"2\"%s%s%s/>\n",
         f.sx(f.x0), f.sy(ya), f.sx(f.x1), f.sy(yb), color, dash ? " stroke-dasharray=\"" : "",
         dash ? dash : "", dash ? "\"" : "");
}

}  // namespace

std::string render_scaling_svg(const std::vector<ExperimentRow>& rows, double lambda,
                               const PlotStyle& style) {
  std::vector<ExperimentRow> finite;
  finite.reserve(rows.size());
  for (const ExperimentRow& r : rows) {
    if (std::isfinite(r.log_err) && std::isfinite(r.log_complexity)) finite.push_back(r);
  }
  if (finite.empty()) throw validation_error("cannot render a plot from an empty row set");

  std::map<double, std::pair<double, std::int64_t>> by_gamma;
  std::map<double, double> x_of;
  double x_lo = finite.front().log_complexity, x_hi = x_lo;
  double y_lo = finite.front().log_err, y_hi = y_lo;
  for (const ExperimentRow& r : finite) {
    x_lo = std::min(x_lo, r.log_complexity);
    x_hi = std::max(x_hi, r.log_complexity);
    y_lo = std::min(y_lo, r.log_err);
    y_hi = std::max(y_hi, r.log_err);
    auto& acc = by_gamma[r.gamma];
    acc.first += r.log_err;
    acc.second += 1;
    x_of[r.gamma] = r.log_complexity;
  }
  pad_range(x_lo, x_hi);
  pad_range(y_lo, y_hi);

  Frame f;
  f.x0 = x_lo;
  f.x1 = x_hi;
  f.y0 = y_lo;
  f.y1 = y_hi;
  f.px0 = 70.0;
  f.px1 = static_cast<double>(style.width) - 20.0;
  f.py_top = 40.0;
  f.py_bot = static_cast<double>(style.height) - 50.0;

  std::string out;
  open_svg(out, style, "error scaling against discount complexity", f);
  for (int i = 0; i < 6; ++i) {
    const double y = f.y0 + (f.y1 - f.y0) * i / 5.0;
    char label[48];
    std::snprintf(label, sizeof(label), "%.3g", y);
    draw_y_tick(out, f, y, label);
  }
  draw_x_ticks(out, f, 6);
  draw_frame_box(out, f);
  draw_axis_labels(out, style, f, "ln( 1 / (1 - gamma) )", "ln of final error");

  for (const ExperimentRow& r : finite) {
    append(out, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2.5\" fill=\"#4477aa\" fill-opacity=\"0.35\"/>\n",
           f.sx(r.log_complexity), f.sy(r.log_err));
  }

  double cx = 0.0, cy = 0.0;
  for (const auto& [gamma, acc] : by_gamma) {
    const double mx = x_of[gamma];
    const double my = acc.first / static_cast<double>(acc.second);
    cx += mx;
    cy += my;
    append(out,
           "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"4.5\" fill=\"#222222\" stroke=\"#ffffff\" "
           "stroke-width=\"1.5\"/>\n",
           f.sx(mx), f.sy(my));
  }
  cx /= static_cast<double>(by_gamma.size());
  cy /= static_cast<double>(by_gamma.size());

  int slot = 0;
  legend_entry(out, f, slot++, "#222222", nullptr, "per-gamma mean");
  if (by_gamma.size() >= 2) {
    const FitResult fit = fit_loglog_slope(finite);
    clipped_line(out, f, fit.slope, fit.intercept, "#cc3311", nullptr);
    char label[96];
    std::snprintf(label, sizeof(label), "OLS fit, slope %.4f", fit.slope);
    legend_entry(out, f, slot++, "#cc3311", "none", label);
    clipped_line(out, f, -lambda, cy + lambda * cx, "#009988", "6 4");
    std::snprintf(label, sizeof(label), "reference slope %.4g", -lambda);
    legend_entry(out, f, slot++, "#009988", "6 4", label);
    clipped_line(out, f, 0.0, cy, "#ee7733", "2 4");
    legend_entry(out, f, slot++, "#ee7733", "2 4", "reference slope 0");
  }
  out += "</svg>\n";
  return out;
}

std::string render_trace_svg(const RunRecord& record, const PlotStyle& style) {
  if (record.trace.empty()) throw validation_error("cannot render an empty trace");

  double min_pos = 0.0;
  for (const TracePoint& p : record.trace) {
    if (p.err_linf > 0.0 && std::isfinite(p.err_linf) && (min_pos == 0.0 || p.err_linf < min_pos)) {
      min_pos = p.err_linf;
    }
  }

  Frame f;
  f.px0 = 70.0;
  f.px1 = static_cast<double>(style.width) - 20.0;
  f.py_top = 40.0;
  f.py_bot = static_cast<double>(style.height) - 50.0;

  if (min_pos == 0.0) {
    f.x0 = 0.0;
    f.x1 = 1.0;
    f.y0 = 0.0;
    f.y1 = 1.0;
    std::string out;
    open_svg(out, style, "error trace", f);
    draw_frame_box(out, f);
    append(out,
           "<text x=\"%.2f\" y=\"%.2f\" text-anchor=\"middle\" font-family=\"Helvetica, Arial, "
           "sans-serif\" font-size=\"14\" fill=\"#111111\">every recorded error is exactly zero</text>\n",
           0.5 * (f.px0 + f.px1), 0.5 * (f.py_top + f.py_bot));
    out += "</svg>\n";
    return out;
  }

  double x_lo = static_cast<double>(record.trace.front().samples_used);
  double x_hi = x_lo;
  double y_lo = std::log10(min_pos);
  double y_hi = y_lo;
  for (const TracePoint& p : record.trace) {
    const double x = static_cast<double>(p.samples_used);
    const double y = std::log10(std::max(p.err_linf, min_pos));
    x_lo = std::min(x_lo, x);
    x_hi = std::max(x_hi, x);
    y_lo = std::min(y_lo, y);
    y_hi = std::max(y_hi, y);
  }
  pad_range(x_lo, x_hi);
  pad_range(y_lo, y_hi);
  f.x0 = x_lo;
  f.x1 = x_hi;
  f.y0 = y_lo;
  f.y1 = y_hi;

  std::string out;
  open_svg(out, style, "error trace", f);
  const int dec_lo = static_cast<int>(std::ceil(f.y0));
  const int dec_hi = static_cast<int>(std::floor(f.y1));
  if (dec_hi - dec_lo >= 1) {
    for (int d = dec_lo; d <= dec_hi; ++d) {
      char label[48];
      std::snprintf(label, sizeof(label), "1e%d", d);
      draw_y_tick(out, f, static_cast<double>(d), label);
    }
  } else {
    for (int i = 0; i < 6; ++i) {
      const double y = f.y0 + (f.y1 - f.y0) * i / 5.0;
      char label[48];
      std::snprintf(label, sizeof(label), "%.2g", std::pow(10.0, y));
      draw_y_tick(out, f, y, label);
    }
  }
  draw_x_ticks(out, f, 6);
  draw_frame_box(out, f);
  draw_axis_labels(out, style, f, "samples consumed", "error (log scale)");

  for (std::size_t i = 1; i < record.trace.size(); ++i) {
    if (record.trace[i].epoch != record.trace[i - 1].epoch) {
      const double px = f.sx(static_cast<double>(record.trace[i].samples_used));
      append(out,
             "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"#bbbbbb\" "
             "stroke-dasharray=\"4 4\"/>\n",
             px, f.py_top, px, f.py_bot);
      append(out,
             "<text x=\"%.2f\" y=\"%.2f\" text-anchor=\"middle\" font-family=\"Helvetica, Arial, "
             "sans-serif\" font-size=\"11\" fill=\"#555555\">m=%lld</text>\n",
             px, f.py_top + 12.0, static_cast<long long>(record.trace[i].epoch));
    }
  }

  out += "<polyline clip-path=\"url(#plot)\" fill=\"none\" stroke=\"#4477aa\" stroke-width=\"1.5\" points=\"";
  for (const TracePoint& p : record.trace) {
    append(out, "%.2f,%.2f ", f.sx(static_cast<double>(p.samples_used)),
           f.sy(std::log10(std::max(p.err_linf, min_pos))));
  }
  out += "\"/>\n</svg>\n";
  return out;
}

}  // namespace vrql
