#include "saelab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace saelab::svg {

namespace {

std::string esc(const std::string& s) {
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

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

const char* kPalette[] = {"#1f6fb2", "#d1495b", "#3e8e5a", "#8a5fbe",
                          "#c98a1c", "#4aa3a2", "#7a7a7a"};

}  // namespace

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series,
                       int width, int height) {
  const double left = 72, right = 160, top = 44, bottom = 56;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_min = x_min, y_max = -x_min;
  for (const Series& s : series) {
    const std::size_t count = std::min(s.x.size(), s.y.size());
    for (std::size_t i = 0; i < count; ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x_min = std::min(x_min, s.x[i]);
      x_max = std::max(x_max, s.x[i]);
      y_min = std::min(y_min, s.y[i]);
      y_max = std::max(y_max, s.y[i]);
    }
  }
  if (!(x_min <= x_max)) { x_min = 0; x_max = 1; }
  if (!(y_min <= y_max)) { y_min = 0; y_max = 1; }
  if (x_min == x_max) { x_min -= 0.5; x_max += 0.5; }
  if (y_min == y_max) { y_min -= 0.5; y_max += 0.5; }
  const double y_pad = 0.04 * (y_max - y_min);
  y_min -= y_pad;
  y_max += y_pad;

  auto px = [&](double x) { return left + (x - x_min) / (x_max - x_min) * plot_w; };
  auto py = [&](double y) { return top + plot_h - (y - y_min) / (y_max - y_min) * plot_h; };

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
      << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"#ffffff\"/>\n"
      << "<text x=\"" << width / 2.0 << "\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"15\" fill=\"#222\">"
      << esc(title) << "</text>\n";

  // frame
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w
      << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"#555\" stroke-width=\"1\"/>\n";

  const int ticks = 5;
  for (int t = 0; t <= ticks; ++t) {
    const double fx = x_min + (x_max - x_min) * t / ticks;
    const double fy = y_min + (y_max - y_min) * t / ticks;
    const double gx = px(fx);
    const double gy = py(fy);
    out << "<line x1=\"" << gx << "\" y1=\"" << top + plot_h << "\" x2=\"" << gx
        << "\" y2=\"" << top + plot_h + 5 << "\" stroke=\"#555\"/>\n"
        << "<text x=\"" << gx << "\" y=\"" << top + plot_h + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" "
           "fill=\"#333\">"
        << num(fx) << "</text>\n"
        << "<line x1=\"" << left - 5 << "\" y1=\"" << gy << "\" x2=\"" << left
        << "\" y2=\"" << gy << "\" stroke=\"#555\"/>\n"
        << "<text x=\"" << left - 8 << "\" y=\"" << gy + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" "
           "fill=\"#333\">"
        << num(fy) << "</text>\n";
  }

  out << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
         "fill=\"#222\">"
      << esc(x_label) << "</text>\n"
      << "<text x=\"18\" y=\"" << top + plot_h / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
         "fill=\"#222\" transform=\"rotate(-90 18 "
      << top + plot_h / 2 << ")\">" << esc(y_label) << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
    std::ostringstream pts;
    const std::size_t count = std::min(series[s].x.size(), series[s].y.size());
    for (std::size_t i = 0; i < count; ++i) {
      if (!std::isfinite(series[s].x[i]) || !std::isfinite(series[s].y[i])) continue;
      pts << px(series[s].x[i]) << ',' << py(series[s].y[i]) << ' ';
    }
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.8\" points=\"" << pts.str() << "\"/>\n";
    for (std::size_t i = 0; i < count; ++i) {
      if (!std::isfinite(series[s].x[i]) || !std::isfinite(series[s].y[i])) continue;
      out << "<circle cx=\"" << px(series[s].x[i]) << "\" cy=\"" << py(series[s].y[i])
          << "\" r=\"2.4\" fill=\"" << color << "\"/>\n";
    }
    const double ly = top + 16 + 18 * static_cast<double>(s);
    out << "<line x1=\"" << left + plot_w + 10 << "\" y1=\"" << ly - 4 << "\" x2=\""
        << left + plot_w + 34 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << left + plot_w + 40 << "\" y=\"" << ly
        << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">"
        << esc(series[s].name) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace saelab::svg
