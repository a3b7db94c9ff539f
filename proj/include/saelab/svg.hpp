#pragma once

#include <string>
#include <vector>

namespace saelab::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

// Minimal self-contained line chart: one polyline per series, tick marks,
// axis labels (callers include units in the label text), and a legend.
// Returns a complete standalone SVG document.
std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series,
                       int width = 760, int height = 480);

}  // namespace saelab::svg
