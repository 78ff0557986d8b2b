#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace p2plab {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  int width = 640;
  int height = 420;
};

/// Line chart with axes, ticks and a legend, as a standalone SVG document.
std::string render_line_chart(const std::vector<Series>& series, const ChartOptions& options);

void write_line_chart(const std::filesystem::path& path, const std::vector<Series>& series,
                      const ChartOptions& options);

}  // namespace p2plab
