#pragma once

#include <string>
#include <vector>

#include <opencv2/core.hpp>

namespace vidpred::cli {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// White canvas with axes, min/max tick labels and one polyline per series.
cv::Mat line_chart(const std::string& title, const std::vector<Series>& series,
                   int width = 720, int height = 420);

cv::Mat bar_chart(const std::string& title, const std::vector<std::string>& labels,
                  const std::vector<double>& values, int width = 720, int height = 420);

}  // namespace vidpred::cli
