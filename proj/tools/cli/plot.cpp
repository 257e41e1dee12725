#include "plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <opencv2/imgproc.hpp>

namespace vidpred::cli {
namespace {

const cv::Scalar kPalette[] = {{180, 90, 30}, {40, 120, 220}, {60, 160, 60}, {50, 50, 200},
                               {150, 80, 150}};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Frame {
  cv::Rect area;
  double x0, x1, y0, y1;

  cv::Point map(double x, double y) const {
    const double fx = x1 > x0 ? (x - x0) / (x1 - x0) : 0.5;
    const double fy = y1 > y0 ? (y - y0) / (y1 - y0) : 0.5;
    return {area.x + static_cast<int>(std::lround(fx * area.width)),
            area.y + area.height - static_cast<int>(std::lround(fy * area.height))};
  }
};

void draw_axes(cv::Mat& img, const Frame& f, const std::string& title) {
  const cv::Scalar black(0, 0, 0);
  cv::rectangle(img, f.area, black, 1);
  cv::putText(img, title, {f.area.x, 24}, cv::FONT_HERSHEY_SIMPLEX, 0.6, black, 1,
              cv::LINE_AA);
  cv::putText(img, fmt(f.y1), {4, f.area.y + 10}, cv::FONT_HERSHEY_SIMPLEX, 0.4, black, 1,
              cv::LINE_AA);
  cv::putText(img, fmt(f.y0), {4, f.area.y + f.area.height}, cv::FONT_HERSHEY_SIMPLEX, 0.4,
              black, 1, cv::LINE_AA);
}

}  // namespace

cv::Mat line_chart(const std::string& title, const std::vector<Series>& series, int width,
                   int height) {
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) {
      throw std::invalid_argument("series '" + s.label + "' has mismatched x and y");
    }
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) {
    throw std::invalid_argument("nothing to plot for '" + title + "'");
  }
  if (y1 == y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  cv::Mat img(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
  const Frame f{cv::Rect(70, 40, width - 100, height - 90), x0, x1, y0, y1};
  draw_axes(img, f, title);
  const cv::Scalar black(0, 0, 0);
  cv::putText(img, fmt(x0), {f.area.x, f.area.y + f.area.height + 18}, cv::FONT_HERSHEY_SIMPLEX,
              0.4, black, 1, cv::LINE_AA);
  cv::putText(img, fmt(x1), {f.area.x + f.area.width - 30, f.area.y + f.area.height + 18},
              cv::FONT_HERSHEY_SIMPLEX, 0.4, black, 1, cv::LINE_AA);

  for (size_t k = 0; k < series.size(); ++k) {
    const auto color = kPalette[k % std::size(kPalette)];
    const auto& s = series[k];
    std::vector<cv::Point> pts;
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (std::isfinite(s.y[i])) pts.push_back(f.map(s.x[i], s.y[i]));
    }
    if (pts.size() > 1) cv::polylines(img, pts, false, color, 2, cv::LINE_AA);
    for (const auto& p : pts) cv::circle(img, p, 2, color, cv::FILLED);
    cv::putText(img, s.label, {f.area.x + 10, f.area.y + 18 + 18 * static_cast<int>(k)},
                cv::FONT_HERSHEY_SIMPLEX, 0.45, color, 1, cv::LINE_AA);
  }
  return img;
}

cv::Mat bar_chart(const std::string& title, const std::vector<std::string>& labels,
                  const std::vector<double>& values, int width, int height) {
  if (labels.size() != values.size() || values.empty()) {
    throw std::invalid_argument("bar chart needs one label per value");
  }
  const double top = std::max(*std::max_element(values.begin(), values.end()), 1e-12);
  cv::Mat img(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
  const Frame f{cv::Rect(70, 40, width - 100, height - 90), 0.0, 1.0, 0.0, top};
  draw_axes(img, f, title);
  const int n = static_cast<int>(values.size());
  const int slot = f.area.width / n;
  for (int i = 0; i < n; ++i) {
    const int x = f.area.x + i * slot + slot / 6;
    const auto base = f.map(0.0, 0.0).y;
    const auto tip = f.map(0.0, std::max(values[i], 0.0)).y;
    cv::rectangle(img, cv::Point(x, tip), cv::Point(x + slot * 2 / 3, base),
                  kPalette[i % std::size(kPalette)], cv::FILLED);
    cv::putText(img, labels[i], {x, base + 18}, cv::FONT_HERSHEY_SIMPLEX, 0.45,
                cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    cv::putText(img, fmt(values[i]), {x, std::max(tip - 6, f.area.y + 12)},
                cv::FONT_HERSHEY_SIMPLEX, 0.4, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
  }
  return img;
}

}  // namespace vidpred::cli
