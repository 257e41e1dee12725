#include "vidpred/image_io.hpp"

#include <stdexcept>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "vidpred/errors.hpp"

namespace vidpred {

torch::Tensor read_image(const std::string& path) {
  cv::Mat raw = cv::imread(path, cv::IMREAD_ANYDEPTH | cv::IMREAD_COLOR);
  if (raw.empty()) {
    throw IoError("cannot read image '" + path + "'");
  }
  cv::Mat rgb;
  cv::cvtColor(raw, rgb, cv::COLOR_BGR2RGB);
  const double scale = rgb.depth() == CV_16U ? 1.0 / 65535.0 : 1.0 / 255.0;
  cv::Mat as_float;
  rgb.convertTo(as_float, CV_32FC3, scale);
  auto t = torch::from_blob(as_float.data, {as_float.rows, as_float.cols, 3}, torch::kFloat32);
  return t.permute({2, 0, 1}).clone();
}

std::pair<int64_t, int64_t> read_image_size(const std::string& path) {
  const cv::Mat raw = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (raw.empty()) {
    throw IoError("cannot read image '" + path + "'");
  }
  return {raw.rows, raw.cols};
}

void write_image(const std::string& path, const torch::Tensor& image, int bit_depth) {
  if (image.dim() != 3 || (image.size(0) != 1 && image.size(0) != 3)) {
    throw std::invalid_argument("write_image: expected a 1 x H x W or 3 x H x W tensor");
  }
  if (bit_depth != 8 && bit_depth != 16) {
    throw std::invalid_argument("write_image: bit_depth must be 8 or 16");
  }
  const double max_value = bit_depth == 8 ? 255.0 : 65535.0;
  auto hwc = (image.detach().to(torch::kDouble).clamp(0.0, 1.0) * max_value)
                 .round()
                 .permute({1, 2, 0})
                 .to(torch::kFloat32)
                 .contiguous();
  const int channels = static_cast<int>(image.size(0));
  cv::Mat as_float(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)),
                   CV_32FC(channels), hwc.data_ptr<float>());
  cv::Mat out;
  as_float.convertTo(out, bit_depth == 8 ? CV_8UC(channels) : CV_16UC(channels));
  if (channels == 3) {
    cv::cvtColor(out, out, cv::COLOR_RGB2BGR);
  }
  bool ok = false;
  try {
    ok = cv::imwrite(path, out);
  } catch (const cv::Exception&) {
    ok = false;
  }
  if (!ok) {
    throw IoError("cannot write image '" + path + "'");
  }
}

}  // namespace vidpred
