#pragma once

#include <string>

#include <torch/torch.h>

namespace vidpred {

/// Decodes an image file to a 3 x H x W float tensor in [0, 1] (RGB order).
/// Throws IoError naming the file when it cannot be read.
torch::Tensor read_image(const std::string& path);

/// Reads only the pixel dimensions (rows, cols) of an image file.
std::pair<int64_t, int64_t> read_image_size(const std::string& path);

/// Writes a C x H x W tensor in [0, 1] as PNG. bit_depth is 8 or 16.
void write_image(const std::string& path, const torch::Tensor& image, int bit_depth = 8);

}  // namespace vidpred
