#include "vidpred/data.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "vidpred/errors.hpp"
#include "vidpred/image_io.hpp"

namespace vidpred {
namespace {

namespace F = torch::nn::functional;
namespace fs = std::filesystem;

int64_t uniform(std::mt19937_64& rng, int64_t lo, int64_t hi) {
  return std::uniform_int_distribution<int64_t>(lo, hi)(rng);
}

bool in_shape(const Sprite& s, int64_t dx, int64_t dy) {
  const double c = (static_cast<double>(s.size) - 1.0) / 2.0;
  switch (s.shape) {
    case SpriteShape::Square:
      return true;
    case SpriteShape::Disk: {
      const double r = static_cast<double>(s.size) / 2.0;
      return (dx - c) * (dx - c) + (dy - c) * (dy - c) <= r * r;
    }
    case SpriteShape::Cross: {
      const double half = std::max(0.5, static_cast<double>(s.size) / 6.0);
      return std::abs(dx - c) <= half || std::abs(dy - c) <= half;
    }
  }
  return true;
}

void bounce(int64_t& pos, int64_t& vel, int64_t limit) {
  pos += vel;
  if (pos < 0) {
    pos = -pos;
    vel = -vel;
  } else if (pos > limit) {
    pos = 2 * limit - pos;
    vel = -vel;
  }
  pos = std::clamp<int64_t>(pos, 0, limit);
}

}  // namespace

uint64_t mix_seed(uint64_t a, uint64_t b) {
  // splitmix64 finaliser over a combined state
  uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

SequenceDataset SequenceDataset::from_sequences(std::vector<FrameSequence> sequences,
                                                int64_t window_length, TransformSpec transform,
                                                std::vector<std::string> names) {
  if (window_length < 1) {
    throw ConfigError("window_length must be >= 1");
  }
  SequenceDataset ds;
  ds.window_length_ = window_length;
  ds.transform_ = transform;
  for (size_t i = 0; i < sequences.size(); ++i) {
    sequences[i].validate();
    Source src;
    src.name = i < names.size() ? names[i] : "seq" + std::to_string(i);
    src.frames = sequences[i].frames;
    src.length = sequences[i].length();
    if (src.length < window_length) {
      throw ConfigError("sequence '" + src.name + "' has " + std::to_string(src.length) +
                        " frames, fewer than the window length " + std::to_string(window_length));
    }
    ds.sources_.push_back(std::move(src));
  }
  return ds;
}

int64_t SequenceDataset::sequence_length(size_t index) const {
  return sources_.at(index).length;
}

const std::string& SequenceDataset::sequence_name(size_t index) const {
  return sources_.at(index).name;
}

int64_t SequenceDataset::num_windows() const {
  int64_t total = 0;
  for (const auto& s : sources_) {
    total += s.length - window_length_ + 1;
  }
  return total;
}

torch::Tensor SequenceDataset::frames(size_t index, int64_t first, int64_t count) const {
  if (index >= sources_.size()) {
    throw std::invalid_argument("sequence index " + std::to_string(index) + " out of range");
  }
  const auto& src = sources_[index];
  if (first < 0 || count < 1 || first + count > src.length) {
    throw std::invalid_argument("frame range out of bounds for sequence '" + src.name + "'");
  }
  if (src.frames.defined()) {
    return src.frames.narrow(0, first, count);
  }
  std::vector<torch::Tensor> out;
  for (int64_t i = first; i < first + count; ++i) {
    out.push_back(read_image(src.files[static_cast<size_t>(i)].string()));
  }
  return torch::stack(out);
}

FrameSequence SequenceDataset::sequence(size_t index) const {
  return {frames(index, 0, sequence_length(index))};
}

SequenceDataset SequenceDataset::with_window_length(int64_t window_length) const {
  SequenceDataset out = *this;
  out.window_length_ = window_length;
  for (const auto& s : sources_) {
    if (s.length < window_length) {
      throw ConfigError("sequence '" + s.name + "' is shorter than the window length " +
                        std::to_string(window_length));
    }
  }
  return out;
}

SequenceDataset SequenceDataset::with_transform(TransformSpec transform) const {
  SequenceDataset out = *this;
  out.transform_ = transform;
  return out;
}

std::vector<fs::path> list_frame_files(const fs::path& dir,
                                       const std::vector<std::string>& extensions) {
  std::vector<std::pair<long long, fs::path>> indexed;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) {
      continue;
    }
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (std::find(extensions.begin(), extensions.end(), ext) == extensions.end()) {
      continue;
    }
    const auto stem = entry.path().stem().string();
    if (stem.empty() || !std::all_of(stem.begin(), stem.end(), ::isdigit)) {
      continue;
    }
    indexed.emplace_back(std::stoll(stem), entry.path());
  }
  std::sort(indexed.begin(), indexed.end());
  std::vector<fs::path> out;
  for (auto& [index, path] : indexed) {
    out.push_back(std::move(path));
  }
  return out;
}

FrameSequence load_sequence_directory(const fs::path& dir,
                                      const std::vector<std::string>& extensions) {
  if (!fs::is_directory(dir)) {
    throw IoError("not a directory: " + dir.string());
  }
  const auto files = list_frame_files(dir, extensions);
  if (files.empty()) {
    throw IoError("no numbered frames in " + dir.string());
  }
  std::vector<torch::Tensor> frames;
  for (const auto& f : files) {
    frames.push_back(read_image(f.string()));
    if (frames.back().sizes() != frames.front().sizes()) {
      throw ConfigError("image '" + f.string() + "' differs in size from the first frame");
    }
  }
  return {torch::stack(frames)};
}

SequenceDataset load_directory_dataset(const fs::path& root, const DirectoryLayout& layout) {
  if (!fs::is_directory(root)) {
    throw IoError("dataset root is not a directory: " + root.string());
  }
  if (layout.window_length < 1) {
    throw ConfigError("window_length must be >= 1");
  }
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) {
      dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());

  SequenceDataset ds;
  ds.window_length_ = layout.window_length;
  ds.transform_ = layout.transform;
  for (const auto& dir : dirs) {
    const auto files = list_frame_files(dir, layout.extensions);

    const auto name = dir.filename().string();
    if (static_cast<int64_t>(files.size()) < layout.window_length) {
      std::ostringstream msg;
      msg << "skipping sequence '" << name << "': " << files.size()
          << " frames < window length " << layout.window_length;
      ds.warnings_.push_back(msg.str());
      std::cerr << "warning: " << msg.str() << "\n";
      continue;
    }
    SequenceDataset::Source src;
    src.name = name;
    std::pair<int64_t, int64_t> first_size{-1, -1};
    for (const auto& path : files) {
      const auto size = read_image_size(path.string());
      if (first_size.first < 0) {
        first_size = size;
      } else if (size != first_size) {
        std::ostringstream msg;
        msg << "image '" << path.string() << "' is " << size.first << "x" << size.second
            << " but sequence '" << name << "' started at " << first_size.first << "x"
            << first_size.second;
        throw ConfigError(msg.str());
      }
      src.files.push_back(path);
    }
    src.length = static_cast<int64_t>(src.files.size());
    ds.sources_.push_back(std::move(src));
  }
  if (ds.sources_.empty()) {
    throw ConfigError("no usable sequences under " + root.string());
  }
  return ds;
}

void write_sequence_directory(const fs::path& root, const std::string& name,
                              const FrameSequence& seq, int bit_depth) {
  const auto dir = root / name;
  fs::create_directories(dir);
  for (int64_t t = 0; t < seq.length(); ++t) {
    char file[32];
    std::snprintf(file, sizeof(file), "%06lld.png", static_cast<long long>(t));
    write_image((dir / file).string(), seq.frames[t], bit_depth);
  }
}

void SyntheticSpec::validate() const {
  if (num_sequences < 1) throw ConfigError("synthetic.num_sequences must be >= 1");
  if (size < 16) throw ConfigError("synthetic.size must be >= 16");
  if (length < 1) throw ConfigError("synthetic.length must be >= 1");
  if (channels != 1 && channels != 3) throw ConfigError("synthetic.channels must be 1 or 3");
  if (min_sprites < 0 || max_sprites < min_sprites) {
    throw ConfigError("synthetic sprite count range is invalid");
  }
  if (min_sprite_size < 1 || max_sprite_size < min_sprite_size || max_sprite_size > size) {
    throw ConfigError("synthetic sprite size range is invalid");
  }
  if (max_speed < 0) throw ConfigError("synthetic.max_speed must be >= 0");
  for (const auto& s : sprites) {
    if (s.size < 1 || s.size > size || s.x < 0 || s.y < 0 || s.x > size - s.size ||
        s.y > size - s.size) {
      throw ConfigError("synthetic sprite does not fit inside the frame");
    }
    if (s.color.size() != 3) throw ConfigError("sprite color must have 3 components");
  }
}

torch::Tensor render_sprites(std::vector<Sprite> sprites, int64_t length, int64_t size,
                             int64_t channels) {
  auto frames = torch::zeros({length, channels, size, size}, torch::kFloat32);
  auto acc = frames.accessor<float, 4>();
  for (int64_t t = 0; t < length; ++t) {
    for (auto& s : sprites) {
      float color[3] = {static_cast<float>(s.color[0]), static_cast<float>(s.color[1]),
                        static_cast<float>(s.color[2])};
      if (channels == 1) {
        color[0] = (color[0] + color[1] + color[2]) / 3.0f;
      }
      for (int64_t dy = 0; dy < s.size; ++dy) {
        for (int64_t dx = 0; dx < s.size; ++dx) {
          if (!in_shape(s, dx, dy)) continue;
          for (int64_t c = 0; c < channels; ++c) {
            acc[t][c][s.y + dy][s.x + dx] = color[c];
          }
        }
      }
      bounce(s.x, s.vx, size - s.size);
      bounce(s.y, s.vy, size - s.size);
    }
  }
  return frames;
}

SequenceDataset make_synthetic_dataset(const SyntheticSpec& spec, int64_t window_length,
                                       TransformSpec transform) {
  spec.validate();
  if (spec.length < window_length) {
    throw ConfigError("synthetic.length " + std::to_string(spec.length) +
                      " is shorter than the window length " + std::to_string(window_length));
  }
  std::vector<FrameSequence> seqs;
  for (int64_t i = 0; i < spec.num_sequences; ++i) {
    std::mt19937_64 rng(mix_seed(spec.seed, static_cast<uint64_t>(i)));
    std::vector<Sprite> sprites = spec.sprites;
    if (sprites.empty()) {
      const auto count = uniform(rng, spec.min_sprites, spec.max_sprites);
      for (int64_t k = 0; k < count; ++k) {
        Sprite s;
        s.shape = static_cast<SpriteShape>(uniform(rng, 0, 2));
        s.size = uniform(rng, spec.min_sprite_size, spec.max_sprite_size);
        // 8-bit representable colours so written datasets reload exactly
        s.color = {uniform(rng, 64, 255) / 255.0, uniform(rng, 64, 255) / 255.0,
                   uniform(rng, 64, 255) / 255.0};
        s.x = uniform(rng, 0, spec.size - s.size);
        s.y = uniform(rng, 0, spec.size - s.size);
        s.vx = uniform(rng, -spec.max_speed, spec.max_speed);
        s.vy = uniform(rng, -spec.max_speed, spec.max_speed);
        sprites.push_back(s);
      }
    }
    seqs.push_back({render_sprites(sprites, spec.length, spec.size, spec.channels)});
  }
  return SequenceDataset::from_sequences(std::move(seqs), window_length, transform);
}

Window sample_window(const SequenceDataset& dataset, size_t sequence_index, int64_t start,
                     uint64_t salt) {
  if (sequence_index >= dataset.num_sequences()) {
    throw std::invalid_argument("sample_window: sequence index out of range");
  }
  const auto wl = dataset.window_length();
  if (start < 0 || start + wl > dataset.sequence_length(sequence_index)) {
    throw std::invalid_argument("sample_window: start index out of range");
  }
  const auto& tf = dataset.transform();
  auto x = dataset.frames(sequence_index, start, wl);
  const auto src_h = x.size(2);
  const auto src_w = x.size(3);

  if (tf.rescale == RescaleMode::ShorterSide) {
    const double scale = std::max(static_cast<double>(tf.height) / static_cast<double>(src_h),
                                  static_cast<double>(tf.width) / static_cast<double>(src_w));
    const auto new_h = std::max(tf.height, static_cast<int64_t>(std::lround(src_h * scale)));
    const auto new_w = std::max(tf.width, static_cast<int64_t>(std::lround(src_w * scale)));
    if (new_h != src_h || new_w != src_w) {
      x = F::interpolate(x, F::InterpolateFuncOptions()
                                .size(std::vector<int64_t>{new_h, new_w})
                                .mode(torch::kBilinear)
                                .align_corners(false))
              .clamp(0.0, 1.0);
    }
  } else if (src_h < tf.height || src_w < tf.width) {
    throw ConfigError("frames are smaller than the target size and rescaling is disabled");
  }

  const auto h = x.size(2);
  const auto w = x.size(3);
  CropRect rect{0, 0, tf.height, tf.width};
  if (tf.random_crop) {
    std::mt19937_64 rng(mix_seed(
        mix_seed(tf.seed, static_cast<uint64_t>(sequence_index)),
        mix_seed(static_cast<uint64_t>(start), salt)));
    rect.top = uniform(rng, 0, h - tf.height);
    rect.left = uniform(rng, 0, w - tf.width);
  } else {
    rect.top = (h - tf.height) / 2;
    rect.left = (w - tf.width) / 2;
  }
  if (rect.top != 0 || rect.left != 0 || h != tf.height || w != tf.width) {
    x = x.narrow(2, rect.top, tf.height).narrow(3, rect.left, tf.width);
  }

  Window out;
  out.sequence.frames = x.contiguous();
  out.crops.assign(static_cast<size_t>(wl), rect);
  for (int64_t i = 0; i < wl; ++i) {
    out.frame_indices.push_back(start + i);
  }
  return out;
}

}  // namespace vidpred
