#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "vidpred/types.hpp"

namespace vidpred {

enum class RescaleMode {
  /// Scale so the shorter side matches the target, then crop.
  ShorterSide,
  /// Crop directly from the source resolution.
  None,
};

struct TransformSpec {
  int64_t height = 64;
  int64_t width = 64;
  RescaleMode rescale = RescaleMode::ShorterSide;
  bool random_crop = true;
  uint64_t seed = 0;

  bool operator==(const TransformSpec&) const = default;
};

struct CropRect {
  int64_t top = 0;
  int64_t left = 0;
  int64_t height = 0;
  int64_t width = 0;

  bool operator==(const CropRect&) const = default;
};

struct DirectoryLayout {
  int64_t window_length = 7;
  TransformSpec transform;
  std::vector<std::string> extensions = {".png", ".jpg", ".jpeg", ".bmp", ".ppm"};
};

class SequenceDataset;
SequenceDataset load_directory_dataset(const std::filesystem::path& root,
                                       const DirectoryLayout& layout);

/// A set of frame sequences, either held in memory or decoded lazily from
/// image files, plus the window length and transform used for sampling.
class SequenceDataset {
 public:
  SequenceDataset() = default;

  static SequenceDataset from_sequences(std::vector<FrameSequence> sequences,
                                        int64_t window_length, TransformSpec transform,
                                        std::vector<std::string> names = {});

  size_t num_sequences() const { return sources_.size(); }
  int64_t sequence_length(size_t index) const;
  const std::string& sequence_name(size_t index) const;
  int64_t window_length() const { return window_length_; }
  const TransformSpec& transform() const { return transform_; }
  /// Number of distinct (sequence, start) windows.
  int64_t num_windows() const;
  /// Messages about sequences excluded at load time.
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// Raw frames [first, first + count) of a sequence, untransformed.
  torch::Tensor frames(size_t index, int64_t first, int64_t count) const;
  FrameSequence sequence(size_t index) const;

  /// Same data with a different window length or transform.
  SequenceDataset with_window_length(int64_t window_length) const;
  SequenceDataset with_transform(TransformSpec transform) const;

 private:
  friend SequenceDataset load_directory_dataset(const std::filesystem::path&,
                                                const DirectoryLayout&);

  struct Source {
    std::string name;
    std::vector<std::filesystem::path> files;
    torch::Tensor frames;  // T x C x H x W when held in memory
    int64_t length = 0;
  };

  std::vector<Source> sources_;
  int64_t window_length_ = 1;
  TransformSpec transform_;
  std::vector<std::string> warnings_;
};

/// Loads root/<sequence>/<index>.<ext> (declared above); frames are ordered by
/// the numeric value of the file stem. Sequences shorter than the window are
/// skipped with a warning.

/// Image files in dir whose stem is a decimal index, sorted by that index.
std::vector<std::filesystem::path> list_frame_files(const std::filesystem::path& dir,
                                                    const std::vector<std::string>& extensions);

/// Reads one sequence directory (same naming rules) into memory.
FrameSequence load_sequence_directory(
    const std::filesystem::path& dir,
    const std::vector<std::string>& extensions = {".png", ".jpg", ".jpeg", ".bmp", ".ppm"});

/// Writes a sequence as root/name/000000.png, 000001.png, ...
void write_sequence_directory(const std::filesystem::path& root, const std::string& name,
                              const FrameSequence& seq, int bit_depth = 8);

enum class SpriteShape { Square, Disk, Cross };

struct Sprite {
  SpriteShape shape = SpriteShape::Square;
  int64_t size = 6;
  std::vector<double> color = {1.0, 1.0, 1.0};
  int64_t x = 0;
  int64_t y = 0;
  int64_t vx = 0;
  int64_t vy = 0;

  bool operator==(const Sprite&) const = default;
};

struct SyntheticSpec {
  int64_t num_sequences = 8;
  int64_t length = 20;
  int64_t size = 32;
  int64_t channels = 3;
  int64_t min_sprites = 1;
  int64_t max_sprites = 3;
  int64_t min_sprite_size = 4;
  int64_t max_sprite_size = 8;
  int64_t max_speed = 2;
  /// When nonempty every sequence uses exactly these sprites.
  std::vector<Sprite> sprites;
  uint64_t seed = 0;

  void validate() const;
  bool operator==(const SyntheticSpec&) const = default;
};

/// Constant-velocity sprites on a black background, bouncing off the borders.
/// Positions and velocities are integral, so motion is an exact pixel shift.
SequenceDataset make_synthetic_dataset(const SyntheticSpec& spec, int64_t window_length,
                                       TransformSpec transform);

/// Renders the frames of one sprite sequence.
torch::Tensor render_sprites(std::vector<Sprite> sprites, int64_t length, int64_t size,
                             int64_t channels);

struct Window {
  FrameSequence sequence;
  /// One rectangle per frame; they are always identical.
  std::vector<CropRect> crops;
  std::vector<int64_t> frame_indices;
};

/// Contiguous window of window_length frames starting at `start`, rescaled and
/// cropped with one rectangle shared by every frame. The crop is a pure
/// function of (transform seed, sequence index, start, salt).
Window sample_window(const SequenceDataset& dataset, size_t sequence_index, int64_t start,
                     uint64_t salt = 0);

/// Deterministic 64-bit mixing used to split seeds.
uint64_t mix_seed(uint64_t a, uint64_t b);

}  // namespace vidpred
