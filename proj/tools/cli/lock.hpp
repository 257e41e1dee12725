#pragma once

#include <filesystem>

namespace vidpred::cli {

/// Exclusive marker file inside an output directory, removed on destruction.
/// A second run targeting the same directory fails with IoError.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace vidpred::cli
