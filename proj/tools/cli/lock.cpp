#include "lock.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <string>

#include "vidpred/errors.hpp"

namespace vidpred::cli {

OutputLock::OutputLock(const std::filesystem::path& dir) : path_(dir / ".vidpred.lock") {
  std::filesystem::create_directories(dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    throw IoError("output directory " + dir.string() + " is in use (lock file " +
                  path_.string() + " exists; delete it if no run is active)");
  }
  const auto pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

OutputLock::~OutputLock() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

}  // namespace vidpred::cli
