#pragma once

#include <atomic>
#include <filesystem>
#include <optional>
#include <string>
#include <unistd.h>

#include "fruitscan/error.hpp"

namespace testing {

// Kind of the fruitscan::Error raised by f, or nullopt if it returns.
template <typename F>
std::optional<fruitscan::ErrorKind> error_kind(F&& f) {
  try {
    f();
  } catch (const fruitscan::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

template <typename F>
std::string error_message(F&& f) {
  try {
    f();
  } catch (const fruitscan::Error& e) {
    return e.what();
  }
  return {};
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("fruitscan-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
