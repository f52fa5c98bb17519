#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

namespace test_support {

inline std::string fixture(const std::string& relative) { return std::string(BORROW_FIXTURE_DIR) + "/" + relative; }

inline bool have_radon() { return std::filesystem::exists(fixture("radon/radon.csv")); }

/// Fresh directory under the system temp path, removed on destruction.
class ScratchDir {
 public:
  ScratchDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("borrow_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name, const std::string& contents = {}) const {
    const auto p = (path_ / name).string();
    if (!contents.empty()) std::ofstream(p, std::ios::binary) << contents;
    return p;
  }

 private:
  std::filesystem::path path_;
};

}  // namespace test_support
