#pragma once

#include <filesystem>
#include <string>

#include <unistd.h>

namespace trajlab::test {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("trajlab_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
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
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  static int& counter() {
    static int n = 0;
    return n;
  }
  std::filesystem::path path_;
};

}  // namespace trajlab::test

// Runs a statement and checks it throws trajlab::Error of the given kind.
#define CHECK_ERROR_KIND(stmt, k)                                   \
  do {                                                              \
    bool thrown_ = false;                                           \
    try {                                                           \
      stmt;                                                         \
    } catch (const ::trajlab::Error& e_) {                          \
      thrown_ = true;                                               \
      CHECK_MESSAGE(e_.kind() == (k), "unexpected kind: ", e_.what()); \
    }                                                               \
    CHECK_MESSAGE(thrown_, "no trajlab::Error from " #stmt);        \
  } while (0)
