#pragma once

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ocov/io.hpp"

namespace testing {

namespace fs = std::filesystem;

/// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> seq{0};
    path_ = fs::temp_directory_path() /
            ("ocov-test-" + std::to_string(::getpid()) + "-" + std::to_string(seq.fetch_add(1)));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline void write(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << content;
}

inline void write_gz(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  ocov::io::GzipWriter gz(p);
  gz.write(content);
  gz.close();
}

inline std::string read(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Every regular file under `root`, relative path -> bytes.
inline std::vector<std::pair<std::string, std::string>> tree(const fs::path& root) {
  std::vector<std::pair<std::string, std::string>> out;
  for (auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.emplace_back(fs::relative(e.path(), root).string(), read(e.path()));
  std::sort(out.begin(), out.end());
  return out;
}

inline fs::path fixtures() { return fs::path(OCOV_TEST_FIXTURES); }

/// Copy of the micro corpus (without its expected outputs) under `dir`.
inline fs::path copy_micro(const fs::path& dir) {
  const auto root = dir / "micro";
  fs::copy(fixtures() / "micro", root, fs::copy_options::recursive);
  fs::remove_all(root / "expected");
  return root;
}

/// Files under expected/ that differ from, or are missing in, `run_dir`.
inline std::vector<std::string> golden_mismatches(const fs::path& run_dir) {
  std::vector<std::string> bad;
  const auto expected = fixtures() / "micro/expected";
  for (auto& [rel, bytes] : tree(expected))
    if (!fs::exists(run_dir / rel) || read(run_dir / rel) != bytes) bad.push_back(rel);
  return bad;
}

/// Exit status of the CLI with `args`; output goes to `log`.
inline int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("'") + OCOV_CLI + "' " + args + " >'" + log.string() + "' 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

/// Small deterministic generator for property tests.
struct Gen {
  explicit Gen(std::uint64_t seed) : eng(seed) {}
  std::mt19937_64 eng;
  std::uint64_t below(std::uint64_t n) { return n ? eng() % n : 0; }
  bool coin(double p = 0.5) { return static_cast<double>(eng() >> 11) * 0x1.0p-53 < p; }
  std::string digits(std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += static_cast<char>('0' + below(10));
    return s;
  }
  std::string pick(const std::vector<std::string>& v) { return v[below(v.size())]; }
};

}  // namespace testing
