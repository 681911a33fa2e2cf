#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace ocov::io {

namespace fs = std::filesystem;

/// Sequential reader over a plain or gzip-compressed file. Compression is
/// detected from the content, not the file name.
class InputFile {
 public:
  explicit InputFile(const fs::path& path);
  ~InputFile();
  InputFile(const InputFile&) = delete;
  InputFile& operator=(const InputFile&) = delete;

  /// Returns the number of bytes read; 0 at end of file. Throws InputError
  /// on a decompression or read failure.
  std::size_t read(char* buf, std::size_t cap);

  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
  void* handle_;  // gzFile
};

/// Writes to `<path>.tmp` and renames over `path` on commit(). An
/// uncommitted writer removes its temp file on destruction.
class AtomicFile {
 public:
  explicit AtomicFile(fs::path path);
  ~AtomicFile();
  AtomicFile(const AtomicFile&) = delete;
  AtomicFile& operator=(const AtomicFile&) = delete;

  std::ostream& stream() { return out_; }
  void commit();

 private:
  fs::path path_;
  fs::path tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

/// Gzip writer with a zero mtime header, so identical content always
/// produces identical bytes.
class GzipWriter {
 public:
  explicit GzipWriter(const fs::path& path);
  ~GzipWriter();
  GzipWriter(const GzipWriter&) = delete;
  GzipWriter& operator=(const GzipWriter&) = delete;

  void write(std::string_view data);
  void close();

 private:
  fs::path path_;
  void* handle_;
};

/// A directory populated in a sibling temp location and moved into place by
/// commit(), replacing any previous content.
class StagingDir {
 public:
  explicit StagingDir(fs::path final_dir);
  ~StagingDir();
  StagingDir(const StagingDir&) = delete;
  StagingDir& operator=(const StagingDir&) = delete;

  const fs::path& path() const { return tmp_; }
  fs::path file(std::string_view name) const { return tmp_ / name; }
  void commit();

 private:
  fs::path final_;
  fs::path tmp_;
  bool committed_ = false;
};

/// Data files under `root` (a single file is returned as-is). Only *.csv and
/// *.csv.gz are considered inside directories; result is sorted by path.
std::vector<fs::path> list_shards(const fs::path& root);

std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 14695981039346656037ull);
std::uint64_t file_digest(const fs::path& path);
std::string hex64(std::uint64_t v);

std::string read_text(const fs::path& path);
void write_text_atomic(const fs::path& path, std::string_view content);

}  // namespace ocov::io
