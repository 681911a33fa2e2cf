#include "ocov/io.hpp"

#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "ocov/errors.hpp"

namespace ocov::io {

InputFile::InputFile(const fs::path& path) : path_(path), handle_(nullptr) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (f == nullptr) throw InputError("cannot open " + path.string());
  gzbuffer(f, 1 << 20);
  handle_ = f;
}

InputFile::~InputFile() {
  if (handle_ != nullptr) gzclose(static_cast<gzFile>(handle_));
}

std::size_t InputFile::read(char* buf, std::size_t cap) {
  const int n = gzread(static_cast<gzFile>(handle_), buf, static_cast<unsigned>(cap));
  if (n < 0) {
    int errnum = 0;
    const char* msg = gzerror(static_cast<gzFile>(handle_), &errnum);
    throw InputError("read failure in " + path_.string() + ": " + (msg ? msg : "unknown"));
  }
  return static_cast<std::size_t>(n);
}

namespace {

fs::path temp_sibling(const fs::path& p, std::string_view tag) {
  return p.parent_path() / (p.filename().string() + std::string(tag) + std::to_string(::getpid()));
}

}  // namespace

AtomicFile::AtomicFile(fs::path path) : path_(std::move(path)), tmp_(temp_sibling(path_, ".tmp-")) {
  if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
  out_.open(tmp_, std::ios::binary | std::ios::trunc);
  if (!out_) throw RuntimeFailure("cannot write " + tmp_.string());
}

AtomicFile::~AtomicFile() {
  if (!committed_) {
    out_.close();
    std::error_code ec;
    fs::remove(tmp_, ec);
  }
}

void AtomicFile::commit() {
  out_.flush();
  if (!out_) throw RuntimeFailure("write failure on " + tmp_.string());
  out_.close();
  fs::rename(tmp_, path_);
  committed_ = true;
}

GzipWriter::GzipWriter(const fs::path& path) : path_(path), handle_(nullptr) {
  gzFile f = gzopen(path.c_str(), "wb6");
  if (f == nullptr) throw RuntimeFailure("cannot write " + path.string());
  handle_ = f;
}

GzipWriter::~GzipWriter() { close(); }

void GzipWriter::write(std::string_view data) {
  if (data.empty()) return;
  if (gzwrite(static_cast<gzFile>(handle_), data.data(), static_cast<unsigned>(data.size())) == 0)
    throw RuntimeFailure("gzip write failure on " + path_.string());
}

void GzipWriter::close() {
  if (handle_ != nullptr) {
    gzclose(static_cast<gzFile>(handle_));
    handle_ = nullptr;
  }
}

StagingDir::StagingDir(fs::path final_dir)
    : final_(std::move(final_dir)), tmp_(temp_sibling(final_, ".staging-")) {
  fs::remove_all(tmp_);
  fs::create_directories(tmp_);
}

StagingDir::~StagingDir() {
  if (!committed_) {
    std::error_code ec;
    fs::remove_all(tmp_, ec);
  }
}

void StagingDir::commit() {
  if (fs::exists(final_)) {
    const fs::path old = temp_sibling(final_, ".old-");
    fs::remove_all(old);
    fs::rename(final_, old);
    fs::rename(tmp_, final_);
    fs::remove_all(old);
  } else {
    fs::rename(tmp_, final_);
  }
  committed_ = true;
}

std::vector<fs::path> list_shards(const fs::path& root) {
  if (!fs::exists(root)) throw InputError("no such input: " + root.string());
  if (fs::is_regular_file(root)) return {root};
  std::vector<fs::path> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    auto ends_with = [&](std::string_view suffix) {
      return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends_with(".csv") || ends_with(".csv.gz")) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::uint64_t fnv1a(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::uint64_t h = 14695981039346656037ull;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h = fnv1a(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())), h);
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_atomic(const fs::path& path, std::string_view content) {
  AtomicFile f(path);
  f.stream() << content;
  f.commit();
}

}  // namespace ocov::io
