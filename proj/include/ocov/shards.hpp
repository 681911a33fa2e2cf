#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

namespace ocov::shards {

namespace fs = std::filesystem;

/// Processing order of shards. The merged result never depends on it; the
/// option exists so that claim can be tested.
enum class Order { Sorted, Reversed, Shuffled };

struct RunOptions {
  int workers = 1;
  Order order = Order::Sorted;
  std::uint64_t shuffle_seed = 0;
  /// Where per-shard part files live. A part file that already exists marks
  /// its shard as complete, which is what makes an interrupted run
  /// resumable. Empty means a private temporary directory.
  fs::path work_dir;
};

/// Writes the part for one shard to `part` (already opened atomically by
/// the runner; returning normally commits it).
using ShardFn = std::function<void(const fs::path& shard, std::ostream& part)>;

struct RunReport {
  std::vector<fs::path> parts;  // in sorted shard order
  std::size_t resumed = 0;      // shards skipped because their part existed
};

/// Runs `fn` over every shard on a pool of `workers` threads. On failure the
/// first error is rethrown after all workers stop; completed parts stay on
/// disk so a rerun resumes after them.
class Runner {
 public:
  Runner(std::vector<fs::path> shards, RunOptions opts);
  ~Runner();
  Runner(const Runner&) = delete;
  Runner& operator=(const Runner&) = delete;

  RunReport run(const ShardFn& fn);

 private:
  std::vector<fs::path> shards_;
  RunOptions opts_;
  fs::path work_dir_;
  bool owns_work_dir_ = false;
};

/// Part file name for a shard: stable across runs for an unchanged shard
/// (path, size and modification time).
fs::path part_name(const fs::path& work_dir, const fs::path& shard, std::size_t ordinal);

}  // namespace ocov::shards
