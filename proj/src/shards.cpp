#include "ocov/shards.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "ocov/errors.hpp"
#include "ocov/io.hpp"

namespace ocov::shards {

fs::path part_name(const fs::path& work_dir, const fs::path& shard, std::size_t ordinal) {
  std::error_code ec;
  const auto size = fs::file_size(shard, ec);
  const auto mtime = fs::last_write_time(shard, ec).time_since_epoch().count();
  std::uint64_t h = io::fnv1a(fs::absolute(shard).string());
  h = io::fnv1a(std::to_string(size) + ":" + std::to_string(mtime), h);
  char prefix[16];
  std::snprintf(prefix, sizeof prefix, "%06zu", ordinal);
  return work_dir / (std::string("part-") + prefix + "-" + io::hex64(h) + ".csv");
}

Runner::Runner(std::vector<fs::path> shards, RunOptions opts) : shards_(std::move(shards)), opts_(std::move(opts)) {
  if (opts_.work_dir.empty()) {
    static std::atomic<unsigned> counter{0};
    work_dir_ = fs::temp_directory_path() /
                ("ocov-work-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
    fs::remove_all(work_dir_);
    owns_work_dir_ = true;
  } else {
    work_dir_ = opts_.work_dir;
  }
  fs::create_directories(work_dir_);
}

Runner::~Runner() {
  if (owns_work_dir_) {
    std::error_code ec;
    fs::remove_all(work_dir_, ec);
  }
}

RunReport Runner::run(const ShardFn& fn) {
  RunReport report;
  std::vector<std::size_t> order(shards_.size());
  std::iota(order.begin(), order.end(), 0);
  if (opts_.order == Order::Reversed) {
    std::reverse(order.begin(), order.end());
  } else if (opts_.order == Order::Shuffled) {
    std::mt19937_64 rng(opts_.shuffle_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }

  for (std::size_t i = 0; i < shards_.size(); ++i) report.parts.push_back(part_name(work_dir_, shards_[i], i));

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::atomic<std::size_t> resumed{0};
  std::exception_ptr first_error;
  std::mutex error_mu;

  auto worker = [&] {
    for (;;) {
      if (failed.load()) return;
      const std::size_t k = next.fetch_add(1);
      if (k >= order.size()) return;
      const std::size_t i = order[k];
      if (fs::exists(report.parts[i])) {
        ++resumed;
        continue;
      }
      try {
        io::AtomicFile part(report.parts[i]);
        fn(shards_[i], part.stream());
        part.commit();
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        failed = true;
        return;
      }
    }
  };

  const int n = std::max(1, std::min<int>(opts_.workers, static_cast<int>(std::max<std::size_t>(order.size(), 1))));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  report.resumed = resumed.load();

  if (first_error) {
    std::size_t done = 0;
    for (auto& p : report.parts)
      if (fs::exists(p)) ++done;
    const std::string resume = " (" + std::to_string(done) + "/" + std::to_string(shards_.size()) +
                               " shards complete in " + work_dir_.string() + "; rerun to resume)";
    try {
      std::rethrow_exception(first_error);
    } catch (const InputError& e) {
      throw InputError(std::string(e.what()) + resume);
    } catch (const std::exception& e) {
      throw RuntimeFailure(std::string(e.what()) + resume);
    }
  }
  return report;
}

}  // namespace ocov::shards
