#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ocov/pid.hpp"
#include "ocov/pipeline.hpp"

namespace ocov::harness {

namespace fs = std::filesystem;

struct GroupSpec {
  pid::Scheme scheme = pid::Scheme::Doi;
  int size = 2;
};

/// Knobs of a synthetic corpus. Rates are probabilities in [0, 1].
struct SynthSpec {
  std::uint64_t seed = 1;
  std::size_t records = 200;
  double no_pid_rate = 0.3;
  double invalid_only_rate = 0.03;
  std::array<double, 3> scheme_weights = {0.7, 0.15, 0.15};  // selected scheme, doi/pmid/isbn
  double extra_id_rate = 0.15;    // an additional valid id of a later scheme
  double invalid_rate = 0.1;      // an invalid id of an earlier scheme (exercises fallback)
  double duplicate_rate = 0.1;    // a record reuses an earlier pid of its scheme
  std::vector<GroupSpec> duplicate_groups;
  double meta_coverage = 0.7;
  double collision_rate = 0.05;   // a second Meta row with another OMID for the same pid
  double post_cutoff_rate = 0.03;
  double meta_missing_year_rate = 0.05;
  double type_mismatch_rate = 0.1;
  std::size_t meta_noise_rows = 50;
  std::size_t edges = 500;
  double both_ends_rate = 0.2;
  double undated_edge_rate = 0.05;
  std::size_t meta_shards = 3;
  std::size_t index_shards = 3;
  int cutoff_year = 2025;
  std::vector<std::string> external_sources = {"Scopus", "Web of Science"};
  double external_coverage = 0.8;

  /// Unknown keys and out-of-range values are ConfigErrors.
  static SynthSpec from_json(const std::string& text);
  static SynthSpec load(const fs::path& path);
  std::string to_json() const;
};

/// Canonical, order-free view of every stage's output:
/// stage -> table -> sorted lines.
using Snapshot = std::map<std::string, std::map<std::string, std::vector<std::string>>>;

inline constexpr std::string_view kSnapshotStages[] = {"trim", "validate", "dedup", "match", "scan", "report"};

void normalize(Snapshot& s);
std::string to_json(const Snapshot& s);
Snapshot snapshot_from_json(const std::string& text);

/// Writes the corpus (CRIS dump, Meta and Index shards, external counts,
/// config.json, spec.json) and ledger.json, the expected snapshot derived
/// while constructing the data. Refuses a non-empty `out_dir`.
Snapshot generate(const SynthSpec& spec, const fs::path& out_dir);

/// Naive in-memory recomputation of every stage straight from the corpus
/// files named by `config`.
Snapshot oracle(const pipeline::Config& config);

/// The same canonical view, read from a pipeline run directory.
Snapshot snapshot_run(const fs::path& run_dir);

struct Divergence {
  std::string stage;
  std::string table;
  std::vector<std::string> missing;     // expected, not produced
  std::vector<std::string> unexpected;  // produced, not expected
};

/// First stage (in pipeline order) whose tables differ.
std::optional<Divergence> first_divergence(const Snapshot& expected, const Snapshot& actual);

inline constexpr std::size_t kOracleRowLimit = 100000;

/// Rows of the largest single input (dump file, or all shards of a dump).
std::size_t largest_input_rows(const pipeline::Config& config);

struct VerifyResult {
  bool ok = false;
  std::optional<Divergence> vs_oracle;
  std::optional<Divergence> vs_ledger;
  bool ledger_checked = false;
  fs::path run_dir;
};

/// Runs the pipeline into a scratch run directory and compares it with the
/// oracle and, when `ledger.json` sits next to the config, with the ledger.
/// Oversized corpora are a ConfigError.
VerifyResult verify(const pipeline::Config& config, std::ostream& log);

void print_divergence(std::ostream& out, const std::string& against, const Divergence& d);

}  // namespace ocov::harness
