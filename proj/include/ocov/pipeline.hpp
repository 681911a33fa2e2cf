#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ocov/enrich.hpp"
#include "ocov/report.hpp"

namespace ocov::pipeline {

namespace fs = std::filesystem;

/// Directory holding the shipped priority tables, type mapping, type labels
/// and default adapter.
fs::path default_data_dir();

struct CrossrefSettings {
  enrich::CrossrefConfig client;
  fs::path fixtures;  // replay recorded responses instead of the network
};

/// One declarative run configuration. Relative paths are resolved against
/// the directory of the configuration file.
struct Config {
  fs::path source;  // the file it was loaded from, if any
  fs::path iris_dump;
  fs::path adapter;
  fs::path priority_tables;
  fs::path type_mapping;
  fs::path type_labels;
  fs::path meta_dump;
  fs::path index_dump;
  fs::path run_dir;
  int cutoff_year = 2025;
  int from_year = 1953;
  int workers = 1;
  std::optional<int> max_plausible_year;
  std::vector<std::string> completeness_fields;
  bool isbn_checksum = false;
  std::vector<report::ExternalSource> externals;
  CrossrefSettings crossref;

  int max_year() const { return max_plausible_year.value_or(cutoff_year + 1); }

  /// Throws ConfigError on malformed JSON, unknown keys or wrong types.
  static Config load(const fs::path& path);
  static Config from_json(const std::string& text, const fs::path& base_dir);
};

/// Command-line values that win over the configuration file.
struct Overrides {
  std::optional<int> cutoff_year;
  std::optional<int> workers;
  std::optional<fs::path> run_dir;
  std::optional<std::string> mailto;
  std::optional<int> rate_limit;
  std::optional<double> score_threshold;
  std::optional<fs::path> cache_dir;
};

void apply(Config& config, const Overrides& o);

enum class Stage { Trim, Validate, Dedup, Match, Scan, Enrich, Report };

inline constexpr Stage kAllStages[] = {Stage::Trim, Stage::Validate, Stage::Dedup, Stage::Match,
                                       Stage::Scan, Stage::Enrich,   Stage::Report};

std::string_view stage_name(Stage s);
std::optional<Stage> parse_stage(std::string_view name);
/// Stages whose completed output `s` reads.
std::vector<Stage> upstream(Stage s);

enum class Status { Pending, Complete, Failed };
std::string_view status_name(Status s);

struct StageRecord {
  Status status = Status::Pending;
  std::string input_digest;
  std::map<std::string, std::string> outputs;  // file name -> content digest
  std::string started;
  std::string finished;
  std::string error;
};

/// run_dir/manifest.json
struct Manifest {
  std::string run_id;
  std::map<std::string, std::string> parameters;
  std::map<Stage, StageRecord> stages;

  static Manifest load_or_create(const fs::path& run_dir);
  void save(const fs::path& run_dir) const;
  const StageRecord& at(Stage s) const;
};

struct StageRun {
  Stage stage;
  bool up_to_date = false;  // skipped: inputs unchanged and outputs intact
};

/// Runs one stage ("all" runs trim, validate, dedup, match, scan, report).
/// Throws ConfigError when an upstream stage is not complete.
std::vector<StageRun> run(std::string_view name, const Config& config, std::ostream& log);

/// Maps the error classes to process exit codes.
int exit_code_for(const std::exception& e);

}  // namespace ocov::pipeline
