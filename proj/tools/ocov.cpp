#include <CLI11.hpp>
#include <iostream>

#include "ocov/errors.hpp"
#include "ocov/harness.hpp"
#include "ocov/pipeline.hpp"

namespace {

using namespace ocov;

const char* kStages = "trim, validate, dedup, match, scan, enrich, report or all";

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coverage of a CRIS dump in OpenCitations Meta and Index"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ocov 0.1.0");

  std::string config_path;
  std::string stage;
  std::optional<int> cutoff, workers, rate;
  std::optional<std::string> run_dir, mailto, cache_dir;
  std::optional<double> threshold;

  auto* run = app.add_subcommand("run", "Run one stage (or all) of the pipeline");
  run->add_option("stage", stage, kStages)->required();
  run->add_option("--config", config_path, "Run configuration (JSON)")->required();
  run->add_option("--cutoff-year", cutoff, "Keep entities and citations up to this year");
  run->add_option("--workers", workers, "Worker threads for sharded stages")->check(CLI::Range(1, 1024));
  run->add_option("--run-dir", run_dir, "Directory for stage outputs and the manifest");
  run->add_option("--mailto", mailto, "Contact address sent to Crossref (enrich)");
  run->add_option("--rate", rate, "Crossref requests per second (enrich)")->check(CLI::Range(1, 1000));
  run->add_option("--threshold", threshold, "Minimum Crossref relevance score (enrich)");
  run->add_option("--cache-dir", cache_dir, "Crossref response cache (enrich)");

  auto* verify = app.add_subcommand("verify", "Run the pipeline and diff every stage against the oracle");
  verify->add_option("--config", config_path, "Run configuration (JSON)")->required();
  verify->add_option("--workers", workers, "Worker threads for sharded stages")->check(CLI::Range(1, 1024));

  std::string spec_path, out_dir;
  auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic corpus with its expected outputs");
  synth->add_option("--spec", spec_path, "Corpus specification (JSON)")->required();
  synth->add_option("--out", out_dir, "Empty output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*synth) {
      auto spec = harness::SynthSpec::load(spec_path);
      auto ledger = harness::generate(spec, out_dir);
      std::size_t lines = 0;
      for (auto& [s, tables] : ledger)
        for (auto& [t, l] : tables) lines += l.size();
      std::cout << "corpus written to " << out_dir << " (" << spec.records << " records, ledger " << lines
                << " lines)\n";
      return kExitOk;
    }

    auto config = pipeline::Config::load(config_path);
    pipeline::Overrides o;
    o.cutoff_year = cutoff;
    o.workers = workers;
    if (run_dir) o.run_dir = *run_dir;
    o.mailto = mailto;
    o.rate_limit = rate;
    o.score_threshold = threshold;
    if (cache_dir) o.cache_dir = *cache_dir;
    pipeline::apply(config, o);

    if (*run) {
      auto runs = pipeline::run(stage, config, std::cout);
      for (auto& r : runs)
        std::cout << pipeline::stage_name(r.stage) << ": " << (r.up_to_date ? "up to date" : "complete") << '\n';
      return kExitOk;
    }

    auto result = harness::verify(config, std::cout);
    if (result.vs_oracle) harness::print_divergence(std::cout, "oracle", *result.vs_oracle);
    if (result.vs_ledger) harness::print_divergence(std::cout, "ledger", *result.vs_ledger);
    if (result.ok) {
      std::cout << "verify: no differences against the oracle" << (result.ledger_checked ? " or the ledger" : "")
                << '\n';
      return kExitOk;
    }
    std::cout << "verify: outputs kept in " << result.run_dir.string() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pipeline::exit_code_for(e);
  }
}
