// Command-line front end: load a run config, drive the synthesis loop, and
// emit a machine-readable report plus optional plot data.
//
// Exit codes: 0 certified candidate, 2 no candidate in the hypothesis space,
// 3 neither delta-provable nor falsified, 4 iteration limit, 5 resource
// limit, 1 usage or runtime error.

#include <lyacert/cegis.hpp>
#include <lyacert/report.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{"Lyapunov function synthesis for black-box dynamics"};

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::uint64_t> max_samples;
  std::string out_dir;
  std::string verdict_trace_path;
  bool emit_triangulation = false;
  bool no_timing = false;
  long validate_trials = 10000;

  app.add_option("--config", config_path, "Path to the run config (JSON)")->required();
  app.add_option("--seed", seed, "Override the validation sampling seed");
  app.add_option("--jobs", jobs, "Verification worker count");
  app.add_option("--out", out_dir, "Directory for report.json and plot data");
  app.add_flag("--emit-triangulation", emit_triangulation,
               "Also write samples.csv and simplices.csv");
  app.add_option("--validate-trials", validate_trials,
                 "Random states for the white-box validator (0 disables)");
  app.add_option("--max-samples", max_samples, "Override the oracle sample budget");
  app.add_option("--verdict-trace", verdict_trace_path,
                 "Write per-region verdicts as JSON lines");
  app.add_flag("--no-timing", no_timing,
               "Zero the timing field for byte-comparable reports");
  CLI11_PARSE(app, argc, argv);

  try {
    lyacert::CegisConfig cfg = lyacert::parse_config_file(config_path);
    if (seed) cfg.seed = *seed;
    if (jobs) cfg.workers = *jobs;
    if (max_samples) cfg.sample_budget = *max_samples;

    std::ofstream trace_file;
    std::ostream* trace = nullptr;
    if (!verdict_trace_path.empty()) {
      trace_file.open(verdict_trace_path);
      if (!trace_file) {
        std::cerr << "error: cannot open " << verdict_trace_path << "\n";
        return 1;
      }
      trace = &trace_file;
    }

    const lyacert::RunArtifacts artifacts = lyacert::run_with_artifacts(cfg, trace);
    const lyacert::CegisOutcome& outcome = artifacts.outcome;

    lyacert::RunReport report = lyacert::build_report(cfg, outcome, !no_timing);
    if (outcome.candidate) {
      const lyacert::RegionOfInterest roi =
          cfg.roi ? *cfg.roi : lyacert::find_benchmark(cfg.system_name)->default_roi();
      report.boa = lyacert::boa_level(*outcome.candidate, roi);
      if (validate_trials > 0)
        report.validation = lyacert::validate_candidate(
            *outcome.candidate, *lyacert::find_benchmark(cfg.system_name), roi,
            static_cast<std::size_t>(validate_trials), cfg.seed);
    }

    std::cout << "outcome: " << lyacert::outcome_name(outcome.kind) << "\n"
              << "iterations: " << outcome.stats.k
              << "  samples(learn): " << outcome.stats.samples_learner
              << "  samples(total): " << outcome.stats.samples_total
              << "  simplices: " << outcome.stats.simplices << "\n"
              << "oracle evaluations: " << outcome.stats.oracle_samples
              << "  time: " << outcome.stats.seconds << " s\n";
    if (outcome.candidate) {
      const lyacert::Matrix th = lyacert::theta_matrix(*outcome.candidate);
      std::cout << "candidate (" << outcome.candidate->kind.name() << "), Theta =\n"
                << th << "\n";
      if (report.boa) std::cout << "basin level: V(x) <= " << *report.boa << "\n";
      if (report.validation)
        std::cout << "validation: " << report.validation->violations << " violations in "
                  << report.validation->states_checked
                  << " states, worst Lie derivative " << report.validation->worst_lie
                  << "\n";
    }

    if (!out_dir.empty()) {
      const auto files =
          lyacert::export_artifacts(report, artifacts, out_dir, emit_triangulation);
      for (const auto& f : files) std::cout << "wrote " << f << "\n";
    }
    return lyacert::exit_code(outcome.kind);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
