#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tlfuzz/config.hpp"
#include "tlfuzz/harness.hpp"
#include "tlfuzz/novelty.hpp"
#include "tlfuzz/raftlite.hpp"
#include "tlfuzz/report.hpp"

namespace {

// Exit codes: 0 success, 2 configuration error, 3 replay divergence,
// 4 budget exhausted with oracle findings present.
constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kDivergence = 3;
constexpr int kFindings = 4;

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

int cmd_run(const std::string& config_path, std::uint64_t seed_override, bool has_seed,
            std::int64_t budget_override, const std::string& out_dir, bool baseline,
            int trace_flag, int dot_steps) {
  tlfuzz::ParsedConfig parsed = tlfuzz::load_config_file(config_path);
  std::uint64_t seed = has_seed ? seed_override : parsed.seed;
  if (budget_override > 0) parsed.cfg.budget_steps = budget_override;
  if (trace_flag >= 0) parsed.cfg.emit_trace = trace_flag != 0;

  tlfuzz::CampaignMode mode = baseline ? tlfuzz::CampaignMode::RandomBaseline
                                       : tlfuzz::CampaignMode::Guided;
  tlfuzz::WindowHook hook;
  tlfuzz::InstrumentationRegistry reg = tlfuzz::InstrumentationRegistry::standard();
  if (dot_steps > 0) {
    std::filesystem::create_directories(out_dir);
    hook = [&, dots = 0](int schedule, int step,
                         const tlfuzz::TimelineGraph& g) mutable {
      if (dots >= dot_steps) return;
      ++dots;
      write_file(out_dir + "/timeline_s" + std::to_string(schedule) + "_w" +
                     std::to_string(step) + ".dot",
                 g.to_dot([&](const tlfuzz::EventKind& k) { return reg.label_for(k); }));
    };
  }

  tlfuzz::CampaignResult result =
      tlfuzz::run_campaign(parsed.cfg, seed, mode, nullptr, hook);
  tlfuzz::write_campaign_dir(out_dir, tlfuzz::config_to_json(parsed.cfg, seed), seed,
                             mode, result);
  std::cout << (baseline ? "baseline" : "guided") << " campaign: "
            << result.steps.size() << " steps, " << result.distinct_states()
            << " distinct states, " << result.findings.size() << " findings -> "
            << out_dir << "\n";
  return result.findings.empty() ? kOk : kFindings;
}

int cmd_replay(const std::string& dir) {
  tlfuzz::ReplayOutcome outcome = tlfuzz::replay_campaign_dir(dir);
  if (outcome.version_mismatch) {
    std::cerr << "replay refused: " << outcome.message << "\n";
    return kConfigError;
  }
  std::cout << outcome.message << "\n";
  return outcome.ok ? kOk : kDivergence;
}

int cmd_report(const std::vector<std::string>& dirs, const std::string& out_dir) {
  tlfuzz::ReportData data = tlfuzz::load_report_data(dirs);
  std::filesystem::create_directories(out_dir);
  write_file(out_dir + "/report.csv", tlfuzz::report_csv(data));
  write_file(out_dir + "/report.svg", tlfuzz::report_svg(data));
  std::string summary = tlfuzz::report_summary(data);
  write_file(out_dir + "/summary.txt", summary);
  std::cout << summary;
  return kOk;
}

int cmd_calibrate(const std::string& config_path, std::uint64_t seed_override,
                  bool has_seed, int windows) {
  tlfuzz::ParsedConfig parsed = tlfuzz::load_config_file(config_path);
  std::uint64_t seed = has_seed ? seed_override : parsed.seed;
  std::vector<tlfuzz::EventHistory> steady =
      tlfuzz::collect_steady_summaries(parsed.cfg, seed, windows);
  tlfuzz::CalibrationResult cal =
      tlfuzz::calibrate(steady, parsed.cfg.minhash_k, 0x7A11E57A11E57ull);
  std::cout << "calibrated epsilon " << cal.epsilon << " (coincide fraction "
            << cal.coincide_fraction << " over " << windows << " windows)";
  if (cal.degenerate) {
    std::cout << " -- warning: steady summaries never coincide at 90%; grid minimum"
                 " returned";
  }
  std::cout << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"timeline-guided fault-injection fuzzer for a simulated replicated log"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "campaign", replay_dir;
  std::vector<std::string> report_dirs;
  std::uint64_t seed = 0;
  std::int64_t budget = 0;
  bool baseline = false;
  int windows = 60;
  int dot_steps = 0;

  auto* run = app.add_subcommand("run", "run a fuzzing campaign");
  run->add_option("--config", config_path, "campaign configuration file")->required();
  auto* run_seed = run->add_option("--seed", seed, "override the configured seed");
  run->add_option("--budget", budget, "override the step budget");
  run->add_option("--out", out_dir, "campaign output directory");
  run->add_flag("--baseline", baseline, "uniform-random fault selection");
  int trace_flag = -1;
  run->add_flag_callback("--trace", [&] { trace_flag = 1; },
                         "write the full event trace");
  run->add_flag_callback("--no-trace", [&] { trace_flag = 0; },
                         "skip the full event trace");
  run->add_option("--dot", dot_steps, "dump timeline DOT snapshots for the first N windows");

  auto* replay = app.add_subcommand("replay", "re-run a recorded campaign and diff");
  replay->add_option("dir", replay_dir, "recorded campaign directory")->required();

  auto* report = app.add_subcommand("report", "aggregate campaign directories");
  report->add_option("dirs", report_dirs, "campaign directories")->required();
  report->add_option("--out", out_dir, "report output directory");

  auto* calibrate = app.add_subcommand("calibrate", "derive the similarity threshold");
  calibrate->add_option("--config", config_path, "campaign configuration file")
      ->required();
  auto* cal_seed = calibrate->add_option("--seed", seed, "override the configured seed");
  calibrate->add_option("--windows", windows, "number of steady windows");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      return cmd_run(config_path, seed, !run_seed->empty(), budget, out_dir, baseline,
                     trace_flag, dot_steps);
    }
    if (replay->parsed()) return cmd_replay(replay_dir);
    if (report->parsed()) return cmd_report(report_dirs, out_dir);
    if (calibrate->parsed()) {
      return cmd_calibrate(config_path, seed, !cal_seed->empty(), windows);
    }
  } catch (const tlfuzz::ConfigError& e) {
    std::cerr << "configuration error at " << e.key() << ": " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kOk;
}
