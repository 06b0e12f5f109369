#include "mmv/cli.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <thread>

#include <CLI11.hpp>

#include "mmv/error.hpp"
#include "mmv/pipeline.hpp"
#include "mmv/report.hpp"

namespace mmv {

namespace fs = std::filesystem;

namespace {

enum class Command { run, keyframes, evidence, report };

struct CaseResult {
  int exit_code = kExitOk;
  std::string out;
  std::string err;
};

std::string describe(const CaseStatus& s) {
  std::string line = s.case_id + ": stage=" + std::string(to_string(s.stage)) +
                     " human_review=" + (s.human_review_required ? "yes" : "no");
  for (const auto& r : s.reasons) line += "\n  review: " + r;
  return line + "\n";
}

CaseResult run_one(Command cmd, const fs::path& case_dir, PipelineConfig cfg, std::size_t case_count) {
  CaseResult result;
  if (case_count > 1 && !cfg.output_dir.empty()) cfg.output_dir /= fs::absolute(case_dir).filename();
  try {
    CaseStatus status;
    if (cmd == Command::report) {
      cfg.validate();
      const Case c = load_case(case_dir);
      const fs::path out_dir = output_dir_for(case_dir, cfg);
      assemble_report(load_report_inputs(c, out_dir), out_dir);
      status = status_from_cache(c, out_dir);
    } else {
      Clients clients = make_clients(cfg, case_dir);
      if (cmd == Command::run) status = run_case(case_dir, cfg, clients);
      if (cmd == Command::keyframes) status = run_media_stage(case_dir, cfg, clients);
      if (cmd == Command::evidence) status = run_evidence_stage(case_dir, cfg, clients);
      if (cfg.offline) {
        const StubCounters n = clients.counters();
        result.err += status.case_id + ": stub calls search=" + std::to_string(n.search) +
                      " fetch=" + std::to_string(n.fetch) + " transcribe=" + std::to_string(n.transcribe) +
                      " llm=" + std::to_string(n.llm) + "\n";
      }
    }
    result.out = describe(status);
    result.exit_code = status.human_review_required ? kExitHumanReview : kExitOk;
  } catch (const std::exception& e) {
    result.err += case_dir.string() + ": fatal: " + e.what() + "\n";
    result.exit_code = kExitFatal;
  }
  return result;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multimedia news verification pipeline", "mmv"};
  app.require_subcommand(1);

  std::vector<std::string> cases;
  std::string config_path;
  bool offline = false;
  bool refresh = false;
  int jobs = 1;

  auto add_common = [&](CLI::App* sub, bool network) {
    sub->add_option("--case", cases, "Case directory (repeatable)")->required();
    sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--jobs", jobs, "Cases processed concurrently")->check(CLI::PositiveNumber);
    if (network) {
      sub->add_flag("--offline", offline, "Use stub clients from <case>/stubs; no network");
      sub->add_flag("--refresh", refresh, "Recompute every stage instead of reusing cached files");
    }
  };
  CLI::App* run = app.add_subcommand("run", "Run every stage and write the report");
  CLI::App* keyframes = app.add_subcommand("keyframes", "Media processing only");
  CLI::App* evidence = app.add_subcommand("evidence", "Evidence retrieval only");
  CLI::App* report = app.add_subcommand("report", "Assemble the report from cached stage files");
  add_common(run, true);
  add_common(keyframes, true);
  add_common(evidence, true);
  add_common(report, false);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kExitFatal;
  }

  Command cmd = Command::run;
  if (keyframes->parsed()) cmd = Command::keyframes;
  if (evidence->parsed()) cmd = Command::evidence;
  if (report->parsed()) cmd = Command::report;

  PipelineConfig cfg;
  try {
    if (!config_path.empty()) cfg = load_config(config_path);
    apply_env_overrides(cfg);
    if (offline) cfg.offline = true;
    if (refresh) cfg.refresh = true;
    cfg.validate();
  } catch (const std::exception& e) {
    err << "fatal: " << e.what() << "\n";
    return kExitFatal;
  }

  std::vector<CaseResult> results(cases.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cases.size(); i = next++) {
      results[i] = run_one(cmd, cases[i], cfg, cases.size());
    }
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), cases.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  int code = kExitOk;
  for (const CaseResult& r : results) {
    out << r.out;
    err << r.err;
    if (r.exit_code == kExitFatal) code = kExitFatal;
    else if (r.exit_code == kExitHumanReview && code == kExitOk) code = kExitHumanReview;
  }
  return code;
}

}  // namespace mmv
