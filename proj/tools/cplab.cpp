// cplab: run continual-personalization experiments and compare results.
//
//   cplab run <config.json> [--seed N]... [--out DIR] [--method M]
//             [--jobs N] [--dry-run]
//   cplab compare <run-dir>... [--out DIR]
//
// Exit codes: 0 success, 1 runtime failure, 2 invalid configuration.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "cp/config.hpp"
#include "cp/io.hpp"
#include "cp/report.hpp"
#include "cp/workflow.hpp"

namespace fs = std::filesystem;

namespace {

// One (method, seed) run laid out under <out>/seed<N>/.
void execute_seed(const cp::RunConfig& cfg, std::uint64_t seed,
                  const std::string& dir) {
  fs::create_directories(dir);
  {
    cp::RunConfig resolved = cfg;
    resolved.seeds = {seed};
    std::ofstream out(dir + "/resolved_config.json");
    out << cp::resolved_config_json(resolved);
  }
  cp::RunResult res = cp::run_sequence(cfg, seed);
  cp::io::save_checkpoint(res.model, dir + "/checkpoint.json");
  cp::io::save_snapshots(res.store, dir + "/snapshots.csv");
  cp::save_event_log(res.log, dir + "/events.csv");
  cp::report::save_metrics_csv(res.report, cfg.method, seed,
                               dir + "/metrics.csv");
  cp::report::save_metrics_json(res.report, cfg.method, seed,
                                dir + "/metrics.json");
  if (!res.fisher.empty()) {
    cp::io::save_fisher(res.fisher, dir + "/fisher.json");
  }
  if (!res.clora.logs.empty()) {
    cp::report::save_clora_trace(res.clora.logs, dir + "/clora_trace.csv");
  }
}

int run_command(const std::string& config_path,
                const std::vector<std::uint64_t>& seed_override,
                const std::string& out_override,
                const std::string& method_override, int jobs_override,
                bool dry_run) {
  cp::RunConfig cfg;
  try {
    cfg = cp::parse_config_file(config_path);
    if (!method_override.empty()) cfg.method = method_override;
    if (!seed_override.empty()) cfg.seeds = seed_override;
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (jobs_override > 0) cfg.jobs = jobs_override;
    if (cfg.task_specs.empty()) cp::apply_default_sequence(cfg);
    cp::method_from_string(cfg.method);  // validate
    if (cfg.seeds.empty()) throw std::invalid_argument("no seeds configured");
  } catch (const std::exception& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return 2;
  }

  std::string out_root = cfg.out_dir;
  if (out_override.empty() && !fs::path(out_root).is_absolute()) {
    if (const char* root = std::getenv("CPLAB_OUT_ROOT")) {
      out_root = (fs::path(root) / out_root).string();
    }
  }

  if (dry_run) {
    std::cout << cp::resolved_config_json(cfg);
    return 0;
  }

  try {
    cp::check_sequence_separability(cfg);
    // Seeds fan out to a bounded worker pool; each worker owns its run dir.
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex err_mu;
    std::vector<std::string> errors;
    const int workers = std::max(
        1, std::min<int>(cfg.jobs, static_cast<int>(cfg.seeds.size())));
    auto worker = [&] {
      for (std::size_t i = next.fetch_add(1); i < cfg.seeds.size();
           i = next.fetch_add(1)) {
        const std::uint64_t seed = cfg.seeds[i];
        try {
          execute_seed(cfg, seed,
                       out_root + "/seed" + std::to_string(seed));
        } catch (const std::exception& e) {
          failed = true;
          std::lock_guard<std::mutex> lk(err_mu);
          errors.push_back("seed " + std::to_string(seed) + ": " + e.what());
        }
      }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failed) {
      for (const auto& e : errors) std::cerr << "error: " << e << '\n';
      return 1;
    }
    std::cout << "wrote " << cfg.seeds.size() << " run(s) under " << out_root
              << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continual-personalization lab"};
  app.require_subcommand(1);

  std::string config_path, out_dir, method;
  std::vector<std::uint64_t> seeds;
  int jobs = 0;
  bool dry_run = false;
  auto* run = app.add_subcommand("run", "execute a configured experiment");
  run->add_option("config", config_path, "JSON config file")->required();
  run->add_option("--seed", seeds, "seed override (repeatable)");
  run->add_option("--out", out_dir, "output directory override");
  run->add_option("--method", method, "method override");
  run->add_option("--jobs", jobs, "worker pool size for seed fan-out");
  run->add_flag("--dry-run", dry_run, "print resolved config and exit");

  std::vector<std::string> dirs;
  std::string cmp_out = "compare";
  auto* cmp = app.add_subcommand("compare", "summarize completed runs");
  cmp->add_option("dirs", dirs, "run directories")->required();
  cmp->add_option("--out", cmp_out, "report output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (run->parsed()) {
    return run_command(config_path, seeds, out_dir, method, jobs, dry_run);
  }
  try {
    const auto summary = cp::report::compare_runs(dirs, cmp_out);
    std::cout << "table: " << summary.table_path << '\n';
    for (const auto& p : summary.plot_paths) std::cout << "plot: " << p << '\n';
    if (!summary.skipped.empty()) {
      std::cout << "skipped " << summary.skipped.size()
                << " incomplete run(s)\n";
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
