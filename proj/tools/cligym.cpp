#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <thread>

#include "CLI11.hpp"

#include "cligym/agent.hpp"
#include "cligym/bundle.hpp"
#include "cligym/driver.hpp"
#include "cligym/errors.hpp"
#include "cligym/process.hpp"
#include "cligym/stats.hpp"
#include "cligym/templates.hpp"
#include "cligym/trajectory.hpp"
#include "cligym/util.hpp"

namespace fs = std::filesystem;
using namespace cligym;

namespace {

struct GlobalOpts {
  std::string config_path;
  int jobs = 0;  // 0 = config default
  std::uint64_t seed = 1;
};

ToolConfig load_config(const GlobalOpts& g) {
  ToolConfig cfg;
  if (!g.config_path.empty()) cfg = ToolConfig::load(g.config_path);
  if (g.jobs > 0) cfg.jobs = g.jobs;
  return cfg;
}

std::vector<fs::path> bundle_dirs_under(const fs::path& root) {
  std::vector<fs::path> dirs;
  if (fs::exists(root / "meta.json")) {
    dirs.push_back(root);
    return dirs;
  }
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::exists(entry.path() / "meta.json")) {
      dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

int run_collect(DriverContext& ctx, const fs::path& bundle_root, const fs::path& out_dir,
                const std::string& agent_spec) {
  std::vector<fs::path> dirs = bundle_dirs_under(bundle_root);
  if (dirs.empty()) {
    std::cerr << "no bundles under " << bundle_root << "\n";
    return 1;
  }
  fs::create_directories(out_dir);

  std::atomic<std::size_t> cursor{0};
  std::atomic<int> successes{0};
  int jobs = std::max(1, ctx.config.jobs);
  std::vector<std::thread> workers;
  std::mutex print_mu;

  auto work = [&]() {
    // One adapter per worker; adapters are not shared across runs.
    std::unique_ptr<AgentAdapter> agent = make_agent(agent_spec);
    while (true) {
      std::size_t i = cursor.fetch_add(1);
      if (i >= dirs.size()) return;
      try {
        TaskInstance inst = load_and_validate(dirs[i]);
        TaskBundle bundle{dirs[i], inst};
        CollectOptions opt;
        opt.budget_s = ctx.config.budget_s;
        opt.artifact_dir = ctx.config.artifacts_root / "collect" / inst.id;
        Trajectory traj = collect_trajectory(bundle, *agent, ctx.backend(), opt);
        if (traj.success) successes.fetch_add(1);
        write_text_file(out_dir / (inst.id + ".traj.json"),
                        trajectory_to_json(traj).dump(2) + "\n");
        std::lock_guard<std::mutex> lock(print_mu);
        std::cout << (traj.success ? "solved " : "failed ") << inst.id << " ("
                  << traj.agent_step_count() << " agent steps)\n";
      } catch (const Error& e) {
        std::lock_guard<std::mutex> lock(print_mu);
        std::cerr << "collect failed for " << dirs[i] << ": " << e.what() << "\n";
      }
    }
  };
  for (int j = 0; j < jobs; ++j) workers.emplace_back(work);
  for (std::thread& t : workers) t.join();

  std::cout << successes.load() << "/" << dirs.size() << " trajectories successful, written to "
            << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cligym: derive environment-repair CLI tasks by inverting gold environments"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "tool configuration JSON");
  app.add_option("--jobs", g.jobs, "worker threads for batch commands");
  app.add_option("--seed", g.seed, "base seed for sampling");

  // build-gold
  std::string repo_config;
  std::string gold_out = "gold.json";
  auto* cmd_gold = app.add_subcommand("build-gold", "build and verify a gold instance");
  cmd_gold->add_option("repo-config", repo_config, "scenario json (sim) or repo config json")
      ->required();
  cmd_gold->add_option("--out", gold_out, "gold file to write");

  // gen-specs
  std::string gold_path;
  int spec_count = 1;
  std::string specs_out = "specs";
  auto* cmd_specs = app.add_subcommand("gen-specs", "sample and generate inversion task specs");
  cmd_specs->add_option("gold", gold_path, "gold file")->required();
  cmd_specs->add_option("--count", spec_count, "number of specs to generate");
  cmd_specs->add_option("--out", specs_out, "output directory for spec files");

  // invert
  std::string invert_gold, invert_spec_path, run_out = "run.json";
  double budget = 0.0;
  std::string backend_override;
  auto* cmd_invert = app.add_subcommand("invert", "run the degradation agent and verify");
  cmd_invert->add_option("gold", invert_gold, "gold file")->required();
  cmd_invert->add_option("spec", invert_spec_path, "spec file")->required();
  cmd_invert->add_option("--budget", budget, "agent budget in seconds (default 900)");
  cmd_invert->add_option("--backend", backend_override, "container|sim (overrides config)");
  cmd_invert->add_option("--out", run_out, "run file to write");

  // package
  std::string package_run_path, dataset_out = "dataset";
  auto* cmd_package = app.add_subcommand("package", "emit task bundles from an accepted run");
  cmd_package->add_option("run", package_run_path, "run file")->required();
  cmd_package->add_option("--out", dataset_out, "dataset root");

  // collect
  std::string collect_root, collect_out = "trajectories";
  std::string collect_agent;
  std::vector<std::string> collect_golds;
  auto* cmd_collect = app.add_subcommand("collect", "run a solver agent over bundles");
  cmd_collect->add_option("bundle-dir", collect_root, "bundle or dataset root")->required();
  cmd_collect->add_option("--out", collect_out, "trajectory output directory");
  cmd_collect->add_option("--agent", collect_agent, "agent spec (default from config)");
  cmd_collect->add_option("--gold", collect_golds, "gold files to register (sim backend)");

  // filter
  std::string filter_dir, filter_out = "filtered";
  auto* cmd_filter = app.add_subcommand("filter", "apply quality filters to trajectories");
  cmd_filter->add_option("traj-dir", filter_dir, "directory of *.traj.json files")->required();
  cmd_filter->add_option("--out", filter_out, "export directory");

  // stats
  std::string stats_root;
  auto* cmd_stats = app.add_subcommand("stats", "dataset statistics over a bundle root");
  cmd_stats->add_option("dataset-root", stats_root, "dataset root")->required();

  // verify
  std::string verify_dir;
  std::vector<std::string> verify_golds;
  auto* cmd_verify = app.add_subcommand("verify", "rebuild a bundle and assert reproduction");
  cmd_verify->add_option("bundle", verify_dir, "bundle directory")->required();
  cmd_verify->add_option("--gold", verify_golds, "gold files to register (sim backend)");

  // dump-templates
  std::string templates_out = "templates";
  auto* cmd_dump = app.add_subcommand("dump-templates", "write embedded templates for audit");
  cmd_dump->add_option("--out", templates_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_dump->parsed()) {
      for (const auto& [name, bytes] : templates::all()) {
        write_text_file(fs::path(templates_out) / (name + ".txt"), bytes);
      }
      std::cout << "templates written to " << templates_out << "\n";
      return 0;
    }

    ToolConfig cfg = load_config(g);

    if (cmd_gold->parsed()) {
      DriverContext ctx = make_driver(cfg, /*with_llm=*/false);
      GoldFile gold = build_gold(ctx, repo_config);
      save_gold_file(gold, gold_out);
      std::cout << "gold " << gold.gold.repo_name << " verified ("
                << gold.gold.test_inventory.size() << " tests pass), wrote " << gold_out
                << "\n";
      return 0;
    }

    if (cmd_specs->parsed()) {
      DriverContext ctx = make_driver(cfg, /*with_llm=*/true);
      GoldFile gold = load_gold_file(ctx, gold_path);
      fs::create_directories(specs_out);
      int written = 0;
      for (int i = 0; i < spec_count; ++i) {
        std::uint64_t seed = g.seed + static_cast<std::uint64_t>(i);
        try {
          GeneratedSpec spec = generate_spec(ctx, gold.gold, seed);
          fs::path out = fs::path(specs_out) /
                         ("spec-" + std::to_string(seed) + "-" + slugify(spec.spec.task_name) +
                          ".json");
          save_spec_file(spec, out);
          ++written;
          std::cout << "spec " << out.filename().string() << " ("
                    << spec.spec.selected_uts.size() << " tests)\n";
        } catch (const Error& e) {
          std::cerr << "seed " << seed << ": " << e.what() << "\n";
        }
      }
      std::cout << written << "/" << spec_count << " specs written to " << specs_out << "\n";
      return written > 0 ? 0 : 1;
    }

    if (cmd_invert->parsed()) {
      if (!backend_override.empty()) {
        cfg.backend = backend_override == "container" ? "container" : "sim";
      }
      if (budget > 0) cfg.budget_s = budget;
      DriverContext ctx = make_driver(cfg, /*with_llm=*/true);
      GoldFile gold = load_gold_file(ctx, invert_gold);
      GeneratedSpec spec = load_spec_file(invert_spec_path);
      InvertOutcome outcome = invert_spec(ctx, gold.gold, spec);
      save_run_file(outcome, run_out);
      if (outcome.run.accepted) {
        std::cout << "accepted: " << outcome.run.classification.fail_to_pass.size()
                  << " fail-to-pass, " << outcome.run.classification.pass_to_pass.size()
                  << " pass-to-pass, " << outcome.instances.size() << " instance(s); wrote "
                  << run_out << "\n";
        return 0;
      }
      std::cout << outcome.note << "; wrote " << run_out << "\n";
      return 2;
    }

    if (cmd_package->parsed()) {
      InvertOutcome outcome = load_run_file(package_run_path);
      std::vector<fs::path> dirs = package_run(outcome, dataset_out);
      for (const fs::path& dir : dirs) std::cout << dir.string() << "\n";
      return 0;
    }

    if (cmd_collect->parsed()) {
      DriverContext ctx = make_driver(cfg, /*with_llm=*/false);
      for (const std::string& path : collect_golds) load_gold_file(ctx, path);
      std::string agent_spec = collect_agent.empty() ? ctx.config.agent : collect_agent;
      return run_collect(ctx, collect_root, collect_out, agent_spec);
    }

    if (cmd_filter->parsed()) {
      ToolConfig plain = cfg;
      std::vector<CheatRule> rules = plain.cheat_rules.empty()
                                         ? default_cheat_rules()
                                         : load_cheat_rules(plain.cheat_rules);
      std::vector<Trajectory> successful, skipped;
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(filter_dir)) {
        if (entry.path().extension() == ".json") files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      for (const fs::path& file : files) {
        Trajectory traj = trajectory_from_json(nlohmann::json::parse(read_text_file(file)));
        (traj.success ? successful : skipped).push_back(std::move(traj));
      }
      auto [kept, dropped] = filter_trajectories(std::move(successful), rules);
      ExportManifest manifest = export_dataset(kept, filter_out);
      std::cout << "successful: " << (kept.size() + dropped.size()) << ", kept: " << kept.size()
                << ", dropped: " << dropped.size() << " (unsuccessful skipped: "
                << skipped.size() << ")\n";
      std::cout << "dataset: " << manifest.dataset_file.string() << "\n";
      for (const Trajectory& traj : dropped) {
        std::cout << "  dropped " << traj.task_id << ": " << to_string(traj.filter_verdict)
                  << "\n";
      }
      return 0;
    }

    if (cmd_stats->parsed()) {
      DatasetStats stats = compute_stats(stats_root);
      std::cout << format_stats(stats, /*with_reference=*/true);
      return 0;
    }

    if (cmd_verify->parsed()) {
      DriverContext ctx = make_driver(cfg, /*with_llm=*/false);
      for (const std::string& path : verify_golds) load_gold_file(ctx, path);
      std::string detail;
      bool ok = verify_bundle(ctx, verify_dir, &detail);
      std::cout << (ok ? "PASS " : "FAIL ") << verify_dir << ": " << detail << "\n";
      return ok ? 0 : 1;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
