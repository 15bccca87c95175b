// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion enforces its own wall-clock budget.

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "cligym/agent.hpp"
#include "cligym/bundle.hpp"
#include "cligym/driver.hpp"
#include "cligym/errors.hpp"
#include "cligym/inversion.hpp"
#include "cligym/process.hpp"
#include "cligym/prompts.hpp"
#include "cligym/sandbox.hpp"
#include "cligym/stats.hpp"
#include "cligym/templates.hpp"
#include "cligym/testrun.hpp"
#include "cligym/trajectory.hpp"
#include "cligym/util.hpp"

using namespace cligym;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = fs::path(CLIGYM_SOURCE_DIR);

struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool cond, const std::string& what) {
  if (!cond) throw CheckFailure(what);
}

fs::path fresh_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() /
                 ("cligym-acceptance-" + tag + "-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Splices value into the template at the placeholder by index arithmetic,
// independent of the production substitution code.
std::string splice(std::string_view tpl, std::string_view key, std::string_view value) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    std::size_t hit = tpl.find(key, pos);
    if (hit == std::string_view::npos) {
      out.append(tpl.substr(pos));
      return out;
    }
    out.append(tpl.substr(pos, hit - pos));
    out.append(value);
    pos = hit + key.size();
  }
}

// ---- criterion 1: template bit-exactness -------------------------------

void criterion_templates() {
  // Embedded bytes equal the audited resource files.
  const std::vector<std::pair<std::string, std::string>> files = {
      {"run_tests", "run_tests.txt"},
      {"degradation_prompt_1", "degradation_prompt_1.txt"},
      {"degradation_prompt_2", "degradation_prompt_2.txt"},
      {"degradation_instruction", "degradation_instruction.txt"},
      {"repair_prompt_1", "repair_prompt_1.txt"},
      {"repair_prompt_2", "repair_prompt_2.txt"},
      {"repair_prompt_3", "repair_prompt_3.txt"},
      {"repair_instruction", "repair_instruction.txt"},
  };
  std::map<std::string, std::string> embedded;
  for (const auto& [name, bytes] : templates::all()) embedded[name] = bytes;
  require(embedded.size() == files.size(), "unexpected embedded template count");
  for (const auto& [name, file] : files) {
    std::string disk = read_text_file(kSource / "resources" / "templates" / file);
    require(embedded.at(name) == disk, "embedded template differs from resource: " + name);
  }

  // Fixed anchors that pin each template to its published figure.
  require(contains(templates::run_tests(),
                   "pytest --disable-warnings --color=no --tb=no --verbose"),
          "run_tests runner flags missing");
  require(contains(templates::run_tests(),
                   "source /opt/miniconda3/bin/activate; conda activate testbed"),
          "run_tests activation line missing");
  require(contains(templates::run_tests(), "\"/test.log\""), "run_tests log sink missing");
  require(contains(templates::degradation_prompt_initial(), "## Disruption Direction"),
          "prompt 1 heading missing");
  require(contains(templates::degradation_prompt_initial(), "## Generated Tasks"),
          "prompt 1 tasks heading missing");
  require(contains(templates::degradation_prompt_refine(),
                   "# Role: Chaos Engineering Lead (Refinement)"),
          "prompt 2 role missing");
  require(contains(templates::degradation_instruction(),
                   "conda environment named \"testbed\""),
          "instruction conda anchor missing");
  require(contains(templates::degradation_instruction(), "please summarize a Dockerfile"),
          "instruction summarize anchor missing");
  require(contains(templates::repair_prompt_strong(), "investigate the environment"),
          "repair 1 anchor missing");
  require(contains(templates::repair_prompt_weak(), "I will replace it into a YAML file"),
          "repair 2 anchor missing");
  require(contains(templates::repair_prompt_balanced(), "Can you help me figure out why"),
          "repair 3 anchor missing");
  require(std::string(templates::repair_instruction()).rfind("instruction: |\n", 0) == 0,
          "repair instruction header missing");

  // Emitted run-tests.sh equals the golden hand-substituted file.
  std::vector<TestId> two = {TestId::parse("tests/test_sample.py::test_one"),
                             TestId::parse("tests/test_sample.py::test_two")};
  require(render_run_script(two) ==
              read_text_file(kSource / "tests" / "golden" / "run_tests_two.sh"),
          "rendered run-tests.sh differs from golden file");

  // Every rendered template equals an independent splice of its template:
  // bytes outside the substitution spans are untouched.
  DegradationPromptInputs inputs;
  inputs.candidate_tests = {TestId::parse("tests/test_a.py::one"),
                            TestId::parse("tests/test_b.py::two")};
  inputs.directions = {{"dir-a", "Break things quietly."}};
  inputs.previous_titles = {"old-task"};

  std::string got = build_degradation_prompt(inputs, DegradationStage::initial);
  std::string want(templates::degradation_prompt_initial());
  want = splice(want, "{candidate_uts_list}", "- tests/test_a.py::one\n- tests/test_b.py::two");
  want = splice(want, "{directions}", "- dir-a: Break things quietly.");
  want = splice(want, "{os.listdir(dataset_path)}", "['old-task']");
  require(got == want, "degradation prompt 1 bytes drifted outside the placeholders");

  InversionTaskSpec spec;
  spec.task_name = "Sample";
  spec.category = "Cat";
  spec.selected_uts = inputs.candidate_tests;
  spec.task_description = "Do the thing.";
  spec.expected_result = "boom";
  spec.recovery_strategy = "undo";

  got = build_degradation_prompt(inputs, DegradationStage::refine, spec);
  want = std::string(templates::degradation_prompt_refine());
  want = splice(want, "{extract_result['selected_uts']}",
                "tests/test_a.py::one\ntests/test_b.py::two");
  want = splice(want, "{extract_result}", render_task_spec_markdown(spec));
  require(got == want, "degradation prompt 2 bytes drifted outside the placeholders");

  got = degradation_instruction(spec);
  want = std::string(templates::degradation_instruction());
  want = splice(want, "{degradaton_issue}", "Do the thing.");
  want = splice(want, "{UTs}", "tests/test_a.py::one\n    tests/test_b.py::two");
  require(got == want, "degradation instruction bytes drifted outside the placeholders");

  std::vector<TestId> symptoms = {TestId::parse("tests/test_a.py::one")};
  const std::vector<std::pair<GuidanceLevel, std::string_view>> repair_tpls = {
      {GuidanceLevel::strong, templates::repair_prompt_strong()},
      {GuidanceLevel::weak, templates::repair_prompt_weak()},
      {GuidanceLevel::balanced, templates::repair_prompt_balanced()},
  };
  for (const auto& [level, tpl] : repair_tpls) {
    got = build_issue_prompt(spec, symptoms, level);
    want = splice(std::string(tpl), "{data[\"task_description\"]}", "Do the thing.");
    want = splice(want, "{symptoms_UTs}", "tests/test_a.py::one");
    require(got == want, "repair prompt bytes drifted outside the placeholders");
  }

  got = repair_instruction("first line\nsecond line");
  want = splice(std::string(templates::repair_instruction()), "{problem_statement}",
                "  first line\n  second line");
  require(got == want, "repair instruction bytes drifted outside the placeholder");
}

// ---- criterion 2: classification soundness ------------------------------

void criterion_classification() {
  // Every outcome assignment over selections of size 1..5 (all four
  // per-test outcomes, a superset of the required 3^5 grid) plus the
  // command-failed case, against a direct rule-table oracle.
  std::size_t cases = 0;
  for (std::size_t n = 1; n <= 5; ++n) {
    std::vector<TestId> selected;
    for (std::size_t i = 0; i < n; ++i) {
      selected.push_back(TestId::parse("s.py::t" + std::to_string(i)));
    }
    std::size_t combos = 1;
    for (std::size_t i = 0; i < n; ++i) combos *= 4;
    for (std::size_t mask = 0; mask < combos; ++mask) {
      TestRunReport report;
      report.runner_status = RunnerStatus::completed;
      std::size_t m = mask;
      std::vector<TestOutcome> outs(n);
      for (std::size_t i = 0; i < n; ++i) {
        outs[i] = static_cast<TestOutcome>(m % 4);
        m /= 4;
        report.records.push_back({selected[i], outs[i]});
      }
      Classification c = classify_outcomes(selected, report);
      ++cases;

      // Brute-force oracle.
      std::set<std::string> want_f2p, want_p2p;
      for (std::size_t i = 0; i < n; ++i) {
        if (outs[i] == TestOutcome::failed || outs[i] == TestOutcome::errored) {
          want_f2p.insert(selected[i].canonical());
        } else if (outs[i] == TestOutcome::passed) {
          want_p2p.insert(selected[i].canonical());
        }
      }
      std::set<std::string> got_f2p, got_p2p;
      for (const TestId& id : c.fail_to_pass) got_f2p.insert(id.canonical());
      for (const TestId& id : c.pass_to_pass) got_p2p.insert(id.canonical());
      require(got_f2p == want_f2p && got_p2p == want_p2p,
              "classification disagrees with the oracle");
      for (const std::string& k : got_f2p) {
        require(got_p2p.count(k) == 0, "fail-to-pass and pass-to-pass overlap");
      }
      require((c.verdict == ClassifyVerdict::discard) == want_f2p.empty(),
              "discard rule violated");
    }

    // Command-failure rule: everything selected becomes fail-to-pass.
    TestRunReport dead;
    dead.runner_status = RunnerStatus::command_failed;
    Classification c = classify_outcomes(selected, dead);
    require(c.fail_to_pass.size() == n && c.pass_to_pass.empty(),
            "command-failed rule violated");
    require(c.verdict == ClassifyVerdict::instance_ok, "command-failed verdict wrong");
    ++cases;
  }
  require(cases >= 243, "exhaustive grid unexpectedly small");
}

// ---- criterion 3: reproducibility contract ------------------------------

void criterion_reproducibility() {
  SimBackend backend(fresh_dir("repro-sessions"));
  SimScenario alpha = SimScenario::load(kSource / "resources/scenarios/alpha.json");
  SimScenario beta = SimScenario::load(kSource / "resources/scenarios/beta.json");
  backend.register_scenario(alpha);
  backend.register_scenario(beta);

  struct World {
    const SimScenario* scenario;
    GoldInstance gold;
    std::vector<std::string> ops;
  };
  std::vector<World> worlds(2);
  worlds[0].scenario = &alpha;
  worlds[1].scenario = &beta;
  worlds[0].ops = {"RUN corrupt_lib zlib",
                   "RUN corrupt_lib sqlite",
                   "RUN rm /testbed/alpha/core.py",
                   "RUN rm /testbed/alpha/io.py",
                   "RUN chmod_deny /testbed/data/config.ini",
                   "RUN env_unset LANG",
                   "RUN env_unset APP_MODE",
                   "RUN break_path",
                   "RUN patch_file /testbed/alpha/core.py def add(a,b): return a+b"};
  worlds[1].ops = {"RUN corrupt_lib libxml",
                   "RUN corrupt_lib openssl",
                   "RUN corrupt_lib curl",
                   "RUN rm /testbed/beta/parser.py",
                   "RUN chmod_deny /testbed/assets/sample.xml",
                   "RUN env_unset TZ",
                   "RUN env_unset BETA_HOME",
                   "RUN break_path"};
  for (World& w : worlds) {
    w.gold.repo_name = w.scenario->repo;
    w.gold.image_tag = w.scenario->image;
    w.gold.state.base = {w.scenario->image_name(), "latest"};
    w.gold.state.codebase_ref = w.scenario->repo + "@gold";
    w.gold.test_inventory = w.scenario->inventory();
  }

  Rng rng(20260810);
  int accepted = 0, total = 0;
  for (int round = 0; round < 120; ++round) {
    const World& w = worlds[rng.index(2)];

    DegradationRecord record;
    std::size_t n_ops = 1 + rng.index(2);
    for (std::size_t i : rng.sample_indices(w.ops.size(), n_ops)) {
      record.delta.dockerfile_lines.push_back(w.ops[i]);
    }
    record.spec.task_name = "generated-" + std::to_string(round);
    record.spec.category = "Auto";
    record.spec.task_description = "generated";
    std::size_t n_sel = 2 + rng.index(w.gold.test_inventory.size() - 2);
    for (std::size_t i : rng.sample_indices(w.gold.test_inventory.size(), n_sel)) {
      record.spec.selected_uts.push_back(w.gold.test_inventory[i]);
    }
    record.agent_steps = static_cast<int>(n_ops);

    InversionRun run = verify_and_classify(w.gold, record, backend);
    ++total;
    if (!run.accepted) continue;
    ++accepted;

    // The contract: any later rebuild of gold + delta fails exactly the
    // recorded fail-to-pass set.
    EnvironmentState poor = apply_delta(w.gold.state, record.delta);
    std::unique_ptr<Sandbox> box = backend.build_state(poor);
    TestRunReport report = box->run_test_script(record.spec.selected_uts);
    Classification again = classify_outcomes(record.spec.selected_uts, report);
    box->teardown();

    std::set<std::string> want, got;
    for (const TestId& id : run.classification.fail_to_pass) want.insert(id.canonical());
    for (const TestId& id : again.fail_to_pass) got.insert(id.canonical());
    require(want == got, "rebuild diverged from the recorded fail-to-pass set");
  }
  require(total >= 100, "not enough generated runs");
  require(accepted >= 60, "too few accepted runs to be meaningful");
}

// ---- criterion 4: end-to-end desk-scale generation ----------------------

PipelineReport run_pipeline_once(const fs::path& dataset_root, const fs::path& sessions) {
  ToolConfig cfg;
  cfg.backend = "sim";
  cfg.mock_script = kSource / "resources/examples/mock_replies.json";
  cfg.refine_probability = 0.0;
  cfg.agent = "breaker";
  cfg.artifacts_root = sessions;

  DriverContext ctx = make_driver(cfg, /*with_llm=*/true);
  std::vector<GoldFile> golds;
  golds.push_back(build_gold(ctx, kSource / "resources/scenarios/alpha.json"));
  golds.push_back(build_gold(ctx, kSource / "resources/scenarios/beta.json"));
  return run_generation_pipeline(ctx, golds, /*base_seed=*/20260810, /*per_gold=*/8,
                                 dataset_root);
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file()) {
      out[fs::relative(entry.path(), root).string()] = read_text_file(entry.path());
    }
  }
  return out;
}

void criterion_end_to_end() {
  fs::path root1 = fresh_dir("e2e-run1");
  fs::path root2 = fresh_dir("e2e-run2");

  PipelineReport first = run_pipeline_once(root1, fresh_dir("e2e-sessions1"));
  require(first.bundles.size() >= 20,
          "pipeline produced only " + std::to_string(first.bundles.size()) + " bundles");
  require(first.runs_accepted >= 10, "too few accepted runs");

  for (const fs::path& dir : first.bundles) {
    TaskInstance inst = load_and_validate(dir);
    require(!inst.fail_to_pass.empty(), "bundle without fail-to-pass tests: " + dir.string());
    auto [body, hint] = strip_hint(inst.issue_text);
    require(count_words(body) > 0, "bundle with empty hint-stripped body: " + dir.string());
  }

  PipelineReport second = run_pipeline_once(root2, fresh_dir("e2e-sessions2"));
  require(second.bundles.size() == first.bundles.size(), "rerun produced a different count");

  auto tree1 = read_tree(root1);
  auto tree2 = read_tree(root2);
  require(tree1.size() == tree2.size(), "rerun produced different file sets");
  for (const auto& [rel, bytes] : tree1) {
    auto it = tree2.find(rel);
    require(it != tree2.end(), "rerun missing file: " + rel);
    require(it->second == bytes, "rerun bytes differ in: " + rel);
  }
}

// ---- criterion 5: filtering fidelity ------------------------------------

void criterion_filtering() {
  std::vector<Trajectory> input =
      read_dataset(kSource / "tests/fixtures/filter_fixture.jsonl");
  require(input.size() == 10, "fixture must hold 10 trajectories");
  nlohmann::json expected = nlohmann::json::parse(
      read_text_file(kSource / "tests/fixtures/filter_fixture_expected.json"));

  auto [kept, dropped] = filter_trajectories(input, default_cheat_rules());
  std::map<std::string, std::string> verdicts;
  std::map<std::string, std::size_t> steps;
  for (const Trajectory& t : input) steps[t.task_id] = t.agent_step_count();
  for (const Trajectory& t : kept) verdicts[t.task_id] = to_string(t.filter_verdict);
  for (const Trajectory& t : dropped) verdicts[t.task_id] = to_string(t.filter_verdict);

  require(verdicts.size() == 10, "filter lost or duplicated trajectories");
  for (const auto& [task_id, label] : expected.items()) {
    require(verdicts.at(task_id) == label.get<std::string>(),
            "verdict mismatch for " + task_id + ": got " + verdicts.at(task_id));
  }
  // The documented boundary: 19 agent steps drop, 20 keep.
  require(steps.at("alpha__t02__bbbbbbbbbbbb") == 19 &&
              verdicts.at("alpha__t02__bbbbbbbbbbbb") == "dropped_short",
          "19-step boundary case kept");
  require(steps.at("alpha__t03__cccccccccccc") == 20 &&
              verdicts.at("alpha__t03__cccccccccccc") == "kept",
          "20-step boundary case dropped");
}

// ---- criterion 6: parser oracle equivalence ------------------------------

void criterion_parser() {
  // Same independent scanning oracle as the unit suite, over fresh draws.
  auto oracle = [](const std::string& log) {
    std::vector<std::pair<std::string, std::string>> records;
    std::map<std::string, std::size_t> index;
    bool completed = false;
    for (const std::string& line : split_lines(log)) {
      std::vector<std::string> tok = split_ws(line);
      if (tok.size() >= 2 && tok[0].find("::") != std::string::npos &&
          (tok[1] == "PASSED" || tok[1] == "FAILED" || tok[1] == "ERROR" ||
           tok[1] == "SKIPPED")) {
        auto it = index.find(tok[0]);
        if (it == index.end()) {
          index[tok[0]] = records.size();
          records.emplace_back(tok[0], tok[1]);
        } else {
          records[it->second].second = tok[1];
        }
      }
      std::string t = trim(line);
      if (t.size() >= 8 && t.front() == '=' && t.back() == '=' &&
          t.find(" in ") != std::string::npos &&
          (t.find("passed") != std::string::npos || t.find("failed") != std::string::npos ||
           t.find("error") != std::string::npos || t.find("skipped") != std::string::npos ||
           t.find("no tests ran") != std::string::npos)) {
        completed = true;
      }
    }
    return std::make_pair(records, completed);
  };
  auto marker_of = [](TestOutcome o) -> std::string {
    switch (o) {
      case TestOutcome::passed: return "PASSED";
      case TestOutcome::failed: return "FAILED";
      case TestOutcome::errored: return "ERROR";
      case TestOutcome::skipped: return "SKIPPED";
    }
    return "?";
  };

  Rng rng(7777);
  const char* markers[] = {"PASSED", "FAILED", "ERROR", "SKIPPED"};
  for (int round = 0; round < 200; ++round) {
    std::string log =
        "============================= test session starts "
        "==============================\ncollected items\n\n";
    std::size_t n = rng.index(10);
    for (std::size_t i = 0; i < n; ++i) {
      log += "tests/acc_" + std::to_string(round) + ".py::t" + std::to_string(i) + " " +
             markers[rng.index(4)] + " [ 10%]\n";
    }
    std::size_t shape = rng.index(3);
    if (shape == 0) {
      log += "\n==== 1 passed in 0.02s ====\n";  // completed
    } else if (shape == 1) {
      // command failure: no footer at all
    } else {
      // truncated mid-line
      log += "tests/acc_" + std::to_string(round) + ".py::cut PASS";
      log = log.substr(0, log.size() - rng.index(6));
    }

    TestRunReport report = parse_verbose_log(log);
    auto [want_records, want_completed] = oracle(log);
    require((report.runner_status == RunnerStatus::completed) == want_completed,
            "runner status disagrees with oracle");
    require(report.records.size() == want_records.size(), "record count disagrees");
    for (std::size_t i = 0; i < want_records.size(); ++i) {
      require(report.records[i].id.canonical() == want_records[i].first,
              "record id disagrees");
      require(marker_of(report.records[i].outcome) == want_records[i].second,
              "record outcome disagrees");
    }
  }
}

// ---- criterion 7: stats correctness --------------------------------------

void criterion_stats() {
  fs::path root = fresh_dir("stats");
  // Five instances with integer metrics: lines/f2p k in 1..5, p2p 2k,
  // words 10k. Hand-computed means: 3, 3, 6, 30; two distinct images.
  for (int k = 1; k <= 5; ++k) {
    TaskInstance inst;
    inst.repo = k <= 2 ? "alpha" : "beta";
    inst.gold_image_tag = "task-" + inst.repo + ":latest";
    inst.task_name = "acc fixture " + std::to_string(k);
    for (int i = 0; i < k; ++i) {
      inst.delta.dockerfile_lines.push_back("RUN op_" + std::to_string(i));
    }
    std::vector<std::string> body;
    for (int i = 0; i < 10 * k; ++i) body.push_back("w" + std::to_string(i));
    inst.issue_text = join(body, " ") + "\nHint:\nignored hint words here";
    inst.hint_present = true;
    inst.guidance_level = GuidanceLevel::weak;
    for (int i = 0; i < k; ++i) {
      inst.fail_to_pass.push_back(TestId::parse("a.py::f" + std::to_string(100 * k + i)));
    }
    for (int i = 0; i < 2 * k; ++i) {
      inst.pass_to_pass.push_back(TestId::parse("a.py::p" + std::to_string(100 * k + i)));
    }
    inst.seed = static_cast<std::uint64_t>(k);
    inst.prompts_hash = "acc";
    inst.id = inst.repo + "__acc-" + std::to_string(k) + "__" +
              short_fingerprint(sha256_hex("acc" + std::to_string(k)));
    emit_bundle(inst, root);
  }

  DatasetStats stats = compute_stats(root);
  require(stats.instance_count == 5, "instance count wrong");
  require(stats.image_count == 2, "image count wrong");
  require(stats.mean_dockerfile_lines == 3.0, "mean dockerfile lines wrong");
  require(stats.mean_f2p == 3.0, "mean fail-to-pass wrong");
  require(stats.mean_p2p == 6.0, "mean pass-to-pass wrong");
  require(stats.mean_issue_words == 30.0, "mean issue words wrong");

  // Incremental vs from-scratch agreement at 1e-12 relative.
  Rng rng(31337);
  StatsAccumulator acc;
  double sum_words = 0, sum_lines = 0, sum_f2p = 0, sum_p2p = 0;
  for (int i = 0; i < 500; ++i) {
    TaskInstance inst;
    inst.repo = "r" + std::to_string(rng.index(4));
    inst.gold_image_tag = "task-" + inst.repo + ":latest";
    inst.task_name = "x";
    std::size_t lines = 1 + rng.index(9);
    for (std::size_t j = 0; j < lines; ++j) inst.delta.dockerfile_lines.push_back("RUN x");
    std::size_t words_n = 1 + rng.index(300);
    std::vector<std::string> body(words_n, "w");
    inst.issue_text = join(body, " ");
    std::size_t f2p = 1 + rng.index(40);
    for (std::size_t j = 0; j < f2p; ++j) {
      inst.fail_to_pass.push_back(TestId::parse("a.py::f" + std::to_string(j)));
    }
    std::size_t p2p = rng.index(50);
    for (std::size_t j = 0; j < p2p; ++j) {
      inst.pass_to_pass.push_back(TestId::parse("a.py::p" + std::to_string(j)));
    }
    acc.add(inst);
    sum_words += static_cast<double>(words_n);
    sum_lines += static_cast<double>(lines);
    sum_f2p += static_cast<double>(f2p);
    sum_p2p += static_cast<double>(p2p);

    DatasetStats incremental = acc.finish();
    double n = i + 1.0;
    auto close = [](double a, double b) {
      return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
    };
    require(close(incremental.mean_issue_words, sum_words / n), "incremental words drift");
    require(close(incremental.mean_dockerfile_lines, sum_lines / n),
            "incremental lines drift");
    require(close(incremental.mean_f2p, sum_f2p / n), "incremental f2p drift");
    require(close(incremental.mean_p2p, sum_p2p / n), "incremental p2p drift");
  }
}

// ---- criterion 8: bundle round-trip ---------------------------------------

void criterion_bundles() {
  fs::path root = fresh_dir("bundles");
  Rng rng(90210);
  for (int i = 0; i < 100; ++i) {
    TaskInstance inst;
    inst.repo = rng.index(2) ? "alpha" : "beta";
    inst.gold_image_tag = "task-" + inst.repo + ":latest";
    inst.task_name = "roundtrip " + std::to_string(i);
    std::size_t lines = 1 + rng.index(6);
    for (std::size_t j = 0; j < lines; ++j) {
      inst.delta.dockerfile_lines.push_back("RUN op_" + std::to_string(rng.index(1000)));
    }
    inst.hint_present = rng.index(2) == 0;
    std::string body = "Round trip issue " + std::to_string(rng.next()) + "\nsecond line.";
    inst.issue_text =
        inst.hint_present ? body + "\nHint:\nhidden " + std::to_string(rng.index(100)) : body;
    inst.guidance_level = static_cast<GuidanceLevel>(rng.index(3));
    std::size_t f2p = 1 + rng.index(5);
    for (std::size_t j = 0; j < f2p; ++j) {
      inst.fail_to_pass.push_back(
          TestId::parse("tests/rt.py::f" + std::to_string(i) + "_" + std::to_string(j)));
    }
    std::size_t p2p = rng.index(5);
    for (std::size_t j = 0; j < p2p; ++j) {
      inst.pass_to_pass.push_back(
          TestId::parse("tests/rt.py::p" + std::to_string(i) + "_" + std::to_string(j)));
    }
    inst.seed = rng.next();
    inst.prompts_hash = sha256_hex("rt" + std::to_string(i));
    inst.id = inst.repo + "__rt-" + std::to_string(i) + "__" +
              short_fingerprint(sha256_hex(std::to_string(i)));

    TaskBundle bundle = emit_bundle(inst, root);
    TaskInstance back = load_and_validate(bundle.root);
    require(back.id == inst.id && back.repo == inst.repo &&
                back.gold_image_tag == inst.gold_image_tag &&
                back.task_name == inst.task_name && back.delta == inst.delta &&
                back.issue_text == inst.issue_text &&
                back.hint_present == inst.hint_present &&
                back.guidance_level == inst.guidance_level &&
                back.fail_to_pass == inst.fail_to_pass &&
                back.pass_to_pass == inst.pass_to_pass && back.seed == inst.seed &&
                back.prompts_hash == inst.prompts_hash,
            "round-trip mismatch at instance " + std::to_string(i));
  }

  // Ten-case corruption corpus with pinned error classes.
  TaskInstance model;
  model.repo = "alpha";
  model.gold_image_tag = "task-alpha:latest";
  model.task_name = "Corpus";
  model.delta.dockerfile_lines = {"RUN corrupt_lib zlib"};
  model.issue_text = "Things broke.\nHint:\nlook closer";
  model.hint_present = true;
  model.guidance_level = GuidanceLevel::strong;
  model.fail_to_pass = {TestId::parse("tests/c.py::f0"), TestId::parse("tests/c.py::f1")};
  model.pass_to_pass = {TestId::parse("tests/c.py::p0")};
  model.seed = 5;
  model.prompts_hash = "corpus";
  model.id = "alpha__corpus__000000000001";

  int corpus_case = 0;
  auto fresh_bundle = [&]() {
    fs::path dir = fresh_dir("corpus-" + std::to_string(corpus_case++));
    return emit_bundle(model, dir).root;
  };
  auto expect = [&](const std::function<void(const fs::path&)>& mutate,
                    const std::string& what, auto catcher) {
    fs::path dir = fresh_bundle();
    mutate(dir);
    try {
      load_and_validate(dir);
      throw CheckFailure("corruption accepted: " + what);
    } catch (const std::remove_reference_t<decltype(catcher)>&) {
    }
  };

  for (const char* name : kBundleFiles) {
    expect([&](const fs::path& d) { fs::remove(d / name); },
           std::string("missing ") + name, MissingFile("x"));
  }
  expect(
      [&](const fs::path& d) {
        std::string s = read_text_file(d / "run-tests.sh");
        write_text_file(d / "run-tests.sh", replace_all(s, "tests/c.py::f1 ", ""));
      },
      "script dropped a test", TestSetMismatch(""));
  expect(
      [&](const fs::path& d) {
        std::string s = read_text_file(d / "run-tests.sh");
        write_text_file(d / "run-tests.sh",
                        replace_all(s, "--verbose tests/c.py::f0",
                                    "--verbose tests/c.py::alien tests/c.py::f0"));
      },
      "script gained a test", TestSetMismatch(""));
  expect(
      [&](const fs::path& d) {
        nlohmann::json meta = nlohmann::json::parse(read_text_file(d / "meta.json"));
        meta["fail_to_pass"] = nlohmann::json::array();
        write_text_file(d / "meta.json", meta.dump(2) + "\n");
      },
      "metadata lost its fail-to-pass set", SchemaViolation(""));
  expect(
      [&](const fs::path& d) {
        std::string s = read_text_file(d / "Dockerfile");
        write_text_file(d / "Dockerfile", replace_all(s, "FROM task-alpha:latest\n", ""));
      },
      "Dockerfile lost its FROM line", SchemaViolation(""));
  expect(
      [&](const fs::path& d) {
        std::string s = read_text_file(d / "task.yaml");
        write_text_file(d / "task.yaml", replace_all(s, "instruction: |", "instruction: >"));
      },
      "task.yaml header mangled", SchemaViolation(""));
}

// ---- criterion 9: container smoke (environment-dependent) ----------------

bool criterion_container_smoke(std::string* detail) {
  if (!container_runtime_available("docker")) {
    *detail = "no container runtime on this host";
    return false;  // skipped
  }
  ToolConfig cfg;
  cfg.backend = "container";
  cfg.container_runtime = "docker";
  cfg.artifacts_root = fresh_dir("smoke-artifacts");

  DriverContext ctx = make_driver(cfg, /*with_llm=*/false);
  GoldFile gold = build_gold(ctx, kSource / "tests/fixtures/container_smoke.json");

  DegradationRecord record;
  record.delta.dockerfile_lines = {"RUN rm /testbed/tests/data.txt"};
  record.spec.task_name = "smoke";
  record.spec.category = "Data";
  record.spec.task_description = "remove the data file";
  record.spec.selected_uts = gold.gold.test_inventory;
  record.agent_steps = 1;

  InversionRun run = verify_and_classify(gold.gold, record, ctx.backend());
  require(run.accepted, "smoke inversion not accepted: " + run.discard_reason);
  require(run.classification.fail_to_pass.size() == 1, "smoke fail-to-pass wrong");

  IssueStatement issue;
  issue.body = "The data-backed test fails. Please investigate and repair.";
  issue.guidance_level = GuidanceLevel::strong;
  std::vector<TaskInstance> instances = assemble_instance(run, issue);
  fs::path dataset = fresh_dir("smoke-dataset");
  for (const TaskInstance& inst : instances) emit_bundle(inst, dataset);

  std::string verify_detail;
  for (const auto& entry : fs::directory_iterator(dataset)) {
    require(verify_bundle(ctx, entry.path(), &verify_detail),
            "smoke verify failed: " + verify_detail);
  }
  *detail = "gold built, degraded, packaged, verified";
  return true;
}

}  // namespace

int main() {
  struct Criterion {
    std::string name;
    double budget_s;
    std::function<void()> run;
  };
  const std::vector<Criterion> criteria = {
      {"1 template-bit-exactness", 1.0, criterion_templates},
      {"2 classification-soundness", 5.0, criterion_classification},
      {"3 reproducibility-contract", 30.0, criterion_reproducibility},
      {"4 end-to-end-desk-scale", 120.0, criterion_end_to_end},
      {"5 filtering-fidelity", 1.0, criterion_filtering},
      {"6 parser-oracle-equivalence", 5.0, criterion_parser},
      {"7 stats-correctness", 1.0, criterion_stats},
      {"8 bundle-round-trip", 10.0, criterion_bundles},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    auto start = std::chrono::steady_clock::now();
    std::string error;
    try {
      c.run();
    } catch (const std::exception& e) {
      error = e.what();
    }
    double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (error.empty() && elapsed > c.budget_s) {
      error = "exceeded the " + std::to_string(c.budget_s) + "s budget";
    }
    if (error.empty()) {
      std::printf("[PASS] %s (%.2fs)\n", c.name.c_str(), elapsed);
    } else {
      std::printf("[FAIL] %s (%.2fs): %s\n", c.name.c_str(), elapsed, error.c_str());
      ++failures;
    }
  }

  {
    auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ran = false;
    std::string error;
    try {
      ran = criterion_container_smoke(&detail);
    } catch (const std::exception& e) {
      error = e.what();
    }
    double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!error.empty()) {
      std::printf("[FAIL] 9 container-smoke (%.2fs): %s\n", elapsed, error.c_str());
      ++failures;
    } else if (ran) {
      std::printf("[PASS] 9 container-smoke (%.2fs): %s\n", elapsed, detail.c_str());
    } else {
      std::printf("[SKIP] 9 container-smoke: %s\n", detail.c_str());
    }
  }

  return failures == 0 ? 0 : 1;
}
