#include "cligym/driver.hpp"

#include <set>

#include "cligym/agent.hpp"
#include "cligym/bundle.hpp"
#include "cligym/errors.hpp"
#include "cligym/process.hpp"
#include "cligym/util.hpp"

namespace cligym {

namespace {

// Salts decorrelate the per-spec seed into independent streams.
constexpr std::uint64_t kRefineSalt = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kLevelSalt = 0xc2b2ae3d27d4eb4fULL;

std::vector<std::string> id_strings(const std::vector<TestId>& ids) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (const TestId& id : ids) out.push_back(id.canonical());
  return out;
}

std::vector<TestId> ids_from_json(const nlohmann::json& arr) {
  std::vector<TestId> out;
  for (const auto& item : arr) out.push_back(TestId::parse(item.get<std::string>()));
  return out;
}

ChatRequest make_request(const DriverContext& ctx, std::string prompt) {
  ChatRequest req = ChatRequest::user(std::move(prompt), ctx.config.provider_model);
  req.temperature = ctx.config.temperature;
  req.max_tokens = ctx.config.max_tokens;
  return req;
}

BaseImageRef parse_image_ref(const std::string& ref) {
  std::size_t colon = ref.rfind(':');
  if (colon == std::string::npos) return {ref, "latest"};
  return {ref.substr(0, colon), ref.substr(colon + 1)};
}

}  // namespace

SandboxBackend& DriverContext::backend() {
  if (sim) return *sim;
  if (container) return *container;
  throw Error("driver context has no backend");
}

DriverContext make_driver(const ToolConfig& config, bool with_llm) {
  DriverContext ctx;
  ctx.config = config;
  if (config.backend == "sim") {
    ctx.sim = std::make_shared<SimBackend>(config.artifacts_root / "sessions");
  } else {
    ContainerBackend::Options opt;
    opt.runtime = config.container_runtime;
    opt.artifact_root = config.artifacts_root / "sessions";
    opt.max_concurrent_builds = config.max_concurrent_builds;
    ctx.container = std::make_shared<ContainerBackend>(opt);
  }
  if (with_llm) ctx.llm = config.make_llm_client();
  ctx.catalog = config.direction_catalog.empty()
                    ? DirectionCatalog::builtin_default()
                    : DirectionCatalog::load(config.direction_catalog);
  return ctx;
}

// ---- gold ----

GoldFile build_gold(DriverContext& ctx, const std::filesystem::path& repo_config) {
  GoldFile out;
  if (ctx.sim) {
    SimScenario scenario = SimScenario::load(repo_config);
    ctx.sim->register_scenario(scenario);
    out.scenario = scenario;
    out.gold.repo_name = scenario.repo;
    out.gold.image_tag = scenario.image;
    out.gold.state.base = parse_image_ref(scenario.image);
    out.gold.state.codebase_ref = scenario.repo + "@gold";
    out.gold.test_inventory = scenario.inventory();
  } else {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(read_text_file(repo_config));
    } catch (const nlohmann::json::exception& e) {
      throw Error("bad repo config " + repo_config.string() + ": " + e.what());
    }
    std::string repo = doc.at("repo").get<std::string>();
    std::string base = doc.at("base").get<std::string>();
    std::string tag = doc.at("tag").get<std::string>();

    EnvironmentState setup;
    setup.base = parse_image_ref(base);
    setup.codebase_ref = repo + "@gold";
    EnvDelta install;
    for (const auto& line : doc.value("setup_lines", std::vector<std::string>{})) {
      install.dockerfile_lines.push_back(line);
    }
    if (!install.empty()) setup = apply_delta(setup, install);

    out.gold.repo_name = repo;
    out.gold.image_tag = tag;
    out.gold.state.base = parse_image_ref(tag);
    out.gold.state.codebase_ref = repo + "@gold";
    for (const auto& id : doc.at("tests")) {
      out.gold.test_inventory.push_back(TestId::parse(id.get<std::string>()));
    }

    // Build the installed image, then give it the stable gold tag so
    // bundles can say FROM <tag>.
    std::unique_ptr<Sandbox> probe = ctx.container->build_state(setup);
    probe->teardown();
    std::string built =
        ctx.container->options().tag_prefix + short_fingerprint(fingerprint(setup));
    ProcessResult tagres =
        run_process({ctx.config.container_runtime, "tag", built, tag}, 60.0);
    if (tagres.exit_code != 0) throw Error("tagging gold image failed: " + tagres.err);
  }

  if (out.gold.test_inventory.empty()) throw EmptyInventory("gold has no tests");

  // Gold means verified: every inventory test must pass.
  std::unique_ptr<Sandbox> box = ctx.backend().build_state(out.gold.state);
  TestRunReport report = box->run_test_script(out.gold.test_inventory);
  Classification c = classify_outcomes(out.gold.test_inventory, report);
  box->teardown();
  if (!c.fail_to_pass.empty() || c.pass_to_pass.size() != out.gold.test_inventory.size()) {
    std::string failing = c.fail_to_pass.empty() ? "(skipped tests present)"
                                                 : c.fail_to_pass.front().canonical();
    throw Error("gold verification failed for " + out.gold.repo_name +
                ": not all tests pass, e.g. " + failing);
  }
  return out;
}

void save_gold_file(const GoldFile& gold, const std::filesystem::path& path) {
  nlohmann::ordered_json doc;
  doc["repo_name"] = gold.gold.repo_name;
  doc["image_tag"] = gold.gold.image_tag;
  doc["state"] = serialize_state(gold.gold.state);
  doc["test_inventory"] = id_strings(gold.gold.test_inventory);
  if (gold.scenario) doc["scenario"] = gold.scenario->to_json();
  write_text_file(path, doc.dump(2) + "\n");
}

GoldFile load_gold_file(DriverContext& ctx, const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad gold file " + path.string() + ": " + e.what());
  }
  GoldFile out;
  out.gold.repo_name = doc.at("repo_name").get<std::string>();
  out.gold.image_tag = doc.at("image_tag").get<std::string>();
  out.gold.state = parse_state(doc.at("state").get<std::string>());
  out.gold.test_inventory = ids_from_json(doc.at("test_inventory"));
  if (doc.contains("scenario")) {
    out.scenario = SimScenario::from_json(doc.at("scenario"));
    if (ctx.sim) ctx.sim->register_scenario(*out.scenario);
  }
  return out;
}

// ---- specs ----

GeneratedSpec generate_spec(DriverContext& ctx, const GoldInstance& gold, std::uint64_t seed) {
  if (!ctx.llm) throw Error("spec generation needs an LLM client");
  GeneratedSpec out;
  out.seed = seed;

  DegradationPromptInputs inputs = sample_inputs(gold, ctx.pool, ctx.catalog, seed);
  std::string prompt = build_degradation_prompt(inputs, DegradationStage::initial);
  std::string reply = ctx.llm->complete(make_request(ctx, prompt));
  out.prompts_material = prompt + reply;
  out.spec = parse_task_spec(reply, inputs, &out.warnings);

  Rng refine_rng(seed ^ kRefineSalt);
  if (refine_rng.unit() < ctx.config.refine_probability) {
    std::string refine_prompt =
        build_degradation_prompt(inputs, DegradationStage::refine, out.spec);
    std::string refine_reply = ctx.llm->complete(make_request(ctx, refine_prompt));
    out.prompts_material += refine_prompt + refine_reply;
    try {
      out.spec = parse_task_spec(refine_reply, inputs, &out.warnings);
      out.refined = true;
    } catch (const Error& e) {
      out.warnings.push_back(std::string("refinement output unusable, kept draft: ") +
                             e.what());
    }
  }

  ctx.pool.add(out.spec.task_name);
  return out;
}

void save_spec_file(const GeneratedSpec& spec, const std::filesystem::path& path) {
  nlohmann::ordered_json doc;
  doc["seed"] = spec.seed;
  doc["refined"] = spec.refined;
  doc["spec"] = spec_to_json(spec.spec);
  doc["prompts_material"] = spec.prompts_material;
  doc["warnings"] = spec.warnings;
  write_text_file(path, doc.dump(2) + "\n");
}

GeneratedSpec load_spec_file(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad spec file " + path.string() + ": " + e.what());
  }
  GeneratedSpec out;
  out.seed = doc.at("seed").get<std::uint64_t>();
  out.refined = doc.value("refined", false);
  out.spec = spec_from_json(doc.at("spec"));
  out.prompts_material = doc.value("prompts_material", "");
  out.warnings = doc.value("warnings", std::vector<std::string>{});
  return out;
}

// ---- inversion ----

InvertOutcome invert_spec(DriverContext& ctx, const GoldInstance& gold,
                          const GeneratedSpec& spec) {
  InvertOutcome outcome;
  std::unique_ptr<AgentAdapter> agent = make_agent(ctx.config.agent);

  InversionOptions opt;
  opt.budget_s = ctx.config.budget_s;
  opt.artifact_dir = ctx.config.artifacts_root / "runs" /
                     (slugify(gold.repo_name) + "-" + std::to_string(spec.seed));

  DegradationRecord record = run_inversion(gold, spec.spec, *agent, ctx.backend(), opt);
  outcome.run = verify_and_classify(gold, record, ctx.backend());
  if (!outcome.run.accepted) {
    outcome.note = "discarded: " + outcome.run.discard_reason;
    return outcome;
  }

  if (!ctx.llm) throw Error("issue generation needs an LLM client");
  Rng level_rng(spec.seed ^ kLevelSalt);
  GuidanceLevel level = pick_guidance_level(level_rng);
  std::string issue_prompt =
      build_issue_prompt(spec.spec, outcome.run.classification.fail_to_pass, level);
  std::string reply = trim_right(ctx.llm->complete(make_request(ctx, issue_prompt)));

  auto [body, hint] = strip_hint(reply);
  IssueStatement issue;
  issue.body = trim_right(body);
  issue.guidance_level = level;
  if (hint) {
    std::string h = trim(*hint);
    if (!h.empty()) issue.hint = h;
  }
  if (issue.body.empty()) {
    outcome.run.accepted = false;
    outcome.run.discard_reason = "empty_issue_body";
    outcome.note = "discarded: issue body came back empty";
    return outcome;
  }

  std::string prompts_hash = sha256_hex(spec.prompts_material + issue_prompt + reply);
  outcome.instances = assemble_instance(outcome.run, issue, spec.seed, prompts_hash);
  return outcome;
}

void save_run_file(const InvertOutcome& outcome, const std::filesystem::path& path) {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json run;
  run["repo"] = outcome.run.repo;
  run["gold_image_tag"] = outcome.run.gold_image_tag;
  run["gold_fingerprint"] = outcome.run.gold_fingerprint;
  run["delta"] = delta_to_json(outcome.run.record.delta);
  run["spec"] = spec_to_json(outcome.run.record.spec);
  run["raw_dockerfile_text"] = outcome.run.record.raw_dockerfile_text;
  run["agent_steps"] = outcome.run.record.agent_steps;
  run["fail_to_pass"] = id_strings(outcome.run.classification.fail_to_pass);
  run["pass_to_pass"] = id_strings(outcome.run.classification.pass_to_pass);
  run["reproduction"] = outcome.run.reproduction == Reproduction::reproduced   ? "reproduced"
                        : outcome.run.reproduction == Reproduction::diverged ? "diverged"
                                                                             : "unchecked";
  run["accepted"] = outcome.run.accepted;
  run["discard_reason"] = outcome.run.discard_reason;
  doc["run"] = std::move(run);
  doc["note"] = outcome.note;
  doc["instances"] = nlohmann::ordered_json::array();
  for (const TaskInstance& inst : outcome.instances) {
    doc["instances"].push_back(instance_to_json(inst));
  }
  write_text_file(path, doc.dump(2) + "\n");
}

InvertOutcome load_run_file(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad run file " + path.string() + ": " + e.what());
  }
  InvertOutcome outcome;
  const auto& run = doc.at("run");
  outcome.run.repo = run.at("repo").get<std::string>();
  outcome.run.gold_image_tag = run.at("gold_image_tag").get<std::string>();
  outcome.run.gold_fingerprint = run.at("gold_fingerprint").get<std::string>();
  outcome.run.record.delta = delta_from_json(run.at("delta"));
  outcome.run.record.spec = spec_from_json(run.at("spec"));
  outcome.run.record.raw_dockerfile_text = run.value("raw_dockerfile_text", "");
  outcome.run.record.agent_steps = run.value("agent_steps", 0);
  outcome.run.classification.fail_to_pass = ids_from_json(run.at("fail_to_pass"));
  outcome.run.classification.pass_to_pass = ids_from_json(run.at("pass_to_pass"));
  outcome.run.classification.verdict = outcome.run.classification.fail_to_pass.empty()
                                           ? ClassifyVerdict::discard
                                           : ClassifyVerdict::instance_ok;
  std::string repro = run.value("reproduction", "unchecked");
  outcome.run.reproduction = repro == "reproduced" ? Reproduction::reproduced
                             : repro == "diverged" ? Reproduction::diverged
                                                   : Reproduction::unchecked;
  outcome.run.accepted = run.at("accepted").get<bool>();
  outcome.run.discard_reason = run.value("discard_reason", "");
  outcome.note = doc.value("note", "");
  for (const auto& inst : doc.at("instances")) {
    outcome.instances.push_back(instance_from_json(inst));
  }
  return outcome;
}

std::vector<std::filesystem::path> package_run(const InvertOutcome& outcome,
                                               const std::filesystem::path& dataset_root) {
  if (!outcome.run.accepted) throw Error("cannot package a discarded run");
  std::vector<std::filesystem::path> dirs;
  for (const TaskInstance& inst : outcome.instances) {
    dirs.push_back(emit_bundle(inst, dataset_root).root);
  }
  return dirs;
}

PipelineReport run_generation_pipeline(DriverContext& ctx, const std::vector<GoldFile>& golds,
                                       std::uint64_t base_seed, int per_gold,
                                       const std::filesystem::path& dataset_root) {
  PipelineReport report;
  for (std::size_t gi = 0; gi < golds.size(); ++gi) {
    const GoldInstance& gold = golds[gi].gold;
    for (int i = 0; i < per_gold; ++i) {
      std::uint64_t seed = base_seed + gi * 1000003ULL + static_cast<std::uint64_t>(i);
      ++report.specs_attempted;
      GeneratedSpec spec;
      try {
        spec = generate_spec(ctx, gold, seed);
      } catch (const Error& e) {
        report.notes.push_back(gold.repo_name + " seed " + std::to_string(seed) +
                               ": spec rejected: " + e.what());
        continue;
      }
      ++report.specs_parsed;
      InvertOutcome outcome;
      try {
        outcome = invert_spec(ctx, gold, spec);
      } catch (const Error& e) {
        report.notes.push_back(gold.repo_name + " seed " + std::to_string(seed) +
                               ": inversion failed: " + e.what());
        continue;
      }
      if (!outcome.run.accepted) {
        report.notes.push_back(gold.repo_name + " seed " + std::to_string(seed) + ": " +
                               outcome.note);
        continue;
      }
      ++report.runs_accepted;
      for (const std::filesystem::path& dir : package_run(outcome, dataset_root)) {
        report.bundles.push_back(dir);
      }
    }
  }
  if (ctx.llm) add_tokens_to_ledger(dataset_root, ctx.llm->tokens_spent());
  return report;
}

bool verify_bundle(DriverContext& ctx, const std::filesystem::path& bundle_dir,
                   std::string* detail) {
  TaskInstance inst = load_and_validate(bundle_dir);

  EnvironmentState poor;
  poor.base = parse_image_ref(inst.gold_image_tag);
  poor.codebase_ref = inst.repo;
  poor.deltas.push_back(inst.delta);

  auto failing_of = [&](const TestRunReport& report) {
    Classification c = classify_outcomes(bundle_test_order(inst), report);
    std::set<std::string> out;
    for (const TestId& id : c.fail_to_pass) out.insert(id.canonical());
    return out;
  };

  std::unique_ptr<Sandbox> box = ctx.backend().build_state(poor);
  TestRunReport first = box->run_test_script(bundle_test_order(inst));
  box->teardown();
  std::set<std::string> failing = failing_of(first);

  std::set<std::string> expect_failing;
  for (const TestId& id : inst.fail_to_pass) expect_failing.insert(id.canonical());

  if (failing != expect_failing) {
    if (detail) *detail = "failing set does not match recorded fail-to-pass";
    return false;
  }

  std::unique_ptr<Sandbox> box2 = ctx.backend().build_state(poor);
  TestRunReport second = box2->run_test_script(bundle_test_order(inst));
  box2->teardown();
  if (failing_of(second) != expect_failing) {
    if (detail) *detail = "failing set unstable across rebuilds";
    return false;
  }
  if (detail) *detail = "reproduced";
  return true;
}

// ---- codecs ----

nlohmann::ordered_json delta_to_json(const EnvDelta& delta) {
  nlohmann::ordered_json doc;
  doc["dockerfile_lines"] = delta.dockerfile_lines;
  doc["code_patches"] = nlohmann::ordered_json::array();
  for (const CodePatch& patch : delta.code_patches) {
    doc["code_patches"].push_back({{"path", patch.path}, {"content", patch.content}});
  }
  return doc;
}

EnvDelta delta_from_json(const nlohmann::json& doc) {
  EnvDelta delta;
  delta.dockerfile_lines = doc.at("dockerfile_lines").get<std::vector<std::string>>();
  if (doc.contains("code_patches")) {
    for (const auto& item : doc.at("code_patches")) {
      delta.code_patches.push_back(
          {item.at("path").get<std::string>(), item.at("content").get<std::string>()});
    }
  }
  return delta;
}

nlohmann::ordered_json spec_to_json(const InversionTaskSpec& spec) {
  nlohmann::ordered_json doc;
  doc["task_name"] = spec.task_name;
  doc["category"] = spec.category;
  doc["selected_uts"] = id_strings(spec.selected_uts);
  doc["task_description"] = spec.task_description;
  doc["expected_result"] = spec.expected_result;
  doc["recovery_strategy"] = spec.recovery_strategy;
  return doc;
}

InversionTaskSpec spec_from_json(const nlohmann::json& doc) {
  InversionTaskSpec spec;
  spec.task_name = doc.at("task_name").get<std::string>();
  spec.category = doc.at("category").get<std::string>();
  spec.selected_uts = ids_from_json(doc.at("selected_uts"));
  spec.task_description = doc.at("task_description").get<std::string>();
  spec.expected_result = doc.value("expected_result", "");
  spec.recovery_strategy = doc.value("recovery_strategy", "");
  return spec;
}

nlohmann::ordered_json instance_to_json(const TaskInstance& instance) {
  nlohmann::ordered_json doc;
  doc["id"] = instance.id;
  doc["repo"] = instance.repo;
  doc["gold_image_tag"] = instance.gold_image_tag;
  doc["task_name"] = instance.task_name;
  doc["delta"] = delta_to_json(instance.delta);
  doc["issue_text"] = instance.issue_text;
  doc["hint_present"] = instance.hint_present;
  doc["guidance_level"] = to_string(instance.guidance_level);
  doc["fail_to_pass"] = id_strings(instance.fail_to_pass);
  doc["pass_to_pass"] = id_strings(instance.pass_to_pass);
  doc["seed"] = instance.seed;
  doc["prompts_hash"] = instance.prompts_hash;
  return doc;
}

TaskInstance instance_from_json(const nlohmann::json& doc) {
  TaskInstance inst;
  inst.id = doc.at("id").get<std::string>();
  inst.repo = doc.at("repo").get<std::string>();
  inst.gold_image_tag = doc.at("gold_image_tag").get<std::string>();
  inst.task_name = doc.at("task_name").get<std::string>();
  inst.delta = delta_from_json(doc.at("delta"));
  inst.issue_text = doc.at("issue_text").get<std::string>();
  inst.hint_present = doc.at("hint_present").get<bool>();
  inst.guidance_level = guidance_level_from_string(doc.at("guidance_level").get<std::string>());
  inst.fail_to_pass = ids_from_json(doc.at("fail_to_pass"));
  inst.pass_to_pass = ids_from_json(doc.at("pass_to_pass"));
  inst.seed = doc.value("seed", std::uint64_t{0});
  inst.prompts_hash = doc.value("prompts_hash", "");
  return inst;
}

}  // namespace cligym
