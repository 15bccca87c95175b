#include "cligym/inversion.hpp"

#include <chrono>
#include <set>

#include "cligym/errors.hpp"
#include "cligym/util.hpp"

namespace cligym {

namespace {

double mono_s() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

std::set<std::string> failing_set(const Classification& c) {
  std::set<std::string> out;
  for (const TestId& id : c.fail_to_pass) out.insert(id.canonical());
  return out;
}

}  // namespace

DegradationRecord run_inversion(const GoldInstance& gold, const InversionTaskSpec& spec,
                                AgentAdapter& agent, SandboxBackend& backend,
                                const InversionOptions& options) {
  std::unique_ptr<Sandbox> box = backend.build_state(gold.state);
  const double deadline = mono_s() + options.budget_s;

  std::string step_log;
  int steps = 0;
  int wire_id = 0;
  AgentObservation obs;
  obs.step_index = 0;
  obs.task = degradation_instruction(spec);

  agent.reset();
  try {
    while (mono_s() < deadline) {
      std::optional<AgentAction> action;
      try {
        action = agent.next_action(obs);
      } catch (const AgentCrashed&) {
        throw;
      } catch (const std::exception& e) {
        throw AgentCrashed(std::string("agent adapter failed: ") + e.what() +
                           "\nsteps so far:\n" + step_log);
      }
      if (!action) break;

      step_log += action_to_step_json(*action, wire_id++).dump() + "\n";
      if (action->kind == AgentAction::Kind::finish) break;
      ++steps;

      AgentObservation next;
      next.step_index = obs.step_index + 1;
      if (action->kind == AgentAction::Kind::shell) {
        double remaining = deadline - mono_s();
        if (remaining <= 0) break;
        ExecResult r = box->exec_command(
            action->command, std::min(options.command_timeout_s, remaining));
        next.output = r.stdout_text + r.stderr_text;
        next.exit_code = r.exit_code;
        next.timed_out = r.timed_out;
      } else {
        box->write_file(action->path, action->content);
        next.output = "wrote " + action->path;
      }
      step_log += observation_to_step_json(next, wire_id++).dump() + "\n";
      obs = std::move(next);
    }

    std::optional<std::string> dockerfile = box->read_file("/logs/Dockerfile");
    if (!options.artifact_dir.empty()) {
      write_text_file(options.artifact_dir / "trajectory.json", step_log);
      if (dockerfile) write_text_file(options.artifact_dir / "Dockerfile", *dockerfile);
    }
    box->teardown();

    if (!dockerfile) {
      throw NoDockerfileWritten("agent finished without summarizing /logs/Dockerfile");
    }
    DegradationRecord record;
    record.raw_dockerfile_text = *dockerfile;
    record.delta.dockerfile_lines = normalize_dockerfile_text(*dockerfile);
    if (record.delta.dockerfile_lines.empty()) {
      throw NoDockerfileWritten("summarized Dockerfile is empty");
    }
    record.spec = spec;
    record.agent_steps = steps;
    return record;
  } catch (...) {
    box->teardown();
    throw;
  }
}

InversionRun verify_and_classify(const GoldInstance& gold, const DegradationRecord& record,
                                 SandboxBackend& backend) {
  InversionRun run;
  run.repo = gold.repo_name;
  run.gold_image_tag = gold.image_tag;
  run.gold_fingerprint = fingerprint(gold.state);
  run.record = record;

  EnvironmentState poor = apply_delta(gold.state, record.delta);

  auto classify_fresh = [&]() {
    std::unique_ptr<Sandbox> box = backend.build_state(poor);
    TestRunReport report = box->run_test_script(record.spec.selected_uts);
    Classification c = classify_outcomes(record.spec.selected_uts, report);
    box->teardown();
    return c;
  };

  try {
    run.classification = classify_fresh();
  } catch (const BuildFailed& e) {
    run.discard_reason = "build_failed";
    run.reproduction = Reproduction::unchecked;
    run.accepted = false;
    (void)e;
    return run;
  }

  if (run.classification.verdict == ClassifyVerdict::discard) {
    run.discard_reason = "all_pass";
    run.reproduction = Reproduction::unchecked;
    return run;
  }

  Classification second;
  try {
    second = classify_fresh();
  } catch (const BuildFailed&) {
    run.discard_reason = "build_failed";
    run.reproduction = Reproduction::diverged;
    return run;
  }
  run.reproduction = failing_set(run.classification) == failing_set(second)
                         ? Reproduction::reproduced
                         : Reproduction::diverged;
  run.accepted = run.reproduction == Reproduction::reproduced;
  if (!run.accepted) run.discard_reason = "diverged";
  return run;
}

std::vector<TaskInstance> assemble_instance(const InversionRun& run,
                                            const IssueStatement& issue, std::uint64_t seed,
                                            const std::string& prompts_hash) {
  if (!run.accepted) throw Error("assemble_instance requires an accepted run");

  auto make = [&](const std::string& text, bool hint_present) {
    TaskInstance inst;
    inst.repo = run.repo;
    inst.gold_image_tag = run.gold_image_tag;
    inst.task_name = run.record.spec.task_name;
    inst.delta = run.record.delta;
    inst.issue_text = text;
    inst.hint_present = hint_present;
    inst.guidance_level = issue.guidance_level;
    inst.fail_to_pass = run.classification.fail_to_pass;
    inst.pass_to_pass = run.classification.pass_to_pass;
    inst.seed = seed;
    inst.prompts_hash = prompts_hash;
    // Content digest covers the environment and the issue, so the hinted
    // and hint-free variants of one run get distinct ids.
    std::string digest = sha256_hex(run.gold_fingerprint + "\n" +
                                    join(inst.delta.dockerfile_lines, "\n") + "\n" + text +
                                    (hint_present ? "\nh" : "\nn"));
    inst.id = slugify(run.repo) + "__" + slugify(inst.task_name) + "__" +
              short_fingerprint(digest);
    return inst;
  };

  std::vector<TaskInstance> out;
  out.push_back(make(issue.full_text(), issue.hint.has_value()));
  if (issue.hint) out.push_back(make(issue.body, false));
  return out;
}

}  // namespace cligym
