#include "cligym/agent.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "cligym/errors.hpp"
#include "cligym/util.hpp"

namespace cligym {

AgentAction AgentAction::shell(std::string command) {
  AgentAction a;
  a.kind = Kind::shell;
  a.command = std::move(command);
  return a;
}

AgentAction AgentAction::file_edit(std::string path, std::string content) {
  AgentAction a;
  a.kind = Kind::file_edit;
  a.path = std::move(path);
  a.content = std::move(content);
  return a;
}

AgentAction AgentAction::finish(std::string message) {
  AgentAction a;
  a.kind = Kind::finish;
  a.message = std::move(message);
  return a;
}

nlohmann::ordered_json action_to_step_json(const AgentAction& action, int id) {
  nlohmann::ordered_json step;
  step["id"] = id;
  step["source"] = "agent";
  nlohmann::ordered_json fn;
  switch (action.kind) {
    case AgentAction::Kind::shell: {
      step["message"] = action.message.empty()
                            ? "Running command `" + action.command + "`."
                            : action.message;
      step["action"] = "run";
      fn["arguments"] = nlohmann::json{{"command", action.command}}.dump();
      fn["name"] = "execute_bash";
      break;
    }
    case AgentAction::Kind::file_edit: {
      step["message"] = action.message.empty() ? "Writing file " + action.path + "."
                                               : action.message;
      step["action"] = "edit";
      fn["arguments"] =
          nlohmann::json{{"command", "create"}, {"path", action.path},
                         {"file_text", action.content}}
              .dump();
      fn["name"] = "str_replace_editor";
      break;
    }
    case AgentAction::Kind::finish: {
      step["message"] = action.message;
      step["action"] = "finish";
      fn["arguments"] = nlohmann::json{{"message", action.message}}.dump();
      fn["name"] = "finish";
      break;
    }
  }
  step["function"] = std::move(fn);
  return step;
}

nlohmann::ordered_json observation_to_step_json(const AgentObservation& obs, int id) {
  nlohmann::ordered_json step;
  step["id"] = id;
  step["source"] = "environment";
  std::string message = obs.step_index == 0 ? obs.task : obs.output;
  if (obs.timed_out) message += "\n[command timed out]";
  step["message"] = message;
  step["action"] = "observe";
  return step;
}

AgentAction action_from_step_json(const nlohmann::json& step) {
  std::string kind = step.at("action").get<std::string>();
  nlohmann::json args;
  if (step.contains("function") && step.at("function").contains("arguments")) {
    const auto& raw = step.at("function").at("arguments");
    args = raw.is_string() ? nlohmann::json::parse(raw.get<std::string>()) : raw;
  }
  if (kind == "run") return AgentAction::shell(args.at("command").get<std::string>());
  if (kind == "edit") {
    return AgentAction::file_edit(args.at("path").get<std::string>(),
                                  args.value("file_text", ""));
  }
  if (kind == "finish") {
    std::string message = args.value("message", step.value("message", ""));
    return AgentAction::finish(message);
  }
  throw Error("unknown agent action kind: " + kind);
}

ScriptedAgent::ScriptedAgent(std::vector<AgentAction> actions, std::string id)
    : actions_(std::move(actions)), id_(std::move(id)) {}

ScriptedAgent ScriptedAgent::from_json_file(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad agent script " + path.string() + ": " + e.what());
  }
  std::vector<AgentAction> actions;
  for (const auto& item : doc) {
    std::string kind = item.at("action").get<std::string>();
    if (kind == "run") {
      actions.push_back(AgentAction::shell(item.at("command").get<std::string>()));
    } else if (kind == "edit") {
      actions.push_back(AgentAction::file_edit(item.at("path").get<std::string>(),
                                               item.value("content", "")));
    } else if (kind == "finish") {
      actions.push_back(AgentAction::finish(item.value("message", "done")));
    } else {
      throw Error("unknown scripted action: " + kind);
    }
  }
  return ScriptedAgent(std::move(actions), "scripted:" + path.filename().string());
}

std::optional<AgentAction> ScriptedAgent::next_action(const AgentObservation&) {
  if (next_ >= actions_.size()) return std::nullopt;
  return actions_[next_++];
}

std::vector<std::string> extract_backtick_commands(const std::string& text) {
  std::vector<std::string> commands;
  std::size_t pos = 0;
  while (true) {
    std::size_t open = text.find('`', pos);
    if (open == std::string::npos) break;
    std::size_t close = text.find('`', open + 1);
    if (close == std::string::npos) break;
    std::string inner = trim(text.substr(open + 1, close - open - 1));
    if (!inner.empty() && inner.find('\n') == std::string::npos) {
      commands.push_back(inner);
    }
    pos = close + 1;
  }
  return commands;
}

std::optional<AgentAction> MockBreakerAgent::next_action(const AgentObservation& obs) {
  if (!primed_) {
    primed_ = true;
    std::string dockerfile;
    for (const std::string& cmd : extract_backtick_commands(obs.task)) {
      queue_.push_back(AgentAction::shell(cmd));
      dockerfile += "RUN " + cmd + "\n";
    }
    if (!dockerfile.empty()) {
      queue_.push_back(AgentAction::file_edit("/logs/Dockerfile", dockerfile));
    }
    queue_.push_back(AgentAction::finish("Degradation applied; Dockerfile summarized."));
  }
  if (queue_.empty()) return std::nullopt;
  AgentAction next = queue_.front();
  queue_.pop_front();
  return next;
}

void MockBreakerAgent::reset() {
  primed_ = false;
  queue_.clear();
}

std::optional<AgentAction> MockFixerAgent::next_action(const AgentObservation& obs) {
  if (!primed_) {
    primed_ = true;
    for (const std::string& cmd : extract_backtick_commands(obs.task)) {
      queue_.push_back(AgentAction::shell(cmd));
    }
    queue_.push_back(AgentAction::finish("Applied the recovery steps."));
  }
  if (queue_.empty()) return std::nullopt;
  AgentAction next = queue_.front();
  queue_.pop_front();
  return next;
}

void MockFixerAgent::reset() {
  primed_ = false;
  queue_.clear();
}

// ---- process agent ----

struct ProcessAgent::Child {
  pid_t pid = -1;
  int to_child = -1;
  int from_child = -1;
  std::string buffer;

  ~Child() {
    if (to_child >= 0) ::close(to_child);
    if (from_child >= 0) ::close(from_child);
    if (pid > 0) {
      kill(pid, SIGKILL);
      waitpid(pid, nullptr, 0);
    }
  }
};

ProcessAgent::ProcessAgent(std::vector<std::string> argv, double step_timeout_s)
    : argv_(std::move(argv)), step_timeout_s_(step_timeout_s) {
  if (argv_.empty()) throw Error("process agent needs an argv");
}

ProcessAgent::~ProcessAgent() { stop(); }

void ProcessAgent::spawn() {
  int in_pipe[2], out_pipe[2];
  if (pipe(in_pipe) || pipe(out_pipe)) {
    throw AgentCrashed(std::string("pipe failed: ") + std::strerror(errno));
  }
  pid_t pid = fork();
  if (pid < 0) throw AgentCrashed(std::string("fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
    std::vector<char*> args;
    for (const std::string& a : argv_) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    execvp(args[0], args.data());
    _exit(127);
  }
  child_ = std::make_unique<Child>();
  child_->pid = pid;
  child_->to_child = in_pipe[1];
  child_->from_child = out_pipe[0];
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
}

void ProcessAgent::stop() {
  child_.reset();
  next_id_ = 0;
}

void ProcessAgent::reset() { stop(); }

std::optional<AgentAction> ProcessAgent::next_action(const AgentObservation& obs) {
  if (!child_) spawn();

  std::string line = observation_to_step_json(obs, next_id_++).dump() + "\n";
  std::size_t written = 0;
  while (written < line.size()) {
    ssize_t n = ::write(child_->to_child, line.data() + written, line.size() - written);
    if (n <= 0) throw AgentCrashed("agent process closed its stdin pipe");
    written += static_cast<std::size_t>(n);
  }

  // Read one reply line within the step timeout.
  while (true) {
    std::size_t nl = child_->buffer.find('\n');
    if (nl != std::string::npos) {
      std::string reply = child_->buffer.substr(0, nl);
      child_->buffer.erase(0, nl + 1);
      if (trim(reply).empty()) continue;
      try {
        AgentAction action = action_from_step_json(nlohmann::json::parse(reply));
        ++next_id_;
        return action;
      } catch (const std::exception& e) {
        throw AgentCrashed(std::string("unparsable agent reply: ") + e.what());
      }
    }
    struct pollfd pfd = {child_->from_child, POLLIN, 0};
    int rc = poll(&pfd, 1, static_cast<int>(step_timeout_s_ * 1000));
    if (rc == 0) throw AgentCrashed("agent step timed out");
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw AgentCrashed(std::string("poll failed: ") + std::strerror(errno));
    }
    char buf[4096];
    ssize_t n = ::read(child_->from_child, buf, sizeof(buf));
    if (n <= 0) throw AgentCrashed("agent process exited mid-run");
    child_->buffer.append(buf, static_cast<std::size_t>(n));
  }
}

std::unique_ptr<AgentAdapter> make_agent(const std::string& spec) {
  if (spec == "breaker") return std::make_unique<MockBreakerAgent>();
  if (spec == "fixer") return std::make_unique<MockFixerAgent>();
  if (spec.rfind("scripted:", 0) == 0) {
    return std::make_unique<ScriptedAgent>(
        ScriptedAgent::from_json_file(spec.substr(std::string("scripted:").size())));
  }
  if (spec.rfind("process:", 0) == 0) {
    std::vector<std::string> argv = split_ws(spec.substr(std::string("process:").size()));
    return std::make_unique<ProcessAgent>(std::move(argv));
  }
  throw Error("unknown agent spec: " + spec + " (use breaker, fixer, scripted:<file>, "
              "process:<argv>)");
}

}  // namespace cligym
