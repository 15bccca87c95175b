#include "cligym/state.hpp"

#include <charconv>

#include "cligym/errors.hpp"
#include "cligym/util.hpp"

namespace cligym {

namespace {

constexpr std::string_view kHeader = "CLIGYM-STATE 1";

void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidState(what);
}

bool path_escapes_tree(std::string_view path) {
  if (path.empty() || path.front() == '/') return true;
  std::size_t start = 0;
  while (start <= path.size()) {
    std::size_t slash = path.find('/', start);
    std::string_view part = (slash == std::string_view::npos)
                                ? path.substr(start)
                                : path.substr(start, slash - start);
    if (part == "..") return true;
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  return false;
}

void validate_base(const BaseImageRef& base) {
  require(!base.name.empty(), "base image name empty");
  require(!base.tag.empty(), "base image tag empty");
  for (char c : base.name + base.tag) {
    require(!std::isspace(static_cast<unsigned char>(c)), "whitespace in base image ref");
  }
}

}  // namespace

std::string TestId::canonical() const {
  return selector.empty() ? path : path + "::" + selector;
}

TestId TestId::parse(std::string_view canonical) {
  TestId id;
  std::size_t sep = canonical.find("::");
  if (sep == std::string_view::npos) {
    id.path = std::string(canonical);
  } else {
    id.path = std::string(canonical.substr(0, sep));
    id.selector = std::string(canonical.substr(sep + 2));
  }
  if (id.path.empty()) throw InvalidState("test id with empty path: " + std::string(canonical));
  return id;
}

void validate_delta(const EnvDelta& delta) {
  if (delta.empty()) throw InvalidDelta("empty delta rejected");
  for (const std::string& line : delta.dockerfile_lines) {
    if (trim(line).empty()) throw InvalidDelta("blank dockerfile line");
    if (line.find('\n') != std::string::npos) {
      throw InvalidDelta("dockerfile line must be one logical line");
    }
  }
  for (const CodePatch& patch : delta.code_patches) {
    if (patch.path.empty()) throw InvalidDelta("patch with empty path");
    if (patch.path.find('\n') != std::string::npos) {
      throw InvalidDelta("newline in patch path");
    }
    if (path_escapes_tree(patch.path)) {
      throw InvalidDelta("patch path escapes tree: " + patch.path);
    }
  }
}

EnvironmentState apply_delta(const EnvironmentState& state, EnvDelta delta) {
  validate_delta(delta);
  EnvironmentState out = state;
  out.deltas.push_back(std::move(delta));
  return out;
}

EnvDelta compose_deltas(const EnvDelta& first, const EnvDelta& second) {
  validate_delta(first);
  validate_delta(second);
  EnvDelta out = first;
  out.dockerfile_lines.insert(out.dockerfile_lines.end(), second.dockerfile_lines.begin(),
                              second.dockerfile_lines.end());
  out.code_patches.insert(out.code_patches.end(), second.code_patches.begin(),
                          second.code_patches.end());
  return out;
}

std::string serialize_state(const EnvironmentState& state) {
  validate_base(state.base);
  require(state.codebase_ref.find('\n') == std::string::npos, "newline in codebase ref");
  std::string out;
  out += kHeader;
  out += "\nBASE ";
  out += state.base.name;
  out += ' ';
  out += state.base.tag;
  out += "\nCODEBASE ";
  out += state.codebase_ref;
  out += '\n';
  for (const EnvDelta& delta : state.deltas) {
    validate_delta(delta);
    out += "DELTA\n";
    out += "DOCKERFILE " + std::to_string(delta.dockerfile_lines.size()) + '\n';
    for (const std::string& line : delta.dockerfile_lines) {
      out += line;
      out += '\n';
    }
    for (const CodePatch& patch : delta.code_patches) {
      out += "PATCH " + std::to_string(patch.content.size()) + ' ' + patch.path + '\n';
      out += patch.content;
      out += '\n';
    }
  }
  return out;
}

EnvironmentState parse_state(std::string_view doc) {
  EnvironmentState state;
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string_view {
    require(pos < doc.size(), "truncated state document");
    std::size_t nl = doc.find('\n', pos);
    require(nl != std::string_view::npos, "unterminated line in state document");
    std::string_view line = doc.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };

  require(next_line() == kHeader, "bad state header");

  std::string_view base_line = next_line();
  require(base_line.substr(0, 5) == "BASE ", "missing BASE section");
  std::string_view rest = base_line.substr(5);
  std::size_t sp = rest.find(' ');
  require(sp != std::string_view::npos, "BASE needs name and tag");
  state.base.name = std::string(rest.substr(0, sp));
  state.base.tag = std::string(rest.substr(sp + 1));
  validate_base(state.base);

  std::string_view code_line = next_line();
  require(code_line.substr(0, 9) == "CODEBASE ", "missing CODEBASE section");
  state.codebase_ref = std::string(code_line.substr(9));

  while (pos < doc.size()) {
    require(next_line() == "DELTA", "expected DELTA block");
    EnvDelta delta;
    std::string_view count_line = next_line();
    require(count_line.substr(0, 11) == "DOCKERFILE ", "DELTA missing DOCKERFILE count");
    std::size_t n_lines = 0;
    {
      std::string_view num = count_line.substr(11);
      auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), n_lines);
      require(ec == std::errc() && p == num.data() + num.size(), "bad DOCKERFILE count");
    }
    for (std::size_t i = 0; i < n_lines; ++i) {
      delta.dockerfile_lines.emplace_back(next_line());
    }
    while (pos < doc.size() && doc.substr(pos, 6) == "PATCH ") {
      std::string_view patch_line = next_line();
      std::string_view body = patch_line.substr(6);
      std::size_t space = body.find(' ');
      require(space != std::string_view::npos, "PATCH needs size and path");
      std::size_t n_bytes = 0;
      {
        std::string_view num = body.substr(0, space);
        auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), n_bytes);
        require(ec == std::errc() && p == num.data() + num.size(), "bad PATCH size");
      }
      CodePatch patch;
      patch.path = std::string(body.substr(space + 1));
      require(pos + n_bytes <= doc.size(), "truncated PATCH content");
      patch.content = std::string(doc.substr(pos, n_bytes));
      pos += n_bytes;
      require(pos < doc.size() && doc[pos] == '\n', "PATCH content not newline-terminated");
      ++pos;
      delta.code_patches.push_back(std::move(patch));
    }
    validate_delta(delta);
    state.deltas.push_back(std::move(delta));
  }
  return state;
}

std::string fingerprint(const EnvironmentState& state) {
  return sha256_hex(serialize_state(state));
}

std::string short_fingerprint(std::string_view full) {
  return std::string(full.substr(0, 12));
}

std::vector<std::string> normalize_dockerfile_text(std::string_view text) {
  std::vector<std::string> logical;
  std::string pending;
  bool continuing = false;
  for (const std::string& raw : split_lines(text)) {
    std::string line = trim_right(raw);
    std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    bool continues = !line.empty() && line.back() == '\\';
    std::string content = continues ? trim(line.substr(0, line.size() - 1)) : stripped;
    if (continuing) {
      if (!content.empty()) {
        pending += ' ';
        pending += content;
      }
    } else {
      pending = content;
    }
    continuing = continues;
    if (!continuing && !pending.empty()) {
      logical.push_back(pending);
      pending.clear();
    }
  }
  if (!pending.empty()) logical.push_back(pending);  // dangling continuation
  return logical;
}

}  // namespace cligym
