#pragma once

#include <compare>
#include <string>
#include <string_view>
#include <vector>

namespace cligym {

/// Reference to the base image an environment is constructed from.
struct BaseImageRef {
  std::string name;
  std::string tag;

  std::string ref() const { return name + ":" + tag; }
  auto operator<=>(const BaseImageRef&) const = default;
};

/// One test selector: a file path plus an optional in-file selector.
/// Canonical form is "path" or "path::selector".
struct TestId {
  std::string path;
  std::string selector;  // empty means whole file

  std::string canonical() const;
  static TestId parse(std::string_view canonical);
  auto operator<=>(const TestId&) const = default;
};

/// A codebase modification: `content` becomes the new text of `path`
/// (paths are relative to the codebase root).
struct CodePatch {
  std::string path;
  std::string content;
  auto operator<=>(const CodePatch&) const = default;
};

/// One recorded layer of environment modification: ordered container-build
/// directives plus ordered code patches. Directives are stored as logical
/// lines (continuation backslashes already folded).
struct EnvDelta {
  std::vector<std::string> dockerfile_lines;
  std::vector<CodePatch> code_patches;

  bool empty() const { return dockerfile_lines.empty() && code_patches.empty(); }
  auto operator<=>(const EnvDelta&) const = default;
};

/// Throws InvalidDelta unless the delta is non-empty, every directive line
/// is a single non-blank logical line, and every patch path stays inside
/// the tree.
void validate_delta(const EnvDelta& delta);

/// Full environment state: base image, accumulated delta history, and an
/// opaque codebase identifier (repo@commit). Values are immutable; all
/// operations return new states.
struct EnvironmentState {
  BaseImageRef base;
  std::vector<EnvDelta> deltas;
  std::string codebase_ref;

  auto operator<=>(const EnvironmentState&) const = default;
};

/// A verified healthy environment: every test in the inventory passed when
/// the instance was marked gold.
struct GoldInstance {
  EnvironmentState state;
  std::string repo_name;
  std::vector<TestId> test_inventory;
  std::string image_tag;
};

/// Returns a copy of `state` with `delta` appended as the newest layer.
EnvironmentState apply_delta(const EnvironmentState& state, EnvDelta delta);

/// Concatenates two deltas, first's entries first.
EnvDelta compose_deltas(const EnvDelta& first, const EnvDelta& second);

/// Canonical serialization: sections BASE, CODEBASE, then one DELTA block
/// per layer. Dockerfile lines appear verbatim so a delta block can be
/// appended to a build file directly. Round-trips through parse_state.
std::string serialize_state(const EnvironmentState& state);
EnvironmentState parse_state(std::string_view doc);

/// Stable content digest of the canonical serialization (hex sha256).
std::string fingerprint(const EnvironmentState& state);

/// First 12 hex chars of a digest, used for image tags and instance ids.
std::string short_fingerprint(std::string_view full);

/// Folds raw container-build text into logical lines: comment and blank
/// lines are dropped, and a trailing backslash joins the next line with a
/// single space.
std::vector<std::string> normalize_dockerfile_text(std::string_view text);

}  // namespace cligym
