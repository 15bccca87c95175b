#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "cligym/inversion.hpp"

namespace cligym {

/// On-disk bundle layout: Dockerfile, task.yaml, docker-compose.yaml,
/// run-tests.sh plus the meta.json sidecar carrying the test sets and
/// provenance the four files cannot hold.
struct TaskBundle {
  std::filesystem::path root;
  TaskInstance instance;
};

inline constexpr const char* kBundleFiles[] = {
    "Dockerfile", "task.yaml", "docker-compose.yaml", "run-tests.sh", "meta.json"};

/// Deterministic file contents for an instance, keyed by file name.
std::map<std::string, std::string> render_bundle_files(const TaskInstance& instance);

/// Writes the bundle under out_root/<instance id>. Re-emitting an
/// unchanged instance is a byte-exact no-op; a directory holding different
/// bytes raises CollisionDifferentContent. Writes take a per-directory
/// lock file.
TaskBundle emit_bundle(const TaskInstance& instance, const std::filesystem::path& out_root);

/// Parses and re-validates a bundle directory. Raises MissingFile,
/// SchemaViolation, or TestSetMismatch (script tests != metadata tests).
TaskInstance load_and_validate(const std::filesystem::path& dir);

/// The script test list: fail-to-pass then pass-to-pass, selection order.
std::vector<TestId> bundle_test_order(const TaskInstance& instance);

}  // namespace cligym
