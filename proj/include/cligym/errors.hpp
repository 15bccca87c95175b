#pragma once

#include <stdexcept>
#include <string>

namespace cligym {

// Base class for everything this toolkit throws deliberately.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- state model ----
class InvalidDelta : public Error {
 public:
  using Error::Error;
};
class InvalidState : public Error {
 public:
  using Error::Error;
};

// ---- test runs ----
class EmptySelection : public Error {
 public:
  using Error::Error;
};

// ---- prompt engine ----
class EmptyCatalog : public Error {
 public:
  using Error::Error;
};
class EmptyInventory : public Error {
 public:
  using Error::Error;
};
class MissingDraft : public Error {
 public:
  using Error::Error;
};
class MissingField : public Error {
 public:
  explicit MissingField(const std::string& field)
      : Error("missing field: " + field), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};
class NoValidTests : public Error {
 public:
  using Error::Error;
};
class TooManyTests : public Error {
 public:
  using Error::Error;
};
class EmptySymptoms : public Error {
 public:
  using Error::Error;
};

// ---- llm gateway ----
class TransportError : public Error {
 public:
  using Error::Error;
};
class AuthRejected : public Error {
 public:
  using Error::Error;
};
class MalformedResponse : public Error {
 public:
  using Error::Error;
};

// ---- sandbox ----
class BuildFailed : public Error {
 public:
  explicit BuildFailed(const std::string& log)
      : Error("build failed:\n" + log), log_(log) {}
  const std::string& log() const { return log_; }

 private:
  std::string log_;
};
class UnknownSimOp : public Error {
 public:
  using Error::Error;
};
class SessionDead : public Error {
 public:
  using Error::Error;
};

// ---- inversion harness ----
class NoDockerfileWritten : public Error {
 public:
  using Error::Error;
};
class AgentCrashed : public Error {
 public:
  using Error::Error;
};

// ---- task packager ----
class IoFailure : public Error {
 public:
  using Error::Error;
};
class CollisionDifferentContent : public Error {
 public:
  using Error::Error;
};
class MissingFile : public Error {
 public:
  explicit MissingFile(const std::string& name)
      : Error("missing bundle file: " + name), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};
class SchemaViolation : public Error {
 public:
  using Error::Error;
};
class TestSetMismatch : public Error {
 public:
  using Error::Error;
};

// ---- trajectory pipeline ----
class NotSuccessful : public Error {
 public:
  using Error::Error;
};

}  // namespace cligym
