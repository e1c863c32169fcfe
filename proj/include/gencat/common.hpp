#pragma once

#include <stdexcept>
#include <string>

namespace gencat {

// Error taxonomy shared across the library. The C API maps these onto
// stable integer codes, so add new kinds at the end only.
enum class ErrorKind {
  Config,
  Parse,
  Validation,
  Io,
  Numeric,
  MissingArtifact,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error config_error(const std::string& m) { return Error(ErrorKind::Config, m); }
inline Error parse_error(const std::string& m) { return Error(ErrorKind::Parse, m); }
inline Error validation_error(const std::string& m) { return Error(ErrorKind::Validation, m); }
inline Error io_error(const std::string& m) { return Error(ErrorKind::Io, m); }
inline Error numeric_error(const std::string& m) { return Error(ErrorKind::Numeric, m); }
inline Error missing_artifact_error(const std::string& m) { return Error(ErrorKind::MissingArtifact, m); }

}  // namespace gencat
