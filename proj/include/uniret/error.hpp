#pragma once

#include <stdexcept>
#include <string>

namespace uniret {

// Error taxonomy. The category decides the process exit code / C API status:
// usage -> 2, data -> 3, io -> 4, numeric -> 5.
enum class ErrorKind {
  Usage,

  // data
  MalformedLine,
  MissingDocId,
  BadDocId,
  NoPayload,
  OverlappingPosNeg,
  DuplicateDocId,
  DocIdContentConflict,
  DanglingDocId,
  EmptyCorpusFallback,
  EmptyDataset,
  DuplicateJudgment,
  EmptyContent,
  BadMediaPath,
  BadMagic,
  VersionMismatch,
  TruncatedFile,
  CountMismatch,

  // io
  Io,
  MediaReadError,

  // numeric
  DegenerateEmbedding,
  DegeneratePrefix,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

  // 2 usage, 3 data, 4 io, 5 numeric
  int exit_code() const {
    switch (kind_) {
      case ErrorKind::Usage:
        return 2;
      case ErrorKind::Io:
      case ErrorKind::MediaReadError:
        return 4;
      case ErrorKind::DegenerateEmbedding:
      case ErrorKind::DegeneratePrefix:
        return 5;
      default:
        return 3;
    }
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace uniret
