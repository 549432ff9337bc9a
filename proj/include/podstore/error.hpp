#pragma once

#include <stdexcept>
#include <string>

namespace podstore {

enum class ErrorCode {
  kInvalidArgument = 1,
  kUnknownVariable,
  kUnknownTimeId,
  kUnknownPodId,
  kParseError,
  kPageNotAllocated,
  kTooManyLocalMembers,
  kMissingPod,
  kMalformedBytes,
  kUnresolvedGlobalId,
  kOverlappingPods,
  kTooLarge,
  kCapacityTooSmall,
  kDuplicatePodId,
  kNotFound,
  kMalformedManifest,
  kIoFailure,
  kTypeMismatch,
  kLocalityViolation,
};

const char* error_code_name(ErrorCode code);

// All recoverable failures in the library surface as this exception; the C
// API translates the code into a status value.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace podstore
