#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fitgate {

enum class ErrorCode {
  kInvalidArgument,
  kDomain,
  kDimensionMismatch,
  kImageTooSmall,
  kIo,
  // PGM parsing
  kPgmMagic,
  kPgmHeader,
  kPgmMaxval,
  kPgmPayloadSize,
  // numerics
  kDegenerateSamples,
  kDivergence,
  kEmptyInput,
  // taxonomy parsing / queries
  kTaxonomyEmpty,
  kTaxonomyDuplicateChild,
  kTaxonomyUnknownParent,
  kTaxonomyCycle,
  kTaxonomyMultipleRoots,
  kTaxonomyMalformedLine,
  kUnknownNode,
  // detector / pipeline
  kSingleClass,
  kUnpairedItems,
  kConfig,
  kMissingPrerequisite,
  kFormat,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace fitgate
