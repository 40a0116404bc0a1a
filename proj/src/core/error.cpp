#include "fitgate/core/error.hpp"

namespace fitgate {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kDomain: return "domain";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kImageTooSmall: return "image_too_small";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kPgmMagic: return "pgm_magic";
    case ErrorCode::kPgmHeader: return "pgm_header";
    case ErrorCode::kPgmMaxval: return "pgm_maxval";
    case ErrorCode::kPgmPayloadSize: return "pgm_payload_size";
    case ErrorCode::kDegenerateSamples: return "degenerate_samples";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kEmptyInput: return "empty_input";
    case ErrorCode::kTaxonomyEmpty: return "taxonomy_empty";
    case ErrorCode::kTaxonomyDuplicateChild: return "taxonomy_duplicate_child";
    case ErrorCode::kTaxonomyUnknownParent: return "taxonomy_unknown_parent";
    case ErrorCode::kTaxonomyCycle: return "taxonomy_cycle";
    case ErrorCode::kTaxonomyMultipleRoots: return "taxonomy_multiple_roots";
    case ErrorCode::kTaxonomyMalformedLine: return "taxonomy_malformed_line";
    case ErrorCode::kUnknownNode: return "unknown_node";
    case ErrorCode::kSingleClass: return "single_class";
    case ErrorCode::kUnpairedItems: return "unpaired_items";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kMissingPrerequisite: return "missing_prerequisite";
    case ErrorCode::kFormat: return "format";
  }
  return "unknown";
}

}  // namespace fitgate
