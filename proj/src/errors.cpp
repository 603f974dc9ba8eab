#include "intent_rnnt/errors.hpp"

namespace intent_rnnt {

std::string_view category_name(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kDimension: return "dimension";
    case ErrorCategory::kArgument: return "argument";
    case ErrorCategory::kConfiguration: return "configuration";
    case ErrorCategory::kParse: return "parse";
    case ErrorCategory::kIntegrity: return "integrity";
    case ErrorCategory::kEvaluation: return "evaluation";
    case ErrorCategory::kSpec: return "spec";
    case ErrorCategory::kIo: return "io";
  }
  return "unknown";
}

int exit_code(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kDimension: return 10;
    case ErrorCategory::kArgument: return 11;
    case ErrorCategory::kConfiguration: return 12;
    case ErrorCategory::kParse: return 13;
    case ErrorCategory::kIntegrity: return 14;
    case ErrorCategory::kEvaluation: return 15;
    case ErrorCategory::kSpec: return 16;
    case ErrorCategory::kIo: return 17;
  }
  return 1;
}

}  // namespace intent_rnnt
