#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace chemhop {

enum class ErrorCode {
  InvalidArgument,
  // llm gateway
  ProviderUnreachable,
  ProviderRejected,
  BudgetExceeded,
  MalformedOutput,
  // ingest / enrichment
  SourceUnreachable,
  SchemaMismatch,
  NoIntroductionFound,
  AmbiguousName,
  // entity extraction
  ProviderUnavailable,
  // graph store / sampling
  CorruptFile,
  NoPathsAvailable,
  // qa
  AnswerLeak,
  AnswerMismatch,
  ChainBroken,
  IncompleteRecords,
  // cli
  MissingInput,
  ConfigInvalid,
};

std::string_view to_string(ErrorCode code);

/// Single exception type carried through the pipeline. Callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace chemhop
