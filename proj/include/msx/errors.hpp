#ifndef MSX_ERRORS_HPP
#define MSX_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace msx {

enum class ErrorCode {
  DegenerateInput,
  NotSymmetric,
  RankDeficient,
  NoConvergence,
  DomainError,
  ZeroColumn,
  SingularModel,
  InfeasibleSparsity,
  CorpusTooSmall,
  UnbalancedDesign,
  EmptyCell,
  EmptyInput,
  InsufficientRepetitions,
  ParseError,
  NegativeValue,
  RaggedRows,
  IoError,
  SpecError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace msx

#endif
