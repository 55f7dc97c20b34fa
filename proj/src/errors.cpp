#include "msx/errors.hpp"

namespace msx {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::ZeroColumn: return "ZeroColumn";
    case ErrorCode::SingularModel: return "SingularModel";
    case ErrorCode::InfeasibleSparsity: return "InfeasibleSparsity";
    case ErrorCode::CorpusTooSmall: return "CorpusTooSmall";
    case ErrorCode::UnbalancedDesign: return "UnbalancedDesign";
    case ErrorCode::EmptyCell: return "EmptyCell";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InsufficientRepetitions: return "InsufficientRepetitions";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NegativeValue: return "NegativeValue";
    case ErrorCode::RaggedRows: return "RaggedRows";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::SpecError: return "SpecError";
  }
  return "UnknownError";
}

}  // namespace msx
