#include "qhydro/error.hpp"

namespace qhydro {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidGrid: return "InvalidGrid";
        case ErrorCode::InvalidField: return "InvalidField";
        case ErrorCode::GridMismatch: return "GridMismatch";
        case ErrorCode::DegenerateState: return "DegenerateState";
        case ErrorCode::ConstantLambdaForbidden: return "ConstantLambdaForbidden";
        case ErrorCode::LogDomainError: return "LogDomainError";
        case ErrorCode::ChargeZero: return "ChargeZero";
        case ErrorCode::SolverDiverged: return "SolverDiverged";
        case ErrorCode::EigenSolverFailed: return "EigenSolverFailed";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::EvalDomainError: return "EvalDomainError";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
    }
    return "Unknown";
}

}  // namespace qhydro
