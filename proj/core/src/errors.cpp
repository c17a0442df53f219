// SPDX-License-Identifier: Apache-2.0

#include "blochkit/errors.hpp"

namespace blochkit
{

const char *ToString(ErrorCode code)
{
  switch (code)
  {
    case ErrorCode::BadShape:
      return "BadShape";
    case ErrorCode::NotCoercive:
      return "NotCoercive";
    case ErrorCode::InvalidField:
      return "InvalidField";
    case ErrorCode::InvalidArgument:
      return "InvalidArgument";
    case ErrorCode::StepTooLarge:
      return "StepTooLarge";
    case ErrorCode::SolverFailure:
      return "SolverFailure";
    case ErrorCode::EmptyCluster:
      return "EmptyCluster";
    case ErrorCode::DegenerateCluster:
      return "DegenerateCluster";
    case ErrorCode::RetriesExhausted:
      return "RetriesExhausted";
    case ErrorCode::BranchCollision:
      return "BranchCollision";
    case ErrorCode::WindowBreach:
      return "WindowBreach";
    case ErrorCode::CoverFailure:
      return "CoverFailure";
    case ErrorCode::NoBumpSite:
      return "NoBumpSite";
    case ErrorCode::VerificationFailed:
      return "VerificationFailed";
    case ErrorCode::NotLocalMin:
      return "NotLocalMin";
    case ErrorCode::StepUnstable:
      return "StepUnstable";
    case ErrorCode::NearSingular:
      return "NearSingular";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string &message)
  : std::runtime_error(std::string(ToString(code)) + ": " + message), code_(code)
{
}

}  // namespace blochkit
