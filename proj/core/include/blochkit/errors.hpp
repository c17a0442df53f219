// SPDX-License-Identifier: Apache-2.0

#ifndef BLOCHKIT_ERRORS_HPP
#define BLOCHKIT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace blochkit
{

enum class ErrorCode
{
  BadShape,
  NotCoercive,
  InvalidField,
  InvalidArgument,
  StepTooLarge,
  SolverFailure,
  EmptyCluster,
  DegenerateCluster,
  RetriesExhausted,
  BranchCollision,
  WindowBreach,
  CoverFailure,
  NoBumpSite,
  VerificationFailed,
  NotLocalMin,
  StepUnstable,
  NearSingular
};

const char *ToString(ErrorCode code);

class Error : public std::runtime_error
{
public:
  Error(ErrorCode code, const std::string &message);
  ErrorCode code() const { return code_; }

private:
  ErrorCode code_;
};

// Throws Error(code, message) when cond is false.
inline void Require(bool cond, ErrorCode code, const std::string &message)
{
  if (!cond)
  {
    throw Error(code, message);
  }
}

}  // namespace blochkit

#endif  // BLOCHKIT_ERRORS_HPP
