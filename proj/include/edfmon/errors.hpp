#pragma once

#include <stdexcept>
#include <string>

namespace edfmon {

// Base of every error raised by the library. Each subclass names one failure
// mode so that callers (and the CLI) can react to it specifically.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define EDFMON_DEFINE_ERROR(Name)                   \
  class Name : public Error {                       \
   public:                                          \
    explicit Name(const std::string& what)          \
        : Error(std::string(#Name ": ") + what) {}  \
  }

EDFMON_DEFINE_ERROR(DimensionMismatch);
EDFMON_DEFINE_ERROR(NotSymmetric);
EDFMON_DEFINE_ERROR(NotPositiveDefinite);
EDFMON_DEFINE_ERROR(DegenerateSeries);
EDFMON_DEFINE_ERROR(EmptySample);
EDFMON_DEFINE_ERROR(TooFewObservations);
EDFMON_DEFINE_ERROR(DuplicatePoints);
EDFMON_DEFINE_ERROR(NoPointsRetained);
EDFMON_DEFINE_ERROR(SingularJacobian);
EDFMON_DEFINE_ERROR(AlphaNotInTable);
EDFMON_DEFINE_ERROR(POutOfRange);
EDFMON_DEFINE_ERROR(TauOutOfRange);
EDFMON_DEFINE_ERROR(ChangeBeyondHorizon);
EDFMON_DEFINE_ERROR(HorizonExceeded);
EDFMON_DEFINE_ERROR(InvalidArgument);
EDFMON_DEFINE_ERROR(ParseError);

#undef EDFMON_DEFINE_ERROR

}  // namespace edfmon
