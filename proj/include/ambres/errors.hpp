#pragma once

#include <stdexcept>
#include <string>

namespace ambres {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define AMBRES_DEFINE_ERROR(Name)   \
  class Name : public Error {       \
   public:                          \
    using Error::Error;             \
  };

// schema compiler
AMBRES_DEFINE_ERROR(MalformedSchema)
AMBRES_DEFINE_ERROR(UnsupportedFeature)
AMBRES_DEFINE_ERROR(DepthExceeded)

// fsm engine
AMBRES_DEFINE_ERROR(RegexParseError)
AMBRES_DEFINE_ERROR(StateBudgetExceeded)
AMBRES_DEFINE_ERROR(EmptyLanguage)
AMBRES_DEFINE_ERROR(UnknownState)
AMBRES_DEFINE_ERROR(DisallowedToken)

// decoder
AMBRES_DEFINE_ERROR(NoAllowedToken)
AMBRES_DEFINE_ERROR(BackendFailure)
AMBRES_DEFINE_ERROR(ProtocolError)

// sim world / dataset
AMBRES_DEFINE_ERROR(UnmatchableReferent)
AMBRES_DEFINE_ERROR(GenerationExhausted)
AMBRES_DEFINE_ERROR(ChecksumMismatch)
AMBRES_DEFINE_ERROR(MissingFile)

// reasoning pipeline
AMBRES_DEFINE_ERROR(ReasonerFailure)
AMBRES_DEFINE_ERROR(UnresolvedAmbiguity)
AMBRES_DEFINE_ERROR(NoDistinguishingAttribute)
AMBRES_DEFINE_ERROR(OutOfBounds)
AMBRES_DEFINE_ERROR(CardinalityMismatch)

// eval
AMBRES_DEFINE_ERROR(LengthMismatch)
AMBRES_DEFINE_ERROR(MissingScene)

#undef AMBRES_DEFINE_ERROR

}  // namespace ambres
