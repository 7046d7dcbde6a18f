#pragma once

#include <stdexcept>
#include <string>

namespace icrl {

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

#define ICRL_DEFINE_ERROR(Name)              \
    class Name : public Error {              \
      public:                                \
        using Error::Error;                  \
    }

// Graph / SCM
ICRL_DEFINE_ERROR(CyclicGraph);
ICRL_DEFINE_ERROR(BadParentIndex);
ICRL_DEFINE_ERROR(TargetOutOfRange);
ICRL_DEFINE_ERROR(EnvIndexOutOfRange);
ICRL_DEFINE_ERROR(GridTooLarge);

// Mixing
ICRL_DEFINE_ERROR(DimensionMismatch);
ICRL_DEFINE_ERROR(NotInImage);
ICRL_DEFINE_ERROR(ZeroVector);
ICRL_DEFINE_ERROR(DimensionTooSmall);

// Risk / identifiability
ICRL_DEFINE_ERROR(NotFullSupport);
ICRL_DEFINE_ERROR(DegenerateColumn);
ICRL_DEFINE_ERROR(ExponentCollision);
ICRL_DEFINE_ERROR(RankDeficient);

// Config / IO
ICRL_DEFINE_ERROR(ParseError);
ICRL_DEFINE_ERROR(SchemaError);
ICRL_DEFINE_ERROR(ValidationError);
ICRL_DEFINE_ERROR(IoError);

#undef ICRL_DEFINE_ERROR

}  // namespace icrl
