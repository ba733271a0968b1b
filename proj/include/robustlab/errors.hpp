#pragma once

#include <stdexcept>
#include <string>

namespace robustlab {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnsupportedImageSize : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct ImageDecodeError : Error { using Error::Error; };
struct InvalidConfig : Error { using Error::Error; };

struct TooManyEntries : Error { using Error::Error; };
struct ZeroTruthLength : Error { using Error::Error; };
struct GroupTooSmall : Error { using Error::Error; };

struct AnnotatorUnavailable : Error { using Error::Error; };
struct AnnotationLengthViolation : Error { using Error::Error; };
struct ClientUnavailable : Error { using Error::Error; };
struct EmptyRun : Error { using Error::Error; };
struct EmptyInput : Error { using Error::Error; };

}  // namespace robustlab
