#include "qbvi/error.hpp"

namespace qbvi {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotSpd: return "NotSPD";
    case ErrorKind::NotPositive: return "NotPositive";
    case ErrorKind::Singular: return "Singular";
    case ErrorKind::NonFiniteLoglik: return "NonFiniteLoglik";
    case ErrorKind::NonFiniteLogPost: return "NonFiniteLogPost";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::Domain: return "DomainError";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::TooShort: return "TooShort";
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::Parse: return "ParseError";
    case ErrorKind::Io: return "IoError";
  }
  return "Unknown";
}

}  // namespace qbvi
