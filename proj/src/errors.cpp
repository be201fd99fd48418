#include "deltaforge/errors.hpp"

namespace deltaforge {

const char * error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::MalformedHeader:   return "MalformedHeader";
        case ErrorKind::UnsupportedDtype:  return "UnsupportedDtype";
        case ErrorKind::NonFiniteValue:    return "NonFiniteValue";
        case ErrorKind::IoError:           return "IoError";
        case ErrorKind::InvalidTensor:     return "InvalidTensor";
        case ErrorKind::ShapeMismatch:     return "ShapeMismatch";
        case ErrorKind::MissingTensor:     return "MissingTensor";
        case ErrorKind::InvalidRate:       return "InvalidRate";
        case ErrorKind::InvalidWindow:     return "InvalidWindow";
        case ErrorKind::MissingGradient:   return "MissingGradient";
        case ErrorKind::InvalidFactor:     return "InvalidFactor";
        case ErrorKind::InvalidSpread:     return "InvalidSpread";
        case ErrorKind::InvalidBlockCount: return "InvalidBlockCount";
        case ErrorKind::NotAMatrix:        return "NotAMatrix";
        case ErrorKind::RankOutOfRange:    return "RankOutOfRange";
        case ErrorKind::InvalidFraction:   return "InvalidFraction";
        case ErrorKind::AlphaOutOfRange:   return "AlphaOutOfRange";
        case ErrorKind::InvalidSpec:       return "InvalidSpec";
        case ErrorKind::LayoutMismatch:    return "LayoutMismatch";
        case ErrorKind::DivergedTraining:  return "DivergedTraining";
        case ErrorKind::InvalidC:          return "InvalidC";
        case ErrorKind::InvalidConfig:     return "InvalidConfig";
    }
    return "Error";
}

} // namespace deltaforge
