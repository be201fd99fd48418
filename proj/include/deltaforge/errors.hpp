#pragma once

#include <stdexcept>
#include <string>

namespace deltaforge {

// Every failure the library reports, by kind. The CLI maps kinds to exit
// codes: I/O failures exit 2, everything else (validation) exits 1.
enum class ErrorKind {
    MalformedHeader,
    UnsupportedDtype,
    NonFiniteValue,
    IoError,
    InvalidTensor,
    ShapeMismatch,
    MissingTensor,
    InvalidRate,
    InvalidWindow,
    MissingGradient,
    InvalidFactor,
    InvalidSpread,
    InvalidBlockCount,
    NotAMatrix,
    RankOutOfRange,
    InvalidFraction,
    AlphaOutOfRange,
    InvalidSpec,
    LayoutMismatch,
    DivergedTraining,
    InvalidC,
    InvalidConfig,
};

const char * error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string & message)
        : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

    bool is_io() const { return kind_ == ErrorKind::IoError; }

  private:
    ErrorKind kind_;
};

} // namespace deltaforge
