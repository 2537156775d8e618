#pragma once

#include <stdexcept>
#include <string>

namespace cephalo {

// Exit-code groups shared with the CLI: 2 config, 3 I/O, 4 missing upstream
// artifact, 5 algorithm failure.
enum class ErrorCode : int {
  Config = 2,
  Io = 3,
  MissingArtifact = 4,
  Algorithm = 5,
};

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorCode::Config, w) {}
};

struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorCode::Io, w) {}
};

struct MissingArtifactError : Error {
  explicit MissingArtifactError(const std::string& w) : Error(ErrorCode::MissingArtifact, w) {}
};

struct AlgorithmError : Error {
  explicit AlgorithmError(const std::string& w) : Error(ErrorCode::Algorithm, w) {}
};

// dispersion
struct OutOfRangeError : AlgorithmError { using AlgorithmError::AlgorithmError; };
struct DegenerateLensError : AlgorithmError { using AlgorithmError::AlgorithmError; };
struct AtFocalPlaneError : AlgorithmError { using AlgorithmError::AlgorithmError; };

// tracer
struct OutOfSphereError : AlgorithmError { using AlgorithmError::AlgorithmError; };

// retina
struct WavelengthNotInStackError : AlgorithmError { using AlgorithmError::AlgorithmError; };
struct InsufficientDistancesError : AlgorithmError { using AlgorithmError::AlgorithmError; };

// events
struct OutOfSweepError : AlgorithmError { using AlgorithmError::AlgorithmError; };
struct MappingGapError : AlgorithmError { using AlgorithmError::AlgorithmError; };

// analysis
struct NoPeakError : AlgorithmError { using AlgorithmError::AlgorithmError; };
struct OutOfCurveRangeError : AlgorithmError { using AlgorithmError::AlgorithmError; };
struct ZeroSlopeError : AlgorithmError { using AlgorithmError::AlgorithmError; };
struct DivisionByZeroWidthError : AlgorithmError { using AlgorithmError::AlgorithmError; };
struct MissingReferenceError : AlgorithmError { using AlgorithmError::AlgorithmError; };
struct NonPositiveQEError : AlgorithmError { using AlgorithmError::AlgorithmError; };
struct ParseError : AlgorithmError { using AlgorithmError::AlgorithmError; };
struct MissingFocalFieldError : AlgorithmError { using AlgorithmError::AlgorithmError; };

// segmentation
struct WindowTooLargeError : AlgorithmError { using AlgorithmError::AlgorithmError; };
struct DegenerateHistogramError : AlgorithmError { using AlgorithmError::AlgorithmError; };
struct NoCalibrationError : AlgorithmError { using AlgorithmError::AlgorithmError; };

}  // namespace cephalo
