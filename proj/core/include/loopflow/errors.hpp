#pragma once

#include <stdexcept>
#include <string>

namespace loopflow {

/// Base class for every library error.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotSkewHermitian : Error { using Error::Error; };
struct Singular : Error { using Error::Error; };
struct NotInU3C0 : Error { using Error::Error; };
struct NotTwisted : Error { using Error::Error; };
struct DetNotOne : Error { using Error::Error; };

// Loop / flow errors. A band leak signals a corrupted state, not a tolerance
// to be widened.
struct BandLeak : Error { using Error::Error; };
struct InvariantDrift : Error { using Error::Error; };

// Frame / gauge errors.
struct CurvatureTooLarge : Error { using Error::Error; };
struct UnitarityDrift : Error { using Error::Error; };
struct TruncationError : Error { using Error::Error; };
struct IwasawaFailure : Error { using Error::Error; };

// Killing recursion errors.
struct ZeroAngleDerivative : Error { using Error::Error; };
struct GridTooCoarse : Error { using Error::Error; };
struct TruncationTooShallow : Error { using Error::Error; };

// I/O and CLI errors.
struct ChartSingularity : Error { using Error::Error; };
struct IrrationalInput : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct UsageError : Error { using Error::Error; };

}  // namespace loopflow
