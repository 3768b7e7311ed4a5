#ifndef SURFCAST_ERRORS_H
#define SURFCAST_ERRORS_H

#include <stdexcept>
#include <string>

namespace surfcast {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// geometry
struct DegenerateInput : Error { using Error::Error; };
struct EmptyMesh : Error { using Error::Error; };
struct StationNotOnMesh : Error { using Error::Error; };

// fem
struct SingularSystem : Error { using Error::Error; };
struct DegenerateGcv : Error { using Error::Error; };
struct AllPointsDegenerate : Error { using Error::Error; };
struct PointOutsideDomain : Error { using Error::Error; };
struct MeshMismatch : Error { using Error::Error; };

// fpca
struct NotPositiveDefinite : Error { using Error::Error; };
struct TooManyComponents : Error { using Error::Error; };

// forecast
struct RankDeficientRegressors : Error { using Error::Error; };
struct InsufficientHistory : Error { using Error::Error; };
struct GridInfeasible : Error { using Error::Error; };
struct TruncationTooLarge : Error { using Error::Error; };

// io / cli
struct SchemaError : Error { using Error::Error; };
struct DuplicateRecord : Error { using Error::Error; };
struct NoCompleteStations : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

}  // namespace surfcast

#endif  // SURFCAST_ERRORS_H
