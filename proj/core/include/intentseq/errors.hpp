#pragma once

#include <stdexcept>
#include <string>

namespace intentseq {

/// Base class for every failure the library reports.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numeric kernel.
struct ShapeMismatch : Error { using Error::Error; };
struct EmptyTimeAxis : Error { using Error::Error; };
struct NonFiniteLoss : Error { using Error::Error; };

// Dataset ingestion and splitting.
struct MalformedRow : Error { using Error::Error; };
struct NonBinaryLabel : Error { using Error::Error; };
struct EmptyFile : Error { using Error::Error; };
struct IndexOutOfRange : Error { using Error::Error; };
struct EmptyDataset : Error { using Error::Error; };
struct DegenerateSplit : Error { using Error::Error; };

// Models.
struct InvalidKind : Error { using Error::Error; };
struct SequenceTooShort : Error { using Error::Error; };

// Training and metrics.
struct LengthMismatch : Error { using Error::Error; };
struct EmptyBatch : Error { using Error::Error; };
struct SingleClassBatch : Error { using Error::Error; };
struct NonFiniteGradient : Error { using Error::Error; };
struct DivergedLoss : Error { using Error::Error; };

// Checkpoint files.
struct BadMagic : Error { using Error::Error; };
struct VersionMismatch : Error { using Error::Error; };
struct TruncatedFile : Error { using Error::Error; };

// Streaming inference.
struct WrongDimension : Error { using Error::Error; };

// Synthetic data generation.
struct InvalidScript : Error { using Error::Error; };
struct IoFailure : Error { using Error::Error; };

}  // namespace intentseq
