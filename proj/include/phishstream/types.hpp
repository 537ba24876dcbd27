#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace phishstream {

using NodeId = std::uint32_t;
using Timestamp = std::int64_t;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr std::size_t kEdgeFeatureDim = 16;
inline constexpr int kHeadCount = 3;

enum class Label : std::uint8_t { kNonPhishing = 0, kPhishing = 1 };

// Error hierarchy. Every error carries a one-line message naming the
// offending input.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define PHISHSTREAM_DEFINE_ERROR(Name) \
  class Name : public Error {          \
   public:                             \
    using Error::Error;                \
  }

PHISHSTREAM_DEFINE_ERROR(MalformedRecord);
PHISHSTREAM_DEFINE_ERROR(EmptyGroup);
PHISHSTREAM_DEFINE_ERROR(DuplicateAddress);
PHISHSTREAM_DEFINE_ERROR(UnknownLabelString);
PHISHSTREAM_DEFINE_ERROR(EmptyFile);
PHISHSTREAM_DEFINE_ERROR(OutOfOrderInput);
PHISHSTREAM_DEFINE_ERROR(DimensionMismatch);
PHISHSTREAM_DEFINE_ERROR(TapeMismatch);
PHISHSTREAM_DEFINE_ERROR(TooFewEvents);
PHISHSTREAM_DEFINE_ERROR(DegenerateClasses);
PHISHSTREAM_DEFINE_ERROR(NoLabeledNodes);
PHISHSTREAM_DEFINE_ERROR(InvalidConfig);
PHISHSTREAM_DEFINE_ERROR(CheckpointError);

#undef PHISHSTREAM_DEFINE_ERROR

}  // namespace phishstream
