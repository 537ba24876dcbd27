#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "phishstream/ingest.hpp"

namespace phishstream {

// Indices into EdgeFeatureVector.
enum FeatureDim : std::size_t {
  kBlockNumber = 0,
  kLogValueEth,
  kTimestampDim,
  kInternalCalls,
  kGasLimitDim,
  kGasUsedDim,
  kGasRatio,
  kLogGasPriceGwei,
  kSenderIsContract,
  kRecipientIsContract,
  kLogSenderGap,
  kLogRecipientGap,
  kLogSenderSentCount,
  kLogRecipientReceivedCount,
  kSelfTransaction,
  kLogFeeGwei,
};

/// True for the three 0/1 dimensions that bypass z-scoring.
bool is_boolean_dim(std::size_t dim);

/// Streaming per-dimension moments (Welford) and per-node activity counters.
class RunningStats {
 public:
  struct NodeActivity {
    std::optional<Timestamp> last_tx;
    std::uint64_t sent = 0;
    std::uint64_t received = 0;
  };

  void observe(const std::array<double, kEdgeFeatureDim>& raw);
  void record_transaction(NodeId src, NodeId dst, Timestamp t);

  std::uint64_t count() const { return count_; }
  double mean(std::size_t dim) const { return mean_[dim]; }
  // Population variance; zero before two observations.
  double variance(std::size_t dim) const;
  NodeActivity activity(NodeId id) const;

 private:
  std::uint64_t count_ = 0;
  std::array<double, kEdgeFeatureDim> mean_{};
  std::array<double, kEdgeFeatureDim> m2_{};
  std::vector<NodeActivity> nodes_;
};

struct NormalizeOptions {
  double std_floor = 1e-8;
  // Normalized values are clamped to [-clip, clip]; 0 disables clamping.
  double clip = 10.0;
};

/// Fills `raw`. `stats` must describe the stream strictly before `event`.
EdgeFeatureVector extract_edge_features(const TransactionEvent& event, const RawTransaction& raw,
                                        const RunningStats& stats);

/// Causal z-score against the current stats; fills `normalized` and leaves
/// `raw` untouched. Does not update `stats`.
EdgeFeatureVector normalize(const EdgeFeatureVector& vec, const RunningStats& stats,
                            const NormalizeOptions& options = {});

/// Per-event record of how many events the normalizer had seen when the
/// event was normalized. Equal to the event index for a causal pass.
struct FeatureAudit {
  std::vector<std::uint64_t> stats_count_at_normalize;

  bool causal() const;
};

/// Extracts and normalizes every event in stream order, updating the stats
/// only after each event has been normalized.
FeatureAudit featurize_stream(EventStream& stream, const NormalizeOptions& options = {},
                              RunningStats* final_stats = nullptr);

/// CSV: event_id, raw_1..raw_16, norm_1..norm_16.
void write_feature_dump(std::ostream& out, const EventStream& stream);

}  // namespace phishstream
