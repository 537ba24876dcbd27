#include "phishstream/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace phishstream {
namespace {

constexpr double kWeiPerEth = 1e18;
constexpr double kWeiPerGwei = 1e9;

double log_gap(const std::optional<Timestamp>& last, Timestamp now) {
  if (!last) return 0.0;
  return std::log1p(static_cast<double>(std::max<Timestamp>(0, now - *last)));
}

}  // namespace

bool is_boolean_dim(std::size_t dim) {
  return dim == kSenderIsContract || dim == kRecipientIsContract || dim == kSelfTransaction;
}

void RunningStats::observe(const std::array<double, kEdgeFeatureDim>& raw) {
  ++count_;
  const auto n = static_cast<double>(count_);
  for (std::size_t i = 0; i < kEdgeFeatureDim; ++i) {
    const double delta = raw[i] - mean_[i];
    mean_[i] += delta / n;
    m2_[i] += delta * (raw[i] - mean_[i]);
  }
}

double RunningStats::variance(std::size_t dim) const {
  if (count_ < 2) return 0.0;
  return std::max(0.0, m2_[dim] / static_cast<double>(count_));
}

void RunningStats::record_transaction(NodeId src, NodeId dst, Timestamp t) {
  const auto needed = static_cast<std::size_t>(std::max(src, dst)) + 1;
  if (nodes_.size() < needed) nodes_.resize(needed);
  nodes_[src].last_tx = t;
  nodes_[src].sent += 1;
  nodes_[dst].last_tx = t;
  nodes_[dst].received += 1;
}

RunningStats::NodeActivity RunningStats::activity(NodeId id) const {
  if (id >= nodes_.size()) return {};
  return nodes_[id];
}

EdgeFeatureVector extract_edge_features(const TransactionEvent& event, const RawTransaction& raw,
                                        const RunningStats& stats) {
  const auto sender = stats.activity(event.src);
  const auto recipient = stats.activity(event.dst);
  const double gas_price_gwei = static_cast<double>(raw.gas_price) / kWeiPerGwei;

  EdgeFeatureVector f;
  auto& x = f.raw;
  x[kBlockNumber] = static_cast<double>(raw.block_number);
  x[kLogValueEth] = std::log1p(wei_to_double(raw.value_wei) / kWeiPerEth);
  x[kTimestampDim] = static_cast<double>(event.timestamp);
  x[kInternalCalls] = static_cast<double>(event.internal_call_count);
  x[kGasLimitDim] = static_cast<double>(raw.gas_limit);
  x[kGasUsedDim] = static_cast<double>(raw.gas_used);
  x[kGasRatio] = raw.gas_limit == 0
                     ? 0.0
                     : static_cast<double>(raw.gas_used) / static_cast<double>(raw.gas_limit);
  x[kLogGasPriceGwei] = std::log1p(gas_price_gwei);
  x[kSenderIsContract] = raw.sender_is_contract ? 1.0 : 0.0;
  x[kRecipientIsContract] = raw.recipient_is_contract ? 1.0 : 0.0;
  x[kLogSenderGap] = log_gap(sender.last_tx, event.timestamp);
  x[kLogRecipientGap] = log_gap(recipient.last_tx, event.timestamp);
  x[kLogSenderSentCount] = std::log1p(static_cast<double>(sender.sent));
  x[kLogRecipientReceivedCount] = std::log1p(static_cast<double>(recipient.received));
  x[kSelfTransaction] = event.src == event.dst ? 1.0 : 0.0;
  x[kLogFeeGwei] = std::log1p(static_cast<double>(raw.gas_used) * gas_price_gwei);
  return f;
}

EdgeFeatureVector normalize(const EdgeFeatureVector& vec, const RunningStats& stats,
                            const NormalizeOptions& options) {
  EdgeFeatureVector out = vec;
  for (std::size_t i = 0; i < kEdgeFeatureDim; ++i) {
    if (is_boolean_dim(i)) {
      out.normalized[i] = vec.raw[i];
      continue;
    }
    if (stats.count() == 0) {
      out.normalized[i] = 0.0;
      continue;
    }
    const double sd = std::max(std::sqrt(stats.variance(i)), options.std_floor);
    double z = (vec.raw[i] - stats.mean(i)) / sd;
    if (options.clip > 0) z = std::clamp(z, -options.clip, options.clip);
    out.normalized[i] = z;
  }
  return out;
}

bool FeatureAudit::causal() const {
  for (std::size_t i = 0; i < stats_count_at_normalize.size(); ++i) {
    if (stats_count_at_normalize[i] != i) return false;
  }
  return true;
}

FeatureAudit featurize_stream(EventStream& stream, const NormalizeOptions& options,
                              RunningStats* final_stats) {
  RunningStats stats;
  FeatureAudit audit;
  audit.stats_count_at_normalize.reserve(stream.size());
  for (auto& ev : stream) {
    auto features = extract_edge_features(ev, ev.root, stats);
    audit.stats_count_at_normalize.push_back(stats.count());
    ev.edge_features = normalize(features, stats, options);
    stats.observe(ev.edge_features.raw);
    stats.record_transaction(ev.src, ev.dst, ev.timestamp);
  }
  if (final_stats) *final_stats = std::move(stats);
  return audit;
}

void write_feature_dump(std::ostream& out, const EventStream& stream) {
  out << "event_id";
  for (std::size_t i = 1; i <= kEdgeFeatureDim; ++i) out << ",raw_" << i;
  for (std::size_t i = 1; i <= kEdgeFeatureDim; ++i) out << ",norm_" << i;
  out << '\n';
  char buf[32];
  for (const auto& ev : stream) {
    out << ev.event_id;
    for (double v : ev.edge_features.raw) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    for (double v : ev.edge_features.normalized) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace phishstream
