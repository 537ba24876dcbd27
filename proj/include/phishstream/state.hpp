#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <unordered_map>
#include <vector>

#include "phishstream/types.hpp"

namespace phishstream {

/// One broadcast message c(t): both endpoint embeddings plus the projected
/// edge features, stamped with the event time.
struct BroadcastContent {
  Vec vector;
  Timestamp created_at = 0;
};

/// Fixed-capacity FIFO of broadcast contents, oldest first. Pushing at
/// capacity evicts exactly the oldest item.
class StorageQueue {
 public:
  explicit StorageQueue(std::size_t capacity = 0);

  void push(BroadcastContent content);
  void clear();

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return slots_.size(); }
  bool empty() const { return size_ == 0; }
  bool full() const { return size_ == slots_.size(); }
  // i = 0 is the oldest item.
  const BroadcastContent& operator[](std::size_t i) const;

 private:
  std::vector<BroadcastContent> slots_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
};

/// Per-slot weights alpha_1..alpha_m, non-decreasing towards the newest slot.
class DecayProfile {
 public:
  DecayProfile() = default;
  // Throws InvalidConfig unless 0 < a_1 <= ... <= a_m <= 1.
  explicit DecayProfile(std::vector<double> weights);

  // alpha_i = gamma^(m - i)
  static DecayProfile geometric(std::size_t capacity, double gamma);
  static DecayProfile uniform(std::size_t capacity);

  std::size_t capacity() const { return weights_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  // Right-aligned: row j (oldest first) of an n-item queue gets alpha_{m-n+j+1}.
  double weight_for_row(std::size_t row, std::size_t n) const;
  double mean_weight() const;

 private:
  std::vector<double> weights_;
};

struct StorageAggregate {
  Vec mean;      // s(t)
  Mat decayed;   // n x d, row j = alpha * c_j
};

/// Decay-weighted mean over the n stored contents (divides by n, not m).
/// An empty queue yields a zero vector of length `dim` and a 0 x dim matrix.
StorageAggregate aggregate_storage(const StorageQueue& queue, const DecayProfile& decay,
                                   Eigen::Index dim);

struct NodeState {
  Vec embedding;
  std::optional<Timestamp> last_update;
  StorageQueue storage;
  // neighbor id -> most recent interaction time
  std::unordered_map<NodeId, Timestamp> neighbors;
};

/// All node state of one stream replay. Nodes are created on first access
/// with a zero embedding and an empty queue.
class GraphState {
 public:
  GraphState(Eigen::Index dim, std::size_t storage_capacity);

  NodeState& node(NodeId id);
  const NodeState& node(NodeId id) const { return nodes_.at(id); }
  bool contains(NodeId id) const { return id < nodes_.size(); }
  std::size_t size() const { return nodes_.size(); }
  Eigen::Index dim() const { return dim_; }
  std::size_t storage_capacity() const { return capacity_; }
  void reserve(std::size_t n) { nodes_.reserve(n); }
  void reset();

 private:
  Eigen::Index dim_;
  std::size_t capacity_;
  std::vector<NodeState> nodes_;
};

/// c(t) = z_u + edge_proj + z_v. Throws DimensionMismatch on unequal lengths.
BroadcastContent make_broadcast(const Vec& z_u, const Vec& z_v, const Vec& edge_proj,
                                Timestamp t);

/// u, v, then up to k most recently contacted neighbors of each (ties to the
/// smaller id), deduplicated; neighbors listed by ascending id.
std::vector<NodeId> select_recipients(NodeId u, NodeId v, const GraphState& state,
                                      std::size_t k);

/// Pushes an independent copy of `content` into every recipient's queue.
void deliver(const BroadcastContent& content, const std::vector<NodeId>& recipients,
             GraphState& state);

/// Marks u and v as first-order neighbors as of time t.
void record_interaction(NodeId u, NodeId v, Timestamp t, GraphState& state);

/// Versioned JSON: embeddings, last update, queue size and neighbor count.
void write_state_snapshot(std::ostream& out, const GraphState& state);

}  // namespace phishstream
