#include "phishstream/state.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

namespace phishstream {

StorageQueue::StorageQueue(std::size_t capacity) : slots_(capacity) {}

void StorageQueue::push(BroadcastContent content) {
  if (slots_.empty()) return;
  if (size_ < slots_.size()) {
    slots_[(head_ + size_) % slots_.size()] = std::move(content);
    ++size_;
  } else {
    slots_[head_] = std::move(content);
    head_ = (head_ + 1) % slots_.size();
  }
}

void StorageQueue::clear() {
  head_ = 0;
  size_ = 0;
}

const BroadcastContent& StorageQueue::operator[](std::size_t i) const {
  return slots_[(head_ + i) % slots_.size()];
}

DecayProfile::DecayProfile(std::vector<double> weights) : weights_(std::move(weights)) {
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    const double a = weights_[i];
    if (!(a > 0.0 && a <= 1.0)) throw InvalidConfig("decay weights must lie in (0, 1]");
    if (i > 0 && a < weights_[i - 1]) {
      throw InvalidConfig("decay weights must be non-decreasing towards the newest slot");
    }
  }
}

DecayProfile DecayProfile::geometric(std::size_t capacity, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw InvalidConfig("decay gamma must lie in (0, 1]");
  std::vector<double> w(capacity);
  for (std::size_t i = 0; i < capacity; ++i) {
    w[i] = std::pow(gamma, static_cast<double>(capacity - 1 - i));
  }
  return DecayProfile(std::move(w));
}

DecayProfile DecayProfile::uniform(std::size_t capacity) {
  return DecayProfile(std::vector<double>(capacity, 1.0));
}

double DecayProfile::weight_for_row(std::size_t row, std::size_t n) const {
  return weights_[weights_.size() - n + row];
}

double DecayProfile::mean_weight() const {
  if (weights_.empty()) return 0.0;
  double sum = 0.0;
  for (double w : weights_) sum += w;
  return sum / static_cast<double>(weights_.size());
}

StorageAggregate aggregate_storage(const StorageQueue& queue, const DecayProfile& decay,
                                   Eigen::Index dim) {
  const auto n = queue.size();
  if (n > decay.capacity()) throw InvalidConfig("storage queue longer than decay profile");
  StorageAggregate agg{Vec::Zero(dim), Mat(static_cast<Eigen::Index>(n), dim)};
  for (std::size_t j = 0; j < n; ++j) {
    const auto& c = queue[j].vector;
    if (c.size() != dim) throw DimensionMismatch("stored content has wrong dimension");
    agg.decayed.row(static_cast<Eigen::Index>(j)) = decay.weight_for_row(j, n) * c.transpose();
  }
  if (n > 0) agg.mean = agg.decayed.colwise().sum().transpose() / static_cast<double>(n);
  return agg;
}

GraphState::GraphState(Eigen::Index dim, std::size_t storage_capacity)
    : dim_(dim), capacity_(storage_capacity) {}

NodeState& GraphState::node(NodeId id) {
  while (nodes_.size() <= id) {
    NodeState s;
    s.embedding = Vec::Zero(dim_);
    s.storage = StorageQueue(capacity_);
    nodes_.push_back(std::move(s));
  }
  return nodes_[id];
}

void GraphState::reset() { nodes_.clear(); }

BroadcastContent make_broadcast(const Vec& z_u, const Vec& z_v, const Vec& edge_proj,
                                Timestamp t) {
  if (z_u.size() != z_v.size() || z_u.size() != edge_proj.size()) {
    throw DimensionMismatch("broadcast inputs differ in length: " + std::to_string(z_u.size()) +
                            ", " + std::to_string(edge_proj.size()) + ", " +
                            std::to_string(z_v.size()));
  }
  return BroadcastContent{(z_u + z_v) + edge_proj, t};
}

namespace {

void append_recent(const NodeState& s, std::size_t k, std::vector<NodeId>& out) {
  std::vector<std::pair<Timestamp, NodeId>> ranked;
  ranked.reserve(s.neighbors.size());
  for (const auto& [id, t] : s.neighbors) ranked.emplace_back(t, id);
  const auto take = std::min(k, ranked.size());
  const auto more_recent = [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  };
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(take),
                    ranked.end(), more_recent);
  for (std::size_t i = 0; i < take; ++i) out.push_back(ranked[i].second);
}

}  // namespace

std::vector<NodeId> select_recipients(NodeId u, NodeId v, const GraphState& state,
                                      std::size_t k) {
  std::vector<NodeId> neighbors;
  if (state.contains(u)) append_recent(state.node(u), k, neighbors);
  if (v != u && state.contains(v)) append_recent(state.node(v), k, neighbors);
  std::sort(neighbors.begin(), neighbors.end());
  neighbors.erase(std::unique(neighbors.begin(), neighbors.end()), neighbors.end());

  std::vector<NodeId> out{u};
  if (v != u) out.push_back(v);
  for (NodeId n : neighbors) {
    if (n != u && n != v) out.push_back(n);
  }
  return out;
}

void deliver(const BroadcastContent& content, const std::vector<NodeId>& recipients,
             GraphState& state) {
  for (NodeId r : recipients) state.node(r).storage.push(content);
}

void record_interaction(NodeId u, NodeId v, Timestamp t, GraphState& state) {
  if (u == v) return;
  state.node(u).neighbors[v] = t;
  state.node(v).neighbors[u] = t;
}

void write_state_snapshot(std::ostream& out, const GraphState& state) {
  nlohmann::json nodes = nlohmann::json::array();
  for (NodeId id = 0; id < state.size(); ++id) {
    const auto& s = state.node(id);
    nlohmann::json node;
    node["id"] = id;
    node["embedding"] = std::vector<double>(s.embedding.data(),
                                            s.embedding.data() + s.embedding.size());
    node["last_update"] = s.last_update ? nlohmann::json(*s.last_update) : nlohmann::json();
    node["queue_size"] = s.storage.size();
    node["neighbor_count"] = s.neighbors.size();
    nodes.push_back(std::move(node));
  }
  nlohmann::json doc;
  doc["format"] = "phishstream-state";
  doc["version"] = 1;
  doc["dim"] = state.dim();
  doc["storage_capacity"] = state.storage_capacity();
  doc["nodes"] = std::move(nodes);
  out << doc.dump() << '\n';
}

}  // namespace phishstream
