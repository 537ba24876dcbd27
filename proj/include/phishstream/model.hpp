#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <type_traits>
#include <vector>

#include "phishstream/ingest.hpp"
#include "phishstream/state.hpp"

namespace phishstream {

enum class AttentionSource : std::uint8_t {
  kDecayedMatrix = 0,  // rows of the decay-weighted storage matrix
  kMeanVector = 1,     // the single aggregated vector s(t)
};

/// Hyperparameters of one stream replay.
struct EngineConfig {
  Eigen::Index dim = 48;
  std::size_t storage_len = 10;
  std::size_t broadcast_k = 10;
  double decay_gamma = 0.9;
  AttentionSource attention_source = AttentionSource::kDecayedMatrix;
  bool disable_decay = false;
  bool disable_broadcast = false;
  bool disable_storage = false;

  void validate() const;
  DecayProfile decay_profile() const;
};

struct HeadParams {
  Mat query;  // d x d/3
  Mat key;    // d x d/3
  Mat value;  // d x d/3
};

/// Every learnable tensor. Vectors act on the right of row-vector inputs,
/// i.e. Q = z W_Q, so matrices are stored input-dim x output-dim.
struct ModelParams {
  Mat edge_projection;  // 16 x d
  std::array<HeadParams, kHeadCount> heads;
  Mat output;           // d x d
  Mat fuse_hidden;      // 2d x d
  Vec fuse_hidden_bias; // d
  Mat fuse_out;         // d x d
  Vec fuse_out_bias;    // d
  Vec classifier;       // d
  double classifier_bias = 0.0;

  /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
  static ModelParams initialize(Eigen::Index dim, std::uint64_t seed);
  static ModelParams zeros(Eigen::Index dim);
  static std::size_t parameter_count(Eigen::Index dim);

  Eigen::Index dim() const { return output.rows(); }
  Eigen::Index head_dim() const { return dim() / kHeadCount; }
  bool all_finite() const;

  /// Visits every tensor as (name, map over its storage), in a fixed order.
  template <typename F>
  void for_each_tensor(F&& f) {
    visit(*this, f);
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    visit(*this, f);
  }

  /// this += scale * other, tensor by tensor.
  void add_scaled(const ModelParams& other, double scale);
  double squared_norm() const;

 private:
  template <typename Self, typename F>
  static void visit(Self& self, F& f) {
    using MapT = std::conditional_t<std::is_const_v<Self>, Eigen::Map<const Mat>, Eigen::Map<Mat>>;
    auto m = [](auto& t) { return MapT(t.data(), t.rows(), t.cols()); };
    f(std::string_view("edge_projection"), m(self.edge_projection));
    static constexpr std::array<std::string_view, 9> kHeadNames{
        "head0.query", "head0.key", "head0.value", "head1.query", "head1.key",
        "head1.value", "head2.query", "head2.key", "head2.value"};
    for (std::size_t h = 0; h < self.heads.size(); ++h) {
      f(kHeadNames[3 * h + 0], m(self.heads[h].query));
      f(kHeadNames[3 * h + 1], m(self.heads[h].key));
      f(kHeadNames[3 * h + 2], m(self.heads[h].value));
    }
    f(std::string_view("output"), m(self.output));
    f(std::string_view("fuse_hidden"), m(self.fuse_hidden));
    f(std::string_view("fuse_hidden_bias"), m(self.fuse_hidden_bias));
    f(std::string_view("fuse_out"), m(self.fuse_out));
    f(std::string_view("fuse_out_bias"), m(self.fuse_out_bias));
    f(std::string_view("classifier"), m(self.classifier));
    f(std::string_view("classifier_bias"), MapT(&self.classifier_bias, 1, 1));
  }
};

Vec softmax(const Vec& scores);

struct HeadTrace {
  Vec query;    // h
  Mat keys;     // n x h
  Mat values;   // n x h
  Vec scores;   // n, already scaled by 1/sqrt(h)
  Vec weights;  // n, softmax(scores)
  Vec output;   // h
};

/// softmax(q W_Q (KV W_K)^T / sqrt(h)) KV W_V for one head. Requires n >= 1.
HeadTrace attention_head(const Vec& q, const Mat& kv, const HeadParams& head);

struct MultiHeadTrace {
  std::array<HeadTrace, kHeadCount> heads;
  Vec concat;   // d
  Vec z_tilde;  // d
  bool empty = true;
};

/// Concat(head_1, head_2, head_3) W_o; zero vector when kv has no rows.
MultiHeadTrace multi_head(const Vec& z_prev, const Mat& kv, const ModelParams& params);

struct FuseTrace {
  Vec input;       // 2d, z_prev || z_tilde
  Vec hidden_pre;  // d
  Vec hidden;      // d, ReLU(hidden_pre)
  Vec output;      // d
};

/// Two-layer MLP over z(t-) || z~(t), ReLU between layers.
FuseTrace fuse(const Vec& z_prev, const Vec& z_tilde, const ModelParams& params);

double classify_logit(const Vec& z, const ModelParams& params);
double sigmoid(double x);
double classify(const Vec& z, const ModelParams& params);

/// Everything the backward pass needs for one endpoint update.
struct EndpointTape {
  NodeId node = 0;
  Vec z_prev;
  Mat kv;
  MultiHeadTrace attention;
  FuseTrace fusion;
  double logit = 0.0;
  double probability = 0.5;
};

struct EventTape {
  std::uint64_t event_id = 0;
  Eigen::Index dim = 0;
  std::vector<EndpointTape> endpoints;  // src, then dst unless a self-transaction
};

/// Runs one endpoint through attention, fusion and classification given
/// its pre-event embedding and its K/V source rows.
EndpointTape forward_endpoint(NodeId node, const Vec& z_prev, Mat kv, const ModelParams& params);

/// Parameter gradients for one event. `logit_grads[i]` is dLoss/dlogit of
/// endpoint i. Stored contents and z(t-) are constants. Throws TapeMismatch
/// when the gradient count or dimensions disagree with the tape.
ModelParams backward_event(const EventTape& tape, std::span<const double> logit_grads,
                           const ModelParams& params);

struct EndpointUpdate {
  NodeId node = 0;
  double probability = 0.5;
};

struct EventOutput {
  std::vector<EndpointUpdate> updates;
  BroadcastContent broadcast;
  std::vector<NodeId> recipients;
  EventTape tape;
};

/// Owns the node state of one replay and applies events in stream order.
class StreamEngine {
 public:
  explicit StreamEngine(EngineConfig config);

  /// Reads both endpoints' storage at t-, computes their new embeddings and
  /// scores, broadcasts c(t) built from the t- embeddings, then commits the
  /// new embeddings and neighbor times.
  EventOutput process(const TransactionEvent& event, const ModelParams& params);
  void reset();

  /// The K/V rows a node would attend over right now.
  Mat attention_source(NodeId node) const;

  const GraphState& state() const { return state_; }
  GraphState& state() { return state_; }
  const EngineConfig& config() const { return config_; }
  const DecayProfile& decay() const { return decay_; }

 private:
  EngineConfig config_;
  DecayProfile decay_;
  GraphState state_;
};

}  // namespace phishstream
