#include "phishstream/model.hpp"

#include <cmath>
#include <random>
#include <string>

namespace phishstream {

void EngineConfig::validate() const {
  if (dim <= 0 || dim % kHeadCount != 0) {
    throw InvalidConfig("--dim must be a positive multiple of 3, got " + std::to_string(dim));
  }
  if (storage_len == 0) throw InvalidConfig("--storage-len must be at least 1");
  if (!(decay_gamma > 0.0 && decay_gamma <= 1.0)) {
    throw InvalidConfig("--decay-gamma must lie in (0, 1]");
  }
}

DecayProfile EngineConfig::decay_profile() const {
  return disable_decay ? DecayProfile::uniform(storage_len)
                       : DecayProfile::geometric(storage_len, decay_gamma);
}

ModelParams ModelParams::zeros(Eigen::Index dim) {
  if (dim <= 0 || dim % kHeadCount != 0) {
    throw DimensionMismatch("embedding dimension must be a positive multiple of 3");
  }
  const auto h = dim / kHeadCount;
  ModelParams p;
  p.edge_projection = Mat::Zero(static_cast<Eigen::Index>(kEdgeFeatureDim), dim);
  for (auto& head : p.heads) {
    head.query = Mat::Zero(dim, h);
    head.key = Mat::Zero(dim, h);
    head.value = Mat::Zero(dim, h);
  }
  p.output = Mat::Zero(dim, dim);
  p.fuse_hidden = Mat::Zero(2 * dim, dim);
  p.fuse_hidden_bias = Vec::Zero(dim);
  p.fuse_out = Mat::Zero(dim, dim);
  p.fuse_out_bias = Vec::Zero(dim);
  p.classifier = Vec::Zero(dim);
  p.classifier_bias = 0.0;
  return p;
}

ModelParams ModelParams::initialize(Eigen::Index dim, std::uint64_t seed) {
  auto p = zeros(dim);
  std::mt19937_64 rng(seed);
  const auto fill = [&rng](auto& t) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(t.rows()));
    std::uniform_real_distribution<double> u(-bound, bound);
    // Row-major fill order keeps the draw sequence independent of storage order.
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = u(rng);
  };
  fill(p.edge_projection);
  for (auto& head : p.heads) {
    fill(head.query);
    fill(head.key);
    fill(head.value);
  }
  fill(p.output);
  fill(p.fuse_hidden);
  fill(p.fuse_out);
  // The classifier acts on a d-vector, so fan_in = d.
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Eigen::Index i = 0; i < dim; ++i) p.classifier(i) = u(rng);
  return p;
}

std::size_t ModelParams::parameter_count(Eigen::Index dim) {
  const auto d = static_cast<std::size_t>(dim);
  const auto h = d / kHeadCount;
  return kEdgeFeatureDim * d          // edge projection
         + kHeadCount * 3 * d * h     // W_Q, W_K, W_V per head
         + d * d                      // W_o
         + 2 * d * d + d              // fusion layer 1
         + d * d + d                  // fusion layer 2
         + d + 1;                     // classifier
}

bool ModelParams::all_finite() const {
  bool ok = true;
  for_each_tensor([&ok](std::string_view, const auto& t) { ok = ok && t.allFinite(); });
  return ok;
}

void ModelParams::add_scaled(const ModelParams& other, double scale) {
  std::vector<Eigen::Map<const Mat>> rhs;
  other.for_each_tensor([&rhs](std::string_view, const auto& t) { rhs.push_back(t); });
  std::size_t i = 0;
  for_each_tensor([&](std::string_view, auto t) { t += scale * rhs[i++]; });
}

double ModelParams::squared_norm() const {
  double sum = 0.0;
  for_each_tensor([&sum](std::string_view, const auto& t) { sum += t.squaredNorm(); });
  return sum;
}

Vec softmax(const Vec& scores) {
  if (scores.size() == 0) return scores;
  const double max = scores.maxCoeff();
  Vec e = (scores.array() - max).exp().matrix();
  return e / e.sum();
}

HeadTrace attention_head(const Vec& q, const Mat& kv, const HeadParams& head) {
  if (kv.rows() < 1) throw DimensionMismatch("attention needs at least one key/value row");
  if (q.size() != head.query.rows() || kv.cols() != head.key.rows() ||
      kv.cols() != head.value.rows()) {
    throw DimensionMismatch("attention inputs do not match head projection shapes");
  }
  HeadTrace t;
  t.query = head.query.transpose() * q;
  t.keys = kv * head.key;
  t.values = kv * head.value;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head.query.cols()));
  t.scores = (t.keys * t.query) * scale;
  t.weights = softmax(t.scores);
  t.output = t.values.transpose() * t.weights;
  return t;
}

MultiHeadTrace multi_head(const Vec& z_prev, const Mat& kv, const ModelParams& params) {
  const auto d = params.dim();
  if (z_prev.size() != d || (kv.rows() > 0 && kv.cols() != d)) {
    throw DimensionMismatch("multi-head inputs must have dimension " + std::to_string(d));
  }
  MultiHeadTrace t;
  t.concat = Vec::Zero(d);
  t.z_tilde = Vec::Zero(d);
  if (kv.rows() == 0) return t;
  t.empty = false;
  const auto h = params.head_dim();
  for (int i = 0; i < kHeadCount; ++i) {
    t.heads[i] = attention_head(z_prev, kv, params.heads[i]);
    t.concat.segment(i * h, h) = t.heads[i].output;
  }
  t.z_tilde = params.output.transpose() * t.concat;
  return t;
}

FuseTrace fuse(const Vec& z_prev, const Vec& z_tilde, const ModelParams& params) {
  const auto d = params.dim();
  if (z_prev.size() != d || z_tilde.size() != d) {
    throw DimensionMismatch("fusion inputs must have dimension " + std::to_string(d));
  }
  FuseTrace t;
  t.input.resize(2 * d);
  t.input << z_prev, z_tilde;
  t.hidden_pre = params.fuse_hidden.transpose() * t.input + params.fuse_hidden_bias;
  t.hidden = t.hidden_pre.cwiseMax(0.0);
  t.output = params.fuse_out.transpose() * t.hidden + params.fuse_out_bias;
  return t;
}

double classify_logit(const Vec& z, const ModelParams& params) {
  return params.classifier.dot(z) + params.classifier_bias;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double classify(const Vec& z, const ModelParams& params) {
  return sigmoid(classify_logit(z, params));
}

EndpointTape forward_endpoint(NodeId node, const Vec& z_prev, Mat kv, const ModelParams& params) {
  EndpointTape t;
  t.node = node;
  t.z_prev = z_prev;
  t.kv = std::move(kv);
  t.attention = multi_head(t.z_prev, t.kv, params);
  t.fusion = fuse(t.z_prev, t.attention.z_tilde, params);
  t.logit = classify_logit(t.fusion.output, params);
  t.probability = sigmoid(t.logit);
  return t;
}

ModelParams backward_event(const EventTape& tape, std::span<const double> logit_grads,
                           const ModelParams& params) {
  if (logit_grads.size() != tape.endpoints.size()) {
    throw TapeMismatch("expected " + std::to_string(tape.endpoints.size()) +
                       " loss gradients, got " + std::to_string(logit_grads.size()));
  }
  const auto d = params.dim();
  if (tape.dim != d) throw TapeMismatch("tape dimension differs from parameters");
  const auto h = params.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(h));
  auto grads = ModelParams::zeros(d);

  for (std::size_t e = 0; e < tape.endpoints.size(); ++e) {
    const double g = logit_grads[e];
    if (g == 0.0) continue;
    const auto& ep = tape.endpoints[e];
    const auto& fu = ep.fusion;
    if (fu.output.size() != d || ep.z_prev.size() != d) {
      throw TapeMismatch("endpoint trace dimension differs from parameters");
    }

    // classifier
    grads.classifier += g * fu.output;
    grads.classifier_bias += g;
    const Vec dz = g * params.classifier;

    // fusion MLP
    grads.fuse_out += fu.hidden * dz.transpose();
    grads.fuse_out_bias += dz;
    const Vec dhidden = params.fuse_out * dz;
    const Vec dpre = (fu.hidden_pre.array() > 0.0).select(dhidden, 0.0);
    grads.fuse_hidden += fu.input * dpre.transpose();
    grads.fuse_hidden_bias += dpre;
    if (ep.attention.empty) continue;
    const Vec dz_tilde = (params.fuse_hidden * dpre).tail(d);

    // W_o
    grads.output += ep.attention.concat * dz_tilde.transpose();
    const Vec dconcat = params.output * dz_tilde;

    // heads; z_prev and kv are constants
    for (int i = 0; i < kHeadCount; ++i) {
      const auto& ht = ep.attention.heads[i];
      const Vec dout = dconcat.segment(i * h, h);
      const Mat dvalues = ht.weights * dout.transpose();          // n x h
      const Vec dweights = ht.values * dout;                       // n
      const Vec dscores =
          ht.weights.cwiseProduct((dweights.array() - ht.weights.dot(dweights)).matrix());
      const Vec dquery = scale * (ht.keys.transpose() * dscores);  // h
      const Mat dkeys = scale * (dscores * ht.query.transpose());  // n x h
      grads.heads[i].query += ep.z_prev * dquery.transpose();
      grads.heads[i].key += ep.kv.transpose() * dkeys;
      grads.heads[i].value += ep.kv.transpose() * dvalues;
    }
  }
  return grads;
}

StreamEngine::StreamEngine(EngineConfig config)
    : config_(config), decay_((config.validate(), config.decay_profile())),
      state_(config.dim, config.storage_len) {}

void StreamEngine::reset() { state_.reset(); }

Mat StreamEngine::attention_source(NodeId node) const {
  const auto d = config_.dim;
  if (config_.disable_storage) return Mat::Zero(1, d);
  if (!state_.contains(node)) return Mat(0, d);
  const auto& queue = state_.node(node).storage;
  if (queue.empty()) return Mat(0, d);
  auto agg = aggregate_storage(queue, decay_, d);
  if (config_.attention_source == AttentionSource::kMeanVector) return agg.mean.transpose();
  return std::move(agg.decayed);
}

EventOutput StreamEngine::process(const TransactionEvent& event, const ModelParams& params) {
  const auto d = config_.dim;
  if (params.dim() != d) throw DimensionMismatch("parameters and engine disagree on dimension");
  state_.node(std::max(event.src, event.dst));

  EventOutput out;
  out.tape.event_id = event.event_id;
  out.tape.dim = d;
  const Vec z_src = state_.node(event.src).embedding;
  const Vec z_dst = state_.node(event.dst).embedding;

  out.tape.endpoints.push_back(
      forward_endpoint(event.src, z_src, attention_source(event.src), params));
  if (event.dst != event.src) {
    out.tape.endpoints.push_back(
        forward_endpoint(event.dst, z_dst, attention_source(event.dst), params));
  }

  const Eigen::Map<const Eigen::Matrix<double, kEdgeFeatureDim, 1>> features(
      event.edge_features.normalized.data());
  const Vec projected = params.edge_projection.transpose() * features;
  out.broadcast = make_broadcast(z_src, z_dst, projected, event.timestamp);
  out.recipients = config_.disable_broadcast
                       ? std::vector<NodeId>{event.src}
                       : select_recipients(event.src, event.dst, state_, config_.broadcast_k);
  if (config_.disable_broadcast && event.dst != event.src) out.recipients.push_back(event.dst);
  deliver(out.broadcast, out.recipients, state_);

  for (const auto& ep : out.tape.endpoints) {
    auto& node = state_.node(ep.node);
    node.embedding = ep.fusion.output;
    node.last_update = event.timestamp;
    out.updates.push_back({ep.node, ep.probability});
  }
  record_interaction(event.src, event.dst, event.timestamp, state_);
  return out;
}

}  // namespace phishstream
