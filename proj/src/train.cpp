#include "phishstream/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace phishstream {

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "unknown";
}

Split SplitPlan::split_of(std::size_t event_index) const {
  if (event_index < train_end) return Split::kTrain;
  if (event_index < val_end) return Split::kVal;
  return Split::kTest;
}

SplitPlan chronological_split(std::size_t n_events, double train_ratio, double val_ratio) {
  if (n_events < 3) {
    throw TooFewEvents("need at least 3 events to split, got " + std::to_string(n_events));
  }
  const auto n = static_cast<double>(n_events);
  SplitPlan plan;
  plan.total = n_events;
  plan.train_end = static_cast<std::size_t>(std::floor(train_ratio * n));
  plan.val_end = static_cast<std::size_t>(std::floor((train_ratio + val_ratio) * n));
  return plan;
}

LossResult weighted_bce_loss(double p, int y, double positive_weight) {
  constexpr double kEps = 1e-7;
  const double pc = std::clamp(p, kEps, 1.0 - kEps);
  LossResult r;
  if (y == 1) {
    r.loss = -positive_weight * std::log(pc);
    r.logit_grad = positive_weight * (p - 1.0);
  } else {
    r.loss = -std::log(1.0 - pc);
    r.logit_grad = p;
  }
  return r;
}

double PairCounts::auc() const {
  return (2.0 * static_cast<double>(correct) + static_cast<double>(ties)) /
         (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

PairCounts count_pairs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DimensionMismatch("scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  PairCounts c;
  std::uint64_t neg_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0, neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? pos : neg) += 1;
      ++j;
    }
    c.correct += pos * neg_below;
    c.ties += pos * neg;
    neg_below += neg;
    c.n_pos += pos;
    c.n_neg += neg;
    i = j;
  }
  return c;
}

double compute_auc(std::span<const double> scores, std::span<const int> labels) {
  const auto c = count_pairs(scores, labels);
  if (c.n_pos == 0 || c.n_neg == 0) {
    throw DegenerateClasses("AUC needs both classes (positives " + std::to_string(c.n_pos) +
                            ", negatives " + std::to_string(c.n_neg) + ")");
  }
  return c.auc();
}

RateResult compute_tpr_fpr(std::span<const double> scores, std::span<const int> labels,
                           double threshold) {
  if (scores.size() != labels.size()) throw DimensionMismatch("scores and labels differ in length");
  RateResult r;
  auto& m = r.confusion;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == 1) {
      (predicted ? m.tp : m.fn) += 1;
    } else {
      (predicted ? m.fp : m.tn) += 1;
    }
  }
  if (m.tp + m.fn == 0 || m.fp + m.tn == 0) {
    throw DegenerateClasses("TPR/FPR need both classes");
  }
  r.tpr = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
  r.fpr = static_cast<double>(m.fp) / static_cast<double>(m.fp + m.tn);
  return r;
}

double youden_threshold(std::span<const double> scores, std::span<const int> labels) {
  std::vector<double> candidates(scores.begin(), scores.end());
  std::sort(candidates.begin(), candidates.end(), std::greater<>());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  double best_threshold = std::numeric_limits<double>::infinity();
  double best_j = 0.0;  // predicting nothing positive scores J = 0
  for (double t : candidates) {
    const auto r = compute_tpr_fpr(scores, labels, t);
    if (r.tpr - r.fpr > best_j) {
      best_j = r.tpr - r.fpr;
      best_threshold = t;
    }
  }
  return best_threshold;
}

ThresholdPolicy ThresholdPolicy::parse(const std::string& text) {
  ThresholdPolicy p;
  if (text == "youden") return p;
  if (text.rfind("fixed:", 0) == 0) {
    p.kind = Kind::kFixed;
    try {
      std::size_t used = 0;
      p.value = std::stod(text.substr(6), &used);
      if (used != text.size() - 6) throw std::invalid_argument(text);
    } catch (const std::exception&) {
      throw InvalidConfig("--threshold-policy: bad fixed threshold '" + text + "'");
    }
    return p;
  }
  throw InvalidConfig("--threshold-policy must be 'youden' or 'fixed:<x>', got '" + text + "'");
}

std::string ThresholdPolicy::to_string() const {
  if (kind == Kind::kYouden) return "youden";
  return "fixed:" + nlohmann::json(value).dump();
}

bool EvalReport::operator==(const EvalReport& o) const {
  return split == o.split && auc == o.auc && tpr == o.tpr && fpr == o.fpr &&
         threshold == o.threshold && confusion.tp == o.confusion.tp &&
         confusion.fp == o.confusion.fp && confusion.tn == o.confusion.tn &&
         confusion.fn == o.confusion.fn && n_pos == o.n_pos && n_neg == o.n_neg;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["split"] = r.split;
  j["auc"] = r.auc;
  j["tpr"] = r.tpr;
  j["fpr"] = r.fpr;
  // +inf (nothing predicted positive) is not representable in JSON.
  j["threshold"] = std::isfinite(r.threshold) ? nlohmann::json(r.threshold) : nlohmann::json("inf");
  j["tp"] = r.confusion.tp;
  j["fp"] = r.confusion.fp;
  j["tn"] = r.confusion.tn;
  j["fn"] = r.confusion.fn;
  j["n_pos"] = r.n_pos;
  j["n_neg"] = r.n_neg;
  return j;
}

EvalReport make_report(std::string split, std::span<const double> scores,
                       std::span<const int> labels, double threshold) {
  EvalReport r;
  r.split = std::move(split);
  const auto pairs = count_pairs(scores, labels);
  if (pairs.n_pos == 0 || pairs.n_neg == 0) {
    throw DegenerateClasses(r.split + " split has " + std::to_string(pairs.n_pos) +
                            " phishing and " + std::to_string(pairs.n_neg) +
                            " non-phishing scored nodes");
  }
  r.auc = pairs.auc();
  const auto rates = compute_tpr_fpr(scores, labels, threshold);
  r.tpr = rates.tpr;
  r.fpr = rates.fpr;
  r.confusion = rates.confusion;
  r.threshold = threshold;
  r.n_pos = pairs.n_pos;
  r.n_neg = pairs.n_neg;
  return r;
}

void TrainConfig::validate() const {
  engine.validate();
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidConfig("--lr must be a finite non-negative number");
  }
  if (epochs < 1) throw InvalidConfig("--epochs must be at least 1");
  if (positive_weight < 0.0) throw InvalidConfig("positive weight must be non-negative");
  if (grad_clip < 0.0) throw InvalidConfig("gradient clip must be non-negative");
}

NodeLabels build_node_labels(const EventStream& stream, const LabelSet& labels) {
  NodeLabels out(stream.node_count(), -1);
  for (NodeId id = 0; id < stream.node_count(); ++id) {
    if (const auto l = labels.find(stream.addresses().address(id))) {
      out[id] = *l == Label::kPhishing ? 1 : 0;
    }
  }
  return out;
}

bool TrainingAudit::clean() const {
  return std::all_of(update_event_ids.begin(), update_event_ids.end(),
                     [this](std::uint64_t id) { return id < train_end; });
}

namespace {

struct ReplayOutput {
  std::array<SplitScores, 3> splits;
  double loss_sum = 0.0;
  std::uint64_t loss_count = 0;
};

int label_of(const NodeLabels& labels, NodeId node) {
  return node < labels.size() ? labels[node] : -1;
}

// One pass over the stream. When `train` is set, parameters are updated on
// train-split events only.
ReplayOutput replay(const EventStream& stream, const NodeLabels& labels, const SplitPlan& plan,
                    ModelParams& params, const TrainConfig& config, bool train,
                    double positive_weight, TrainingAudit* audit) {
  StreamEngine engine(config.engine);
  engine.state().reserve(stream.node_count());
  const auto n_nodes = stream.node_count();
  std::array<std::vector<double>, 3> last;
  for (auto& v : last) v.assign(n_nodes, std::numeric_limits<double>::quiet_NaN());

  ReplayOutput out;
  std::vector<double> grads;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const auto& ev = stream[i];
    const auto split = plan.split_of(i);
    const auto result = engine.process(ev, params);
    auto& slot = last[static_cast<int>(split)];
    for (const auto& u : result.updates) {
      if (label_of(labels, u.node) >= 0) slot[u.node] = u.probability;
    }
    if (!train || split != Split::kTrain) continue;

    grads.assign(result.updates.size(), 0.0);
    bool any = false;
    for (std::size_t e = 0; e < result.updates.size(); ++e) {
      const int y = label_of(labels, result.updates[e].node);
      if (y < 0) continue;
      const auto l = weighted_bce_loss(result.updates[e].probability, y, positive_weight);
      out.loss_sum += l.loss;
      out.loss_count += 1;
      grads[e] = l.logit_grad;
      any = true;
    }
    if (!any) continue;
    auto g = backward_event(result.tape, grads, params);
    double step = config.learning_rate;
    if (config.grad_clip > 0.0) {
      const double norm = std::sqrt(g.squared_norm());
      if (norm > config.grad_clip) step *= config.grad_clip / norm;
    }
    params.add_scaled(g, -step);
    if (audit) {
      audit->update_event_ids.push_back(ev.event_id);
      audit->total_updates += 1;
    }
  }

  for (int s = 0; s < 3; ++s) {
    auto& dst = out.splits[s];
    for (NodeId id = 0; id < n_nodes; ++id) {
      if (std::isnan(last[s][id])) continue;
      dst.scores.push_back(last[s][id]);
      dst.labels.push_back(labels[id]);
      dst.nodes.push_back(id);
    }
  }
  return out;
}

EvalOutcome reports_from(const ReplayOutput& r, const ThresholdPolicy& policy) {
  const auto& val = r.splits[static_cast<int>(Split::kVal)];
  const auto& test = r.splits[static_cast<int>(Split::kTest)];
  const double threshold = policy.kind == ThresholdPolicy::Kind::kFixed
                               ? policy.value
                               : youden_threshold(val.scores, val.labels);
  return {make_report("val", val.scores, val.labels, threshold),
          make_report("test", test.scores, test.labels, threshold)};
}

double auto_positive_weight(const EventStream& stream, const NodeLabels& labels,
                            const SplitPlan& plan) {
  std::vector<bool> seen(stream.node_count(), false);
  std::uint64_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < plan.train_end; ++i) {
    for (NodeId n : {stream[i].src, stream[i].dst}) {
      if (seen[n] || label_of(labels, n) < 0) continue;
      seen[n] = true;
      (labels[n] == 1 ? pos : neg) += 1;
    }
  }
  if (pos + neg == 0) throw NoLabeledNodes("no labeled node appears in the train split");
  if (pos == 0 || neg == 0) {
    throw DegenerateClasses("train split needs both classes (phishing " + std::to_string(pos) +
                            ", non-phishing " + std::to_string(neg) + ")");
  }
  return static_cast<double>(neg) / static_cast<double>(pos);
}

}  // namespace

TrainResult train_run(const EventStream& stream, const NodeLabels& labels,
                      const TrainConfig& config) {
  config.validate();
  const auto plan = chronological_split(stream.size());
  const double w_pos = auto_positive_weight(stream, labels, plan);

  TrainResult result;
  result.positive_weight = config.positive_weight > 0.0 ? config.positive_weight : w_pos;
  result.audit.train_end = plan.train_end;

  auto params = ModelParams::initialize(config.engine.dim, config.seed);
  double best_auc = -1.0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto replayed = replay(stream, labels, plan, params, config, /*train=*/true,
                                 result.positive_weight, &result.audit);
    if (!params.all_finite()) {
      throw Error("parameters diverged to non-finite values in epoch " + std::to_string(epoch));
    }
    auto reports = reports_from(replayed, config.threshold);
    EpochResult er;
    er.epoch = epoch;
    er.loss_mean = replayed.loss_count ? replayed.loss_sum / static_cast<double>(replayed.loss_count)
                                       : 0.0;
    er.val = std::move(reports.val);
    er.test = std::move(reports.test);
    if (er.val.auc > best_auc) {
      best_auc = er.val.auc;
      result.best_epoch = epoch;
      result.params = params;
    }
    result.epochs.push_back(std::move(er));
  }
  return result;
}

EvalOutcome evaluate(const EventStream& stream, const NodeLabels& labels,
                     const ModelParams& params, const TrainConfig& config) {
  config.engine.validate();
  const auto plan = chronological_split(stream.size());
  auto fixed = params;
  const auto replayed = replay(stream, labels, plan, fixed, config, /*train=*/false, 1.0, nullptr);
  return reports_from(replayed, config.threshold);
}

std::vector<AblationEntry> run_ablation(const EventStream& stream, const NodeLabels& labels,
                                        const TrainConfig& base) {
  std::vector<AblationEntry> entries;
  const auto variant = [&](std::string name, auto tweak) {
    AblationEntry e;
    e.name = std::move(name);
    e.config = base;
    e.config.engine.disable_decay = false;
    e.config.engine.disable_broadcast = false;
    e.config.engine.disable_storage = false;
    tweak(e.config.engine);
    entries.push_back(std::move(e));
  };
  variant("full", [](EngineConfig&) {});
  variant("no_decay", [](EngineConfig& c) { c.disable_decay = true; });
  variant("no_broadcast", [](EngineConfig& c) { c.disable_broadcast = true; });
  variant("no_storage", [](EngineConfig& c) { c.disable_storage = true; });
  for (auto& e : entries) e.result = train_run(stream, labels, e.config);
  return entries;
}

}  // namespace phishstream
