#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "phishstream/ingest.hpp"
#include "phishstream/model.hpp"

namespace phishstream {

enum class Split : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2 };
std::string_view split_name(Split s);

/// Contiguous chronological split over event indices.
struct SplitPlan {
  std::size_t train_end = 0;  // [0, train_end)
  std::size_t val_end = 0;    // [train_end, val_end)
  std::size_t total = 0;      // [val_end, total)

  Split split_of(std::size_t event_index) const;
};

/// Boundaries at floor(0.70 n) and floor(0.85 n). Throws TooFewEvents for n < 3.
SplitPlan chronological_split(std::size_t n_events, double train_ratio = 0.70,
                              double val_ratio = 0.15);

struct LossResult {
  double loss = 0.0;
  double logit_grad = 0.0;
};

/// Positive-weighted binary cross-entropy, p clamped to [1e-7, 1 - 1e-7].
LossResult weighted_bce_loss(double p, int y, double positive_weight);

/// Mann-Whitney pair counts; AUC = (correct + ties / 2) / (n_pos * n_neg).
struct PairCounts {
  std::uint64_t correct = 0;
  std::uint64_t ties = 0;
  std::uint64_t n_pos = 0;
  std::uint64_t n_neg = 0;

  double auc() const;
};

PairCounts count_pairs(std::span<const double> scores, std::span<const int> labels);
/// Throws DegenerateClasses unless both classes are present.
double compute_auc(std::span<const double> scores, std::span<const int> labels);

struct Confusion {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;
};

struct RateResult {
  double tpr = 0.0;
  double fpr = 0.0;
  Confusion confusion;
};

/// Predicts positive iff score >= threshold.
RateResult compute_tpr_fpr(std::span<const double> scores, std::span<const int> labels,
                           double threshold);

/// Threshold maximizing TPR - FPR over the observed scores; the largest such
/// threshold wins ties.
double youden_threshold(std::span<const double> scores, std::span<const int> labels);

struct ThresholdPolicy {
  enum class Kind : std::uint8_t { kYouden, kFixed } kind = Kind::kYouden;
  double value = 0.5;

  static ThresholdPolicy parse(const std::string& text);
  std::string to_string() const;
};

struct EvalReport {
  std::string split;
  double auc = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
  double threshold = 0.5;
  Confusion confusion;
  std::uint64_t n_pos = 0;
  std::uint64_t n_neg = 0;

  bool operator==(const EvalReport& o) const;
};

nlohmann::json to_json(const EvalReport& r);

/// Builds a report from per-node scores; `threshold` is applied as-is.
EvalReport make_report(std::string split, std::span<const double> scores,
                       std::span<const int> labels, double threshold);

struct TrainConfig {
  EngineConfig engine;
  double learning_rate = 0.01;
  int epochs = 5;
  std::uint64_t seed = 42;
  // 0 selects n_neg / n_pos over labeled train-split endpoints.
  double positive_weight = 0.0;
  // Rescales each event's gradient to at most this global norm; 0 disables.
  double grad_clip = 1.0;
  ThresholdPolicy threshold;

  void validate() const;
};

/// Per-node label: -1 unlabeled, 0 non-phishing, 1 phishing.
using NodeLabels = std::vector<int>;
NodeLabels build_node_labels(const EventStream& stream, const LabelSet& labels);

/// Scores collected during one replay: for each split, the classifier
/// output at each labeled node's last update within that split.
struct SplitScores {
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<NodeId> nodes;
};

/// Records every parameter update and which event caused it.
struct TrainingAudit {
  std::size_t train_end = 0;
  std::vector<std::uint64_t> update_event_ids;
  std::uint64_t total_updates = 0;

  // True when no update was triggered by a val or test event.
  bool clean() const;
};

struct EpochResult {
  int epoch = 0;
  double loss_mean = 0.0;
  EvalReport val;
  EvalReport test;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochResult> epochs;
  int best_epoch = 0;
  double positive_weight = 0.0;
  TrainingAudit audit;

  const EpochResult& best() const { return epochs.at(static_cast<std::size_t>(best_epoch - 1)); }
};

/// Streams the featurized events once per epoch with a fresh state, taking
/// one gradient step per labeled train-split endpoint update. Returns the
/// parameters of the best-val-AUC epoch.
TrainResult train_run(const EventStream& stream, const NodeLabels& labels,
                      const TrainConfig& config);

struct EvalOutcome {
  EvalReport val;
  EvalReport test;
};

/// Forward-only replay with fixed parameters; the val split fixes the
/// threshold (under the Youden policy) that is then applied to test.
EvalOutcome evaluate(const EventStream& stream, const NodeLabels& labels,
                     const ModelParams& params, const TrainConfig& config);

struct AblationEntry {
  std::string name;
  TrainConfig config;
  TrainResult result;
};

/// full, no_decay, no_broadcast, no_storage; identical seeds and data.
std::vector<AblationEntry> run_ablation(const EventStream& stream, const NodeLabels& labels,
                                        const TrainConfig& base);

}  // namespace phishstream
