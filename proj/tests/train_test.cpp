#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "fixtures.hpp"
#include "oracle.hpp"
#include "phishstream/train.hpp"

using namespace phishstream;

TEST_CASE("chronological split boundaries") {
  auto p = chronological_split(100);
  CHECK(p.train_end == 70);
  CHECK(p.val_end == 85);
  CHECK(p.total == 100);
  p = chronological_split(10);
  CHECK(p.train_end == 7);
  CHECK(p.val_end == 8);
  CHECK(p.split_of(6) == Split::kTrain);
  CHECK(p.split_of(7) == Split::kVal);
  CHECK(p.split_of(8) == Split::kTest);
  CHECK_THROWS_AS(chronological_split(2), TooFewEvents);
  for (std::size_t n = 3; n < 300; ++n) {
    const auto s = chronological_split(n);
    CHECK(s.train_end <= s.val_end);
    CHECK(s.val_end <= s.total);
    std::size_t counts[3] = {0, 0, 0};
    for (std::size_t i = 0; i < n; ++i) ++counts[static_cast<int>(s.split_of(i))];
    CHECK(counts[0] + counts[1] + counts[2] == n);
  }
}

TEST_CASE("weighted binary cross-entropy") {
  auto r = weighted_bce_loss(0.5, 1, 1.0);
  CHECK(r.loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(r.logit_grad == -0.5);
  CHECK(weighted_bce_loss(0.5, 0, 3.0).logit_grad == 0.5);
  for (double p : {0.01, 0.3, 0.77, 0.999}) {
    const auto one = weighted_bce_loss(p, 1, 1.0);
    const auto two = weighted_bce_loss(p, 1, 2.0);
    CHECK(two.loss == doctest::Approx(2 * one.loss));
    CHECK(two.logit_grad == doctest::Approx(2 * one.logit_grad));
  }
  CHECK(std::isfinite(weighted_bce_loss(0.0, 1, 1.0).loss));
  CHECK(std::isfinite(weighted_bce_loss(1.0, 0, 1.0).loss));
  CHECK(weighted_bce_loss(0.0, 1, 1.0).loss == doctest::Approx(-std::log(1e-7)));
}

TEST_CASE("AUC") {
  const std::vector<double> s{0.35, 0.8, 0.1, 0.4};
  const std::vector<int> y{1, 1, 0, 0};
  CHECK(compute_auc(s, y) == 0.75);
  CHECK(compute_auc(std::vector<double>{0.9, 0.8, 0.1}, std::vector<int>{1, 1, 0}) == 1.0);
  CHECK(compute_auc(std::vector<double>(6, 0.3), std::vector<int>{1, 0, 1, 0, 0, 0}) == 0.5);
  CHECK_THROWS_AS(compute_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}),
                  DegenerateClasses);
}

TEST_CASE("AUC equals the brute-force pairwise statistic and ignores monotone transforms") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng() % 199;
    const int levels = trial % 3 == 0 ? 3 : 1000000;
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng() % levels) / levels;
      y[i] = static_cast<int>(rng() % 2);
    }
    y[0] = 1;
    y[1] = 0;
    const double auc = compute_auc(s, y);
    CHECK(auc == oracle::brute_force_auc(s, y));
    std::vector<double> affine(n), squashed(n);
    for (std::size_t i = 0; i < n; ++i) {
      affine[i] = 2 * s[i] + 1;
      squashed[i] = sigmoid(s[i]);
    }
    CHECK(compute_auc(affine, y) == auc);
    CHECK(compute_auc(squashed, y) == auc);
  }
}

TEST_CASE("TPR and FPR") {
  const std::vector<double> s{0.9, 0.2, 0.6, 0.1};
  const std::vector<int> y{1, 1, 0, 0};
  auto r = compute_tpr_fpr(s, y, 0.5);
  CHECK(r.tpr == 0.5);
  CHECK(r.fpr == 0.5);
  CHECK(r.confusion.tp == 1);
  CHECK(r.confusion.fn == 1);
  CHECK(r.confusion.fp == 1);
  CHECK(r.confusion.tn == 1);
  r = compute_tpr_fpr(s, y, 0.0);
  CHECK(r.tpr == 1.0);
  CHECK(r.fpr == 1.0);
  r = compute_tpr_fpr(s, y, 0.95);
  CHECK(r.tpr == 0.0);
  CHECK(r.fpr == 0.0);
  CHECK(compute_tpr_fpr(s, y, 0.6).fpr == 0.5);  // score == threshold counts as positive
  CHECK_THROWS_AS(compute_tpr_fpr(std::vector<double>{0.1}, std::vector<int>{0}, 0.5),
                  DegenerateClasses);
}

TEST_CASE("rates are non-increasing in the threshold") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(50);
    std::vector<int> y(50);
    for (std::size_t i = 0; i < 50; ++i) {
      s[i] = std::round(u(rng) * 20) / 20;
      y[i] = i % 3 == 0;
    }
    double last_tpr = 2, last_fpr = 2;
    for (double t = -0.05; t <= 1.1; t += 0.025) {
      const auto r = compute_tpr_fpr(s, y, t);
      CHECK(r.tpr <= last_tpr);
      CHECK(r.fpr <= last_fpr);
      CHECK(r.confusion.tp + r.confusion.fp + r.confusion.tn + r.confusion.fn == 50);
      last_tpr = r.tpr;
      last_fpr = r.fpr;
    }
  }
}

TEST_CASE("Youden threshold") {
  const std::vector<double> s{0.9, 0.7, 0.6, 0.2, 0.1};
  const std::vector<int> y{1, 1, 0, 0, 0};
  CHECK(youden_threshold(s, y) == 0.7);
  const auto r = compute_tpr_fpr(s, y, youden_threshold(s, y));
  CHECK(r.tpr == 1.0);
  CHECK(r.fpr == 0.0);
  // Inverted ranking: no threshold has positive J.
  CHECK(youden_threshold(std::vector<double>{0.1, 0.9}, std::vector<int>{1, 0}) ==
        std::numeric_limits<double>::infinity());
}

TEST_CASE("threshold policy parsing") {
  CHECK(ThresholdPolicy::parse("youden").kind == ThresholdPolicy::Kind::kYouden);
  const auto f = ThresholdPolicy::parse("fixed:0.25");
  CHECK(f.kind == ThresholdPolicy::Kind::kFixed);
  CHECK(f.value == 0.25);
  CHECK(ThresholdPolicy::parse(f.to_string()).value == 0.25);
  CHECK_THROWS_AS(ThresholdPolicy::parse("fixed:abc"), InvalidConfig);
  CHECK_THROWS_AS(ThresholdPolicy::parse("median"), InvalidConfig);
}

TEST_CASE("report JSON") {
  const auto r = make_report("val", std::vector<double>{0.9, 0.2, 0.6, 0.1},
                             std::vector<int>{1, 1, 0, 0}, 0.5);
  const auto j = to_json(r);
  CHECK(j["split"] == "val");
  CHECK(j["auc"] == 0.75);
  CHECK(j["tp"].get<int>() + j["fn"].get<int>() == 2);
  auto inf = r;
  inf.threshold = std::numeric_limits<double>::infinity();
  CHECK(to_json(inf)["threshold"] == "inf");
}

TEST_CASE("training") {
  const auto data = fixtures::make_dataset(fixtures::small_config());
  auto config = fixtures::small_train_config();

  SUBCASE("learning rate zero leaves parameters unchanged") {
    config.learning_rate = 0.0;
    const auto r = train_run(data.stream, data.labels, config);
    const auto init = ModelParams::initialize(config.engine.dim, config.seed);
    ModelParams diff = r.params;
    diff.add_scaled(init, -1.0);
    CHECK(diff.squared_norm() == 0.0);
    CHECK(r.epochs[0].val == r.epochs[1].val);
  }
  SUBCASE("identical runs give identical reports") {
    const auto a = train_run(data.stream, data.labels, config);
    const auto b = train_run(data.stream, data.labels, config);
    REQUIRE(a.epochs.size() == 2);
    for (std::size_t i = 0; i < a.epochs.size(); ++i) {
      CHECK(a.epochs[i].val == b.epochs[i].val);
      CHECK(a.epochs[i].test == b.epochs[i].test);
      CHECK(a.epochs[i].loss_mean == b.epochs[i].loss_mean);
    }
    CHECK(a.best_epoch == b.best_epoch);
  }
  SUBCASE("updates only happen on train-split events") {
    const auto r = train_run(data.stream, data.labels, config);
    CHECK(r.audit.clean());
    CHECK(r.audit.total_updates > 0);
    CHECK(r.audit.train_end == chronological_split(data.stream.size()).train_end);
    for (auto id : r.audit.update_event_ids) CHECK(id < r.audit.train_end);
    CHECK(r.params.all_finite());
    CHECK(r.positive_weight > 1.0);
  }
  SUBCASE("the best epoch has the highest validation AUC") {
    config.epochs = 3;
    const auto r = train_run(data.stream, data.labels, config);
    for (const auto& e : r.epochs) CHECK(e.val.auc <= r.best().val.auc);
    const auto a = evaluate(data.stream, data.labels, r.params, config);
    const auto b = evaluate(data.stream, data.labels, r.params, config);
    CHECK(a.val == b.val);
    CHECK(a.test == b.test);
  }
  SUBCASE("with frozen parameters, evaluation reproduces the training reports") {
    config.learning_rate = 0.0;
    const auto r = train_run(data.stream, data.labels, config);
    const auto again = evaluate(data.stream, data.labels, r.params, config);
    CHECK(again.val == r.best().val);
    CHECK(again.test == r.best().test);
  }
  SUBCASE("a fixed threshold is applied as given") {
    config.threshold = ThresholdPolicy::parse("fixed:0.5");
    const auto r = train_run(data.stream, data.labels, config);
    CHECK(r.best().val.threshold == 0.5);
    CHECK(r.best().test.threshold == 0.5);
  }
  SUBCASE("labels without phishing nodes are rejected") {
    NodeLabels none(data.labels.size(), 0);
    CHECK_THROWS_AS(train_run(data.stream, none, config), DegenerateClasses);
    NodeLabels unlabeled(data.labels.size(), -1);
    CHECK_THROWS_AS(train_run(data.stream, unlabeled, config), NoLabeledNodes);
  }
  SUBCASE("invalid configuration") {
    config.epochs = 0;
    CHECK_THROWS_AS(train_run(data.stream, data.labels, config), InvalidConfig);
  }
}

TEST_CASE("ablation runs four named configurations") {
  const auto data = fixtures::make_dataset(fixtures::small_config());
  auto config = fixtures::small_train_config();
  config.epochs = 1;
  const auto entries = run_ablation(data.stream, data.labels, config);
  REQUIRE(entries.size() == 4);
  CHECK(entries[0].name == "full");
  CHECK(entries[1].name == "no_decay");
  CHECK(entries[1].config.engine.disable_decay);
  CHECK(entries[2].name == "no_broadcast");
  CHECK(entries[2].config.engine.disable_broadcast);
  CHECK(entries[3].name == "no_storage");
  CHECK(entries[3].config.engine.disable_storage);
  const auto full = train_run(data.stream, data.labels, config);
  CHECK(entries[0].result.best().test == full.best().test);
}
