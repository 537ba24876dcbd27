#pragma once

#include "phishstream/datagen.hpp"
#include "phishstream/features.hpp"
#include "phishstream/train.hpp"

namespace fixtures {

struct Dataset {
  phishstream::EventStream stream;
  phishstream::NodeLabels labels;
  phishstream::FeatureAudit feature_audit;
};

inline Dataset make_dataset(const phishstream::GenConfig& config) {
  const auto generated = phishstream::generate_stream(config);
  Dataset d;
  d.stream = phishstream::stream_events(generated.records, {.strict_order = true});
  d.feature_audit = phishstream::featurize_stream(d.stream);
  d.labels = phishstream::build_node_labels(d.stream, generated.labels);
  return d;
}

/// A few thousand events: big enough for every split to hold both classes.
inline phishstream::GenConfig small_config(std::uint64_t seed = 3) {
  phishstream::GenConfig c;
  c.seed = seed;
  c.n_nodes = 300;
  c.n_events = 3000;
  c.n_phishing = 12;
  c.n_decoys = 15;
  c.n_light_users = 60;
  return c;
}

inline phishstream::TrainConfig small_train_config() {
  phishstream::TrainConfig t;
  t.engine.dim = 12;
  t.engine.storage_len = 4;
  t.engine.broadcast_k = 4;
  t.epochs = 2;
  return t;
}

}  // namespace fixtures
