#include <doctest.h>

#include <cstring>
#include <sstream>

#include "oracle.hpp"
#include "phishstream/checkpoint.hpp"

using namespace phishstream;

namespace {

CheckpointMeta meta() {
  CheckpointMeta m;
  m.seed = 42;
  m.engine.dim = 6;
  m.engine.storage_len = 7;
  m.engine.broadcast_k = 3;
  m.engine.decay_gamma = 0.8;
  m.engine.attention_source = AttentionSource::kMeanVector;
  m.engine.disable_broadcast = true;
  m.learning_rate = 0.003;
  m.epochs = 4;
  m.positive_weight = 37.5;
  return m;
}

bool bit_equal(const ModelParams& a, const ModelParams& b) {
  std::vector<Eigen::Map<const Mat>> ta, tb;
  a.for_each_tensor([&](std::string_view, Eigen::Map<const Mat> m) { ta.push_back(m); });
  b.for_each_tensor([&](std::string_view, Eigen::Map<const Mat> m) { tb.push_back(m); });
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i].rows() != tb[i].rows() || ta[i].cols() != tb[i].cols()) return false;
    if (std::memcmp(ta[i].data(), tb[i].data(), sizeof(double) * ta[i].size()) != 0) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("checkpoint round-trips parameters and metadata bit-exactly") {
  const auto p = oracle::random_params(6, 3);
  std::stringstream buf;
  save_checkpoint(buf, p, meta());
  const auto back = load_checkpoint(buf);
  CHECK(bit_equal(p, back.params));
  CHECK(back.meta.seed == 42);
  CHECK(back.meta.engine.storage_len == 7);
  CHECK(back.meta.engine.broadcast_k == 3);
  CHECK(back.meta.engine.decay_gamma == 0.8);
  CHECK(back.meta.engine.attention_source == AttentionSource::kMeanVector);
  CHECK(back.meta.engine.disable_broadcast);
  CHECK_FALSE(back.meta.engine.disable_storage);
  CHECK(back.meta.learning_rate == 0.003);
  CHECK(back.meta.epochs == 4);
  CHECK(back.meta.positive_weight == 37.5);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const auto p = oracle::random_params(6, 4);
  std::stringstream buf;
  save_checkpoint(buf, p, meta());
  const std::string bytes = buf.str();
  SUBCASE("bad magic") {
    std::string b = bytes;
    b[0] = 'X';
    std::istringstream in(b);
    CHECK_THROWS_AS(load_checkpoint(in), CheckpointError);
  }
  SUBCASE("unknown version") {
    std::string b = bytes;
    b[8] = 9;
    std::istringstream in(b);
    CHECK_THROWS_AS(load_checkpoint(in), CheckpointError);
  }
  SUBCASE("truncated") {
    std::istringstream in(bytes.substr(0, bytes.size() - 5));
    CHECK_THROWS_AS(load_checkpoint(in), CheckpointError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint_file("/nonexistent/checkpoint.bin"), CheckpointError);
  }
}
