#include "phishstream/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace phishstream {
namespace {

constexpr char kMagic[8] = {'P', 'S', 'C', 'K', 'P', 'T', '\0', '\1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof value);
  if (!in) throw CheckpointError("checkpoint truncated");
  return value;
}

}  // namespace

void save_checkpoint(std::ostream& out, const ModelParams& params, const CheckpointMeta& meta) {
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.dim()));
  put<std::uint32_t>(out, kHeadCount);
  put<std::uint64_t>(out, meta.seed);
  put<std::uint64_t>(out, meta.engine.storage_len);
  put<std::uint64_t>(out, meta.engine.broadcast_k);
  put<double>(out, meta.engine.decay_gamma);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(meta.engine.attention_source));
  put<std::uint8_t>(out, meta.engine.disable_decay);
  put<std::uint8_t>(out, meta.engine.disable_broadcast);
  put<std::uint8_t>(out, meta.engine.disable_storage);
  put<double>(out, meta.learning_rate);
  put<std::uint32_t>(out, meta.epochs);
  put<double>(out, meta.positive_weight);

  std::uint32_t count = 0;
  params.for_each_tensor([&count](std::string_view, const auto&) { ++count; });
  put<std::uint32_t>(out, count);
  params.for_each_tensor([&out](std::string_view name, const auto& t) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.cols()));
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) put<double>(out, t(r, c));
  });
  if (!out) throw CheckpointError("failed writing checkpoint");
}

void save_checkpoint_file(const std::string& path, const ModelParams& params,
                          const CheckpointMeta& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint '" + path + "'");
  save_checkpoint(out, params, meta);
}

Checkpoint load_checkpoint(std::istream& in) {
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw CheckpointError("not a phishstream checkpoint");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto dim = get<std::uint32_t>(in);
  const auto heads = get<std::uint32_t>(in);
  if (heads != kHeadCount) throw CheckpointError("checkpoint head count must be 3");

  Checkpoint ck;
  auto& m = ck.meta;
  m.seed = get<std::uint64_t>(in);
  m.engine.dim = dim;
  m.engine.storage_len = get<std::uint64_t>(in);
  m.engine.broadcast_k = get<std::uint64_t>(in);
  m.engine.decay_gamma = get<double>(in);
  m.engine.attention_source = static_cast<AttentionSource>(get<std::uint8_t>(in));
  m.engine.disable_decay = get<std::uint8_t>(in) != 0;
  m.engine.disable_broadcast = get<std::uint8_t>(in) != 0;
  m.engine.disable_storage = get<std::uint8_t>(in) != 0;
  m.learning_rate = get<double>(in);
  m.epochs = get<std::uint32_t>(in);
  m.positive_weight = get<double>(in);

  try {
    ck.params = ModelParams::zeros(dim);
  } catch (const DimensionMismatch&) {
    throw CheckpointError("checkpoint dimension " + std::to_string(dim) + " is invalid");
  }
  std::uint32_t expected = 0;
  ck.params.for_each_tensor([&expected](std::string_view, const auto&) { ++expected; });
  if (get<std::uint32_t>(in) != expected) throw CheckpointError("checkpoint tensor count mismatch");
  ck.params.for_each_tensor([&in](std::string_view name, auto t) {
    const auto len = get<std::uint32_t>(in);
    std::string stored(len, '\0');
    in.read(stored.data(), len);
    if (!in || stored != name) {
      throw CheckpointError("expected tensor '" + std::string(name) + "', found '" + stored + "'");
    }
    const auto rows = get<std::uint32_t>(in);
    const auto cols = get<std::uint32_t>(in);
    if (rows != t.rows() || cols != t.cols()) {
      throw CheckpointError("shape mismatch for tensor '" + stored + "'");
    }
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = get<double>(in);
  });
  return ck;
}

Checkpoint load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  return load_checkpoint(in);
}

}  // namespace phishstream
