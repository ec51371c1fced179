#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>

#include "json.hpp"

#include "backgen/error.hpp"
#include "backgen/model.hpp"
#include "backgen/optimizer.hpp"

namespace backgen {

// Layout: 8-byte magic, u32 format version, u64 header length, JSON header
// (dimensions, vocabulary, labels, tensor shapes, optimizer scalars), then
// raw little-endian doubles: every tensor, followed by both optimizer moment
// sets when present.
inline constexpr char kCheckpointMagic[8] = {'B', 'G', 'C', 'K', 'P', 'T', '\0', '\1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  std::optional<OptimizerState> optimizer;
  nlohmann::json metadata = nlohmann::json::object();
};

namespace detail {

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error(ErrorKind::BadCheckpoint, "truncated checkpoint");
  return value;
}

inline void write_tensors(std::ostream& out, const ParamSet& set) {
  for (const Tensor& t : set.tensors) {
    out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  }
}

inline void read_tensors(std::istream& in, ParamSet& set) {
  for (Tensor& t : set.tensors) {
    in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!in) throw Error(ErrorKind::BadCheckpoint, "truncated tensor data");
  }
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const ModelParams& p = ckpt.params;
  nlohmann::json header;
  header["version"] = kCheckpointVersion;
  header["dims"] = {{"embedding", p.dims.embedding},
                    {"recurrent", p.dims.recurrent},
                    {"span_half", p.dims.span_half},
                    {"ff_hidden", p.dims.ff_hidden}};
  header["vocab"] = p.vocab.words();
  header["labels"] = p.labels.labels();
  nlohmann::json shapes = nlohmann::json::array();
  for (int id = 0; id < kNumParams; ++id) {
    shapes.push_back({{"name", kParamNames[id]}, {"rows", p.weights[id].rows}, {"cols", p.weights[id].cols}});
  }
  header["tensors"] = shapes;
  if (ckpt.optimizer) {
    const OptimizerState& o = *ckpt.optimizer;
    header["optimizer"] = {{"kind", "adamw"},
                           {"step", o.step},
                           {"beta1", o.config.beta1},
                           {"beta2", o.config.beta2},
                           {"epsilon", o.config.epsilon},
                           {"weight_decay", o.config.weight_decay}};
  }
  header["metadata"] = ckpt.metadata;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write checkpoint '" + path + "'");
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_pod(out, kCheckpointVersion);
  detail::write_pod(out, static_cast<std::uint64_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  detail::write_tensors(out, p.weights);
  if (ckpt.optimizer) {
    detail::write_tensors(out, ckpt.optimizer->first_moment);
    detail::write_tensors(out, ckpt.optimizer->second_moment);
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing checkpoint '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open checkpoint '" + path + "'");
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw Error(ErrorKind::BadCheckpoint, "'" + path + "' is not a checkpoint");
  }
  const auto version = detail::read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::BadCheckpoint, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto len = detail::read_pod<std::uint64_t>(in);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw Error(ErrorKind::BadCheckpoint, "truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadCheckpoint, std::string("bad header: ") + e.what());
  }

  Checkpoint ckpt;
  ModelParams& p = ckpt.params;
  const auto& dims = header.at("dims");
  p.dims = ModelDims{dims.at("embedding"), dims.at("recurrent"), dims.at("span_half"), dims.at("ff_hidden")};
  p.vocab = Vocabulary(header.at("vocab").get<std::vector<std::string>>());
  p.labels = LabelSet(header.at("labels").get<std::vector<std::string>>());
  const auto& shapes = header.at("tensors");
  if (shapes.size() != kNumParams) throw Error(ErrorKind::BadCheckpoint, "unexpected tensor count");
  for (int id = 0; id < kNumParams; ++id) {
    const auto& s = shapes[static_cast<std::size_t>(id)];
    if (s.at("name").get<std::string>() != kParamNames[id]) {
      throw Error(ErrorKind::BadCheckpoint, "unexpected tensor '" + s.at("name").get<std::string>() + "'");
    }
    p.weights.tensors.emplace_back(s.at("rows").get<int>(), s.at("cols").get<int>());
  }
  detail::read_tensors(in, p.weights);
  if (header.contains("optimizer")) {
    const auto& o = header.at("optimizer");
    OptimizerState state;
    state.config = AdamWConfig{o.at("beta1"), o.at("beta2"), o.at("epsilon"), o.at("weight_decay")};
    state.step = o.at("step");
    state.first_moment = p.weights.zeros_like();
    state.second_moment = p.weights.zeros_like();
    detail::read_tensors(in, state.first_moment);
    detail::read_tensors(in, state.second_moment);
    ckpt.optimizer = std::move(state);
  }
  if (header.contains("metadata")) ckpt.metadata = header.at("metadata");
  return ckpt;
}

}  // namespace backgen
