#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "deepagent/binary_io.hpp"
#include "deepagent/nn/sequential.hpp"

namespace deepagent::nn {

// Model checkpoint container:
//   "DAMC" | version u32 | layer count u32 |
//   per layer: kind u32 | tensor count u32 |
//     per tensor: rank u32 | dims u32[rank] | f64 payload (little endian)
// Payloads are always written as f64, so f32 and f64 models share the format
// and float weights round-trip exactly.

inline constexpr char kCheckpointMagic[] = "DAMC";
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename Scalar>
io::Bytes encode_checkpoint(Sequential<Scalar>& model) {
  io::ByteWriter w;
  w.magic(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(model.size()));
  for (std::size_t i = 0; i < model.size(); ++i) {
    auto& layer = model.layer(i);
    const auto tensors = layer.state();
    w.u32(static_cast<std::uint32_t>(layer.kind()));
    w.u32(static_cast<std::uint32_t>(tensors.size()));
    for (const auto* t : tensors) {
      w.u32(static_cast<std::uint32_t>(t->rank()));
      for (Index d : t->shape()) w.u32(static_cast<std::uint32_t>(d));
      for (Index k = 0; k < t->size(); ++k) w.f64(static_cast<double>((*t)[k]));
    }
  }
  return std::move(w.bytes());
}

/// Loads weights into an already-built model; layer kinds and tensor shapes
/// must match exactly.
template <typename Scalar>
void decode_checkpoint(Sequential<Scalar>& model, const io::Bytes& bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  r.expect_magic(kCheckpointMagic);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw IngestionError(source + ": unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t layers = r.u32();
  if (layers != model.size())
    throw IngestionError(source + ": checkpoint has " + std::to_string(layers) + " layers, model has " +
                         std::to_string(model.size()));
  for (std::size_t i = 0; i < model.size(); ++i) {
    auto& layer = model.layer(i);
    const auto kind = static_cast<LayerKind>(r.u32());
    if (kind != layer.kind())
      throw IngestionError(source + ": layer " + std::to_string(i) + " is " + layer_kind_name(kind) +
                           " in the checkpoint but " + layer_kind_name(layer.kind()) + " in the model");
    auto tensors = layer.state();
    const std::uint32_t count = r.u32();
    if (count != tensors.size())
      throw IngestionError(source + ": layer " + std::to_string(i) + " tensor count mismatch");
    for (auto* t : tensors) {
      const std::uint32_t rank = r.u32();
      Shape shape(rank);
      for (auto& d : shape) d = r.u32();
      if (shape != t->shape())
        throw IngestionError(source + ": layer " + layer.name() + " shape " + shape_string(shape) +
                             " does not match model shape " + shape_string(t->shape()));
      for (Index k = 0; k < t->size(); ++k) (*t)[k] = static_cast<Scalar>(r.f64());
    }
  }
  if (!r.at_end()) throw IngestionError(source + ": trailing bytes after checkpoint payload");
}

template <typename Scalar>
void save_checkpoint(Sequential<Scalar>& model, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(model));
}

template <typename Scalar>
void load_checkpoint(Sequential<Scalar>& model, const std::filesystem::path& path) {
  decode_checkpoint(model, io::read_file(path), path.string());
}

}  // namespace deepagent::nn
