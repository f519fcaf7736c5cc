#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "facet/error.hpp"
#include "facet/io.hpp"
#include "facet/model.hpp"

namespace facet {

/// One serialized tensor of a checkpoint.
struct CheckpointEntry {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

/// Raw checkpoint contents: header variant plus the ordered tensor list.
struct Checkpoint {
  Variant variant = Variant::full;
  std::vector<CheckpointEntry> entries;
};

// Layout: magic "FCTW", version u32, variant u32, then for each tensor
// (name length u32, name bytes, rank u32, dims u32[rank], row-major
// little-endian f32 payload) until end of file. Round-trips bit-exactly.

inline void save_checkpoint(FaceTModelT<float>& model, const std::string& path) {
  io::FileWriter out(path);
  out.magic("FCTW");
  out.u32(kCheckpointFormatVersion);
  out.u32(static_cast<std::uint32_t>(model.variant));
  for (const auto& param : model.named_parameters()) {
    out.u32(static_cast<std::uint32_t>(param.name.size()));
    out.write(param.name.data(), param.name.size());
    out.u32(2);
    out.u32(static_cast<std::uint32_t>(param.tensor->rows()));
    out.u32(static_cast<std::uint32_t>(param.tensor->cols()));
    out.f32_array(param.tensor->values().data(), param.tensor->size());
  }
  out.close();
}

inline Checkpoint read_checkpoint(const std::string& path) {
  io::FileReader in(path);
  in.expect_magic("FCTW");
  std::uint32_t version = in.u32();
  if (version != kCheckpointFormatVersion) {
    throw FormatError(path + ": unsupported checkpoint format version " +
                      std::to_string(version));
  }
  std::uint32_t variant_id = in.u32();
  if (variant_id > static_cast<std::uint32_t>(Variant::naive)) {
    throw FormatError(path + ": unknown model variant id " +
                      std::to_string(variant_id));
  }
  Checkpoint ckpt;
  ckpt.variant = static_cast<Variant>(variant_id);
  while (in.remaining() > 0) {
    CheckpointEntry entry;
    std::uint32_t name_len = in.u32();
    if (name_len > in.remaining()) {
      throw FormatError(path + ": tensor name length " + std::to_string(name_len) +
                        " exceeds file at byte offset " + std::to_string(in.offset()));
    }
    entry.name.resize(name_len);
    in.read_exact(entry.name.data(), name_len);
    std::uint32_t rank = in.u32();
    if (rank == 0 || rank > 2) {
      throw FormatError(path + ": tensor \"" + entry.name + "\" has unsupported rank " +
                        std::to_string(rank));
    }
    std::uint64_t total = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      std::uint32_t d = in.u32();
      entry.dims.push_back(d);
      total *= d;
    }
    if (total * 4 > in.remaining()) {
      throw FormatError(path + ": tensor \"" + entry.name + "\" payload of " +
                        std::to_string(total * 4) + " bytes exceeds remaining " +
                        std::to_string(in.remaining()) + " at byte offset " +
                        std::to_string(in.offset()));
    }
    entry.values.resize(static_cast<std::size_t>(total));
    in.f32_array(entry.values.data(), entry.values.size());
    ckpt.entries.push_back(std::move(entry));
  }
  return ckpt;
}

namespace detail {

inline std::pair<std::size_t, std::size_t> entry_shape(const CheckpointEntry& e) {
  if (e.dims.size() == 1) return {1, e.dims[0]};
  return {e.dims[0], e.dims[1]};
}

}  // namespace detail

/// Rebuild a model from a checkpoint. Structure (depth, heads, dims) is
/// recovered from the tensor names and shapes; any missing, extra or
/// misshapen tensor is a format error.
inline FaceTModelT<float> load_model(const std::string& path) {
  Checkpoint ckpt = read_checkpoint(path);
  if (ckpt.variant == Variant::naive) {
    if (!ckpt.entries.empty()) {
      throw FormatError(path + ": naive checkpoint must carry no tensors");
    }
    FaceTModelT<float> model;
    model.variant = Variant::naive;
    return model;
  }

  std::map<std::string, const CheckpointEntry*> by_name;
  for (const auto& e : ckpt.entries) {
    if (!by_name.emplace(e.name, &e).second) {
      throw FormatError(path + ": duplicate tensor \"" + e.name + "\"");
    }
  }
  auto require = [&](const std::string& name) -> const CheckpointEntry& {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw FormatError(path + ": checkpoint is missing tensor \"" + name + "\"");
    }
    return *it->second;
  };

  const std::string stem = ckpt.variant == Variant::only_lp ? "lp" : "re";
  std::size_t depth = 0;
  while (by_name.count(stem + ".layer" + std::to_string(depth) + ".attn.wo")) ++depth;
  std::size_t heads = 0;
  while (by_name.count(stem + ".layer0.attn.head" + std::to_string(heads) + ".wq")) {
    ++heads;
  }
  if (depth == 0 || heads == 0) {
    throw FormatError(path + ": cannot infer encoder structure from tensor names");
  }
  const auto& wq0 = require(stem + ".layer0.attn.head0.wq");
  auto [dim, head_dim] = detail::entry_shape(wq0);

  FaceTModelT<float> model = init_model<float>(ckpt.variant, dim, heads, head_dim,
                                               depth, 0.0f, /*seed=*/0);
  auto params = model.named_parameters();
  if (params.size() != ckpt.entries.size()) {
    throw FormatError(path + ": checkpoint has " + std::to_string(ckpt.entries.size()) +
                      " tensors, model shape needs " + std::to_string(params.size()));
  }
  for (auto& param : params) {
    const auto& entry = require(param.name);
    auto [rows, cols] = detail::entry_shape(entry);
    if (rows != param.tensor->rows() || cols != param.tensor->cols()) {
      throw FormatError(path + ": tensor \"" + param.name + "\" is " +
                        std::to_string(rows) + "x" + std::to_string(cols) +
                        ", expected " + param.tensor->shape_str());
    }
    param.tensor->values() = entry.values;
  }
  return model;
}

}  // namespace facet
