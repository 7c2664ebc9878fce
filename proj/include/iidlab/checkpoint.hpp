#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>

#include "iidlab/signet.hpp"

namespace iid::ckpt {

/// File layout: 8-byte magic, u64 LE header length, JSON header, then the float32 LE
/// payload (parameters, Adam moments, batch-norm running statistics) at the offsets
/// listed in the header.
inline constexpr char kMagic[8] = {'I', 'I', 'D', 'C', 'K', 'P', 'T', '1'};

struct CheckpointInfo {
  net::ModelConfig model;
  std::string arch_hash;
  std::int64_t iteration = 0;
  int epoch = 0;
  /// Free-form run metadata (resolved run configuration).
  nlohmann::json extra = nlohmann::json::object();
};

/// Writes atomically (temporary file, then rename). arch_hash is taken from the net.
void save_checkpoint(const std::filesystem::path& path, net::SigNet<float>& net, CheckpointInfo info);

/// Header only. HeaderMismatch on a bad magic or header, MissingFile if absent.
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

/// Restores parameters, optimiser state and buffers. CheckpointMismatch if the net's
/// architecture hash differs from the recorded one; TruncatedPayload on short files.
CheckpointInfo load_checkpoint(const std::filesystem::path& path, net::SigNet<float>& net);

/// Builds a net from the recorded model config and loads it.
net::SigNet<float> restore_net(const std::filesystem::path& path, CheckpointInfo* info = nullptr);

}  // namespace iid::ckpt
