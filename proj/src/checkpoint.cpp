#include "iidlab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace iid::ckpt {

namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void write_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

struct Raw {
  nlohmann::json header;
  std::vector<float> payload;
};

Raw read_raw(const fs::path& path, bool with_payload) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open checkpoint " + path.string());
  char magic[8];
  unsigned char len_bytes[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0 ||
      !in.read(reinterpret_cast<char*>(len_bytes), 8)) {
    throw Error(ErrorCode::HeaderMismatch, path.string() + " is not a checkpoint");
  }
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(len_bytes[i]) << (8 * i);
  if (len > (1ull << 30)) throw Error(ErrorCode::HeaderMismatch, "checkpoint header length is implausible");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) {
    throw Error(ErrorCode::TruncatedPayload, "checkpoint header is truncated");
  }
  Raw raw;
  try {
    raw.header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::HeaderMismatch, std::string("checkpoint header: ") + e.what());
  }
  if (with_payload) {
    const std::uint64_t count = raw.header.at("payload_floats").get<std::uint64_t>();
    raw.payload.resize(count);
    if (!in.read(reinterpret_cast<char*>(raw.payload.data()), static_cast<std::streamsize>(count * 4))) {
      throw Error(ErrorCode::TruncatedPayload, "checkpoint payload is truncated");
    }
  }
  return raw;
}

CheckpointInfo info_from(const nlohmann::json& h) {
  try {
    if (h.at("format").get<int>() != 1) throw Error(ErrorCode::HeaderMismatch, "unsupported checkpoint format");
    CheckpointInfo info;
    info.model = net::model_config_from_json(h.at("model"));
    info.arch_hash = h.at("arch_hash").get<std::string>();
    info.iteration = h.at("iteration").get<std::int64_t>();
    info.epoch = h.at("epoch").get<int>();
    info.extra = h.at("extra");
    return info;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::HeaderMismatch, std::string("checkpoint header: ") + e.what());
  }
}

}  // namespace

void save_checkpoint(const fs::path& path, net::SigNet<float>& net, CheckpointInfo info) {
  info.model = net.config();
  info.arch_hash = net.architecture_hash();
  std::vector<float> payload;
  nlohmann::json tensors = nlohmann::json::array();
  auto add = [&](const std::string& name, const std::string& kind, std::span<const float> data) {
    tensors.push_back({{"name", name}, {"kind", kind}, {"offset", payload.size()}, {"count", data.size()}});
    payload.insert(payload.end(), data.begin(), data.end());
  };
  nlohmann::json steps = nlohmann::json::object();
  for (const auto& p : net.store().param_list()) {
    add(p.name, "param", p.tensor.values());
    add(p.name, "adam_m", p.m);
    add(p.name, "adam_v", p.v);
    steps[p.name] = p.step;
  }
  for (const auto& b : net.store().buffers()) {
    add(b.name, "running_mean", b.state.running_mean);
    add(b.name, "running_var", b.state.running_var);
  }
  nlohmann::json header = {{"format", 1},
                           {"model", net::to_json(info.model)},
                           {"arch_hash", info.arch_hash},
                           {"iteration", info.iteration},
                           {"epoch", info.epoch},
                           {"extra", info.extra},
                           {"adam_steps", steps},
                           {"tensors", tensors},
                           {"payload_floats", payload.size()}};
  const std::string text = header.dump();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + tmp.string());
    out.write(kMagic, 8);
    write_u64(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size() * 4));
    if (!out) throw Error(ErrorCode::IoFailure, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

CheckpointInfo read_checkpoint_info(const fs::path& path) {
  return info_from(read_raw(path, false).header);
}

CheckpointInfo load_checkpoint(const fs::path& path, net::SigNet<float>& net) {
  const Raw raw = read_raw(path, true);
  CheckpointInfo info = info_from(raw.header);
  const std::string hash = net.architecture_hash();
  if (info.arch_hash != hash) {
    throw Error(ErrorCode::CheckpointMismatch,
                "checkpoint architecture " + info.arch_hash + " does not match model " + hash);
  }
  std::map<std::pair<std::string, std::string>, std::pair<std::size_t, std::size_t>> index;
  try {
    for (const auto& t : raw.header.at("tensors")) {
      const auto offset = t.at("offset").get<std::size_t>();
      const auto count = t.at("count").get<std::size_t>();
      if (offset + count > raw.payload.size()) {
        throw Error(ErrorCode::TruncatedPayload, "checkpoint tensor extends past the payload");
      }
      index[{t.at("name").get<std::string>(), t.at("kind").get<std::string>()}] = {offset, count};
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::HeaderMismatch, std::string("checkpoint tensors: ") + e.what());
  }
  auto fetch = [&](const std::string& name, const std::string& kind, std::span<float> dst) {
    const auto it = index.find({name, kind});
    if (it == index.end() || it->second.second != dst.size()) {
      throw Error(ErrorCode::CheckpointMismatch, "checkpoint lacks " + kind + " for " + name);
    }
    std::copy_n(raw.payload.begin() + static_cast<std::ptrdiff_t>(it->second.first), dst.size(), dst.begin());
  };
  const auto& steps = raw.header.at("adam_steps");
  for (auto& p : net.store().param_list()) {
    fetch(p.name, "param", p.tensor.mutable_values());
    fetch(p.name, "adam_m", p.m);
    fetch(p.name, "adam_v", p.v);
    p.step = steps.value(p.name, std::int64_t{0});
  }
  for (auto& b : net.store().buffers()) {
    fetch(b.name, "running_mean", b.state.running_mean);
    fetch(b.name, "running_var", b.state.running_var);
  }
  return info;
}

net::SigNet<float> restore_net(const fs::path& path, CheckpointInfo* out_info) {
  const CheckpointInfo header = read_checkpoint_info(path);
  net::SigNet<float> net(header.model);
  CheckpointInfo info = load_checkpoint(path, net);
  if (out_info) *out_info = std::move(info);
  return net;
}

}  // namespace iid::ckpt
