#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iidlab/image.hpp"
#include "iidlab/layers.hpp"
#include "iidlab/priors.hpp"

namespace iid::net {

using ad::Mode;
using ad::Shape;
using ad::Tensor;

/// Structural variants used for ablations. Only input and branch wiring
/// changes; output heads keep their shapes.
struct Ablation {
  /// Image encoder only; its features stand in wherever a prior encoder's would be used.
  bool no_priors = false;
  /// No reflectance-edge decoder or edge encoder; attention gates fall back to self-gating
  /// and edge outputs are constant zero maps.
  bool no_edge_module = false;
  /// The invariant-gradient encoder sees Canny edges of the input image instead of CCR maps.
  bool image_edges = false;

  /// Throws InvalidConfig for contradictory combinations.
  void validate() const;
  friend bool operator==(const Ablation&, const Ablation&) = default;
};

struct ModelConfig {
  /// Channels at stage 1; stages use base_width * {1, 2, 4, 8, 8}.
  int base_width = 8;
  int input_size = 64;
  std::uint64_t seed = 0;
  Ablation ablation;

  static constexpr int kStages = 5;
  void validate() const;
};

nlohmann::json to_json(const ModelConfig& cfg);
/// Accepts base_width, input_size, stages (must be 5), seed. Unknown keys rejected.
ModelConfig model_config_from_json(const nlohmann::json& j);

inline constexpr int kMaxSegmentChannels = 16;
inline constexpr int kSemanticChannels = kMaxSegmentChannels + 2;
inline constexpr int kCcrChannels = 7;

/// Per-image encoder inputs, each 1 x C x H x W, stored as plain float buffers.
struct InputTensors {
  Tensor<float> image;     // 3
  Tensor<float> semantic;  // 16 one-hot + wall mask + ceiling mask
  Tensor<float> ccr;       // 6 log ratios + strength, or 1 Canny channel with image_edges
  Tensor<float> r_est;     // 3
  Tensor<float> s_est;     // 1
};

/// Builds the five encoder inputs. Labels >= 15 fold into one-hot channel 15.
InputTensors make_inputs(const ImageRGB& image, const SegmentMap& seg,
                         const priors::PriorBundle& bundle, const Ablation& ablation = {});

/// x * sigmoid(gate); shapes must match.
template <typename T>
Tensor<T> attention(const Tensor<T>& gate, const Tensor<T>& x);

template <typename T>
struct ForwardOutputs {
  Tensor<T> edge_full;
  Tensor<T> edge_half;
  Tensor<T> edge_quarter;
  Tensor<T> r_initial;
  Tensor<T> s_initial;
  Tensor<T> r_final;
  Tensor<T> s_final;
};

/// Batched network inputs (N images stacked).
template <typename T>
struct NetInputs {
  Tensor<T> image;
  Tensor<T> semantic;
  Tensor<T> ccr;
  Tensor<T> r_est;
  Tensor<T> s_est;
};

/// Stacks per-image inputs along the batch axis (converting precision if needed).
template <typename T>
NetInputs<T> stack_inputs(std::span<const InputTensors* const> items);

/// Per-layer record for the architecture report.
struct LayerTrace {
  std::string name;
  Shape output;
};

/// Width-scaled semantic and invariant gradient network: global encoders, reflectance
/// edge decoder with scale-space heads, joint initial decoders with edge attention, and
/// the final correction module (feature calibrator, three encoders, joint decoders).
template <typename T>
class SigNet {
 public:
  explicit SigNet(const ModelConfig& cfg);
  ~SigNet();
  SigNet(SigNet&&) noexcept;
  SigNet& operator=(SigNet&&) noexcept;

  ForwardOutputs<T> forward(const NetInputs<T>& inputs, Mode mode,
                            std::vector<LayerTrace>* trace = nullptr);

  const ModelConfig& config() const { return cfg_; }
  ad::ParamStore<T>& store() { return *store_; }
  const ad::ParamStore<T>& store() const { return *store_; }
  std::vector<ad::Param<T>*> params() { return store_->params(); }
  std::size_t parameter_count() const { return store_->parameter_count(); }
  int input_encoder_count() const;
  int ccr_input_channels() const;

  /// The final convolutions producing each output (edge head, initial and final R/S).
  std::vector<ad::Conv2d<T>*> heads();

  /// Layer shapes, parameter counts and resolved concat widths.
  nlohmann::json architecture_report();
  /// Stable hash of the wiring (everything but the seed).
  std::string architecture_hash();

 private:
  struct Impl;
  ModelConfig cfg_;
  std::unique_ptr<ad::ParamStore<T>> store_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace iid::net
