#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tropattn/attention.hpp"
#include "tropattn/tropical.hpp"
#include "tropattn/types.hpp"

namespace tropattn {

/// y = W2 max(0, W1 u + b1) + b2, plus u when residual is set.
struct FeedForward {
  Matrix w1;  // d_ff x d
  Vector b1;  // d_ff
  Matrix w2;  // d x d_ff
  Vector b2;  // d
  bool residual = false;

  Eigen::Index width() const { return w1.rows(); }
};

/// One block: multi-head attention, output projection, optional attention
/// residual, then an optional FFN (absent means identity).
struct BlockLayer {
  std::vector<HeadData> heads;
  std::optional<Matrix> w_o;  // d x (sum of head value dims); absent = identity
  bool residual = true;
  std::optional<FeedForward> ffn;
};

class BlockNetwork {
 public:
  BlockNetwork(Eigen::Index dim, std::vector<BlockLayer> layers);

  Eigen::Index dim() const { return dim_; }
  std::size_t depth() const { return layers_.size(); }
  const std::vector<BlockLayer>& layers() const { return layers_; }

 private:
  Eigen::Index dim_;
  std::vector<BlockLayer> layers_;
};

struct LayerSignature {
  std::vector<std::uint32_t> routing;
  std::vector<bool> ffn_bits;
  /// Finite temperature only: winner's softmax mass exceeded 0.5.
  std::vector<bool> dominant;

  friend bool operator==(const LayerSignature&, const LayerSignature&) = default;
};

struct Signature {
  std::vector<LayerSignature> layers;
  bool boundary = false;

  /// Compact byte encoding of the discrete choices (boundary flag excluded).
  std::string key() const;
  friend bool operator==(const Signature&, const Signature&) = default;
};

struct ForwardResult {
  Vector y;
  Signature sig;
};

/// Runs x through the block stack. At zero temperature heads route to their
/// argmax key; ties and near-zero ReLU pre-activations set the boundary flag.
ForwardResult forward(const Vector& x, const BlockNetwork& net, Temperature temp);

nlohmann::json to_json(const BlockNetwork& net);
BlockNetwork network_from_json(const nlohmann::json& j);

}  // namespace tropattn
