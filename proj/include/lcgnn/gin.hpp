#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lcgnn/graph_data.hpp"
#include "lcgnn/tape.hpp"

namespace lcgnn {

// One message-passing layer: a learnable self-loop weight and a two-affine
// MLP with a ReLU between (no batch statistics, so encodings stay per-graph
// deterministic).
struct GinLayerParams {
  Parameter epsilon;  // 1x1
  Parameter w1;
  Parameter b1;
  Parameter w2;
  Parameter b2;
};

struct GinEncoderParams {
  std::int64_t input_dim = 0;
  std::int64_t hidden_dim = 0;
  std::vector<GinLayerParams> layers;

  std::int64_t readout_dim() const { return static_cast<std::int64_t>(layers.size()) * hidden_dim; }
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
};

GinEncoderParams init_gin_encoder(std::int64_t input_dim, std::int64_t hidden_dim, std::int64_t num_layers,
                                  std::uint64_t seed);

// Query/key encoder pair: the key encoder starts as an exact deep copy.
std::pair<GinEncoderParams, GinEncoderParams> init_encoders(std::int64_t input_dim, std::int64_t hidden_dim,
                                                            std::int64_t num_layers, std::uint64_t seed);

// out[v] = MLP((1 + epsilon) * h[v] + sum of neighbor rows). Neighbor sums use
// exact accumulation, so the result is bit-identical under node relabeling.
ValueId gin_layer_forward(Tape& tape, const GinLayerParams& layer, ValueId node_embeddings,
                          const std::vector<std::vector<std::int32_t>>& neighbors, bool as_parameters);

// Concatenation over layers of the column-wise node sums.
ValueId graph_readout(Tape& tape, std::span<const ValueId> per_layer);

// Runs all layers and the readout on the tape. With as_parameters the encoder
// weights become gradient leaves (the query path); otherwise they enter as
// constants (the key path).
ValueId encode_graph(Tape& tape, GinEncoderParams& params, const Graph& g, bool as_parameters = true);

// Gradient-free encoding on a scratch tape.
Tensor encode_graph_value(const GinEncoderParams& params, const Graph& g);

// theta_k <- alpha * theta_k + (1 - alpha) * theta_q, element-wise. The only
// place key-encoder weights ever change.
void momentum_update(GinEncoderParams& key_params, const GinEncoderParams& query_params, double alpha);

// L2 distance over all parameter coordinates; used by the momentum contract
// checks.
double parameter_distance(const GinEncoderParams& a, const GinEncoderParams& b);

}  // namespace lcgnn
