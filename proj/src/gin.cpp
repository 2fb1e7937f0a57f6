#include "lcgnn/gin.hpp"

#include <cmath>
#include <memory>
#include <random>
#include <stdexcept>

#include "lcgnn/exact_sum.hpp"

namespace lcgnn {

namespace {

Tensor glorot_uniform(std::int64_t rows, std::int64_t cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t(rows, cols, 0.0);
  for (double& v : t.values) {
    v = dist(rng);
  }
  return t;
}

using LeafFn = std::function<ValueId(const Parameter&)>;

ValueId layer_forward_impl(Tape& tape, const GinLayerParams& layer, ValueId h,
                           std::shared_ptr<const std::vector<std::vector<std::int32_t>>> neighbors,
                           const LeafFn& leaf) {
  const Tensor& h_val = tape.value(h);
  if (h_val.rows() != static_cast<std::int64_t>(neighbors->size())) {
    throw std::invalid_argument("gin_layer_forward: embedding rows " + std::to_string(h_val.rows()) +
                                " do not match node count " + std::to_string(neighbors->size()));
  }
  if (h_val.cols() != layer.w1.value.rows()) {
    throw std::invalid_argument("gin_layer_forward: embedding width " + std::to_string(h_val.cols()) +
                                " does not match layer input dim " + std::to_string(layer.w1.value.rows()));
  }

  const ValueId eps = leaf(layer.epsilon);
  const double eps_val = tape.value(eps).item();
  const std::int64_t n = h_val.rows();
  const std::int64_t d = h_val.cols();

  Tensor agg(n, d, 0.0);
  for (std::int64_t v = 0; v < n; ++v) {
    const auto& nbrs = (*neighbors)[static_cast<std::size_t>(v)];
    for (std::int64_t c = 0; c < d; ++c) {
      ExactSum acc;
      for (std::int32_t u : nbrs) {
        acc.add(h_val.at(u, c));
      }
      agg.at(v, c) = (1.0 + eps_val) * h_val.at(v, c) + acc.result();
    }
  }

  const ValueId operands[] = {h, eps};
  const ValueId agg_id = tape.custom(
      "gin-aggregate", operands, std::move(agg),
      [neighbors](const Tensor& out_grad, std::span<const Tensor* const> operand_values,
                  std::span<Tensor* const> operand_grads) {
        const Tensor& h_in = *operand_values[0];
        const double eps_in = operand_values[1]->item();
        const std::int64_t rows = h_in.rows();
        const std::int64_t cols = h_in.cols();
        if (Tensor* gh = operand_grads[0]) {
          for (std::int64_t v = 0; v < rows; ++v) {
            for (std::int64_t c = 0; c < cols; ++c) {
              gh->at(v, c) += (1.0 + eps_in) * out_grad.at(v, c);
            }
            for (std::int32_t u : (*neighbors)[static_cast<std::size_t>(v)]) {
              for (std::int64_t c = 0; c < cols; ++c) {
                gh->at(u, c) += out_grad.at(v, c);
              }
            }
          }
        }
        if (Tensor* ge = operand_grads[1]) {
          double acc = 0.0;
          for (std::size_t i = 0; i < h_in.values.size(); ++i) {
            acc += out_grad.values[i] * h_in.values[i];
          }
          ge->values[0] += acc;
        }
      });

  const ValueId z1 = tape.add(tape.matmul(agg_id, leaf(layer.w1)), leaf(layer.b1));
  const ValueId a1 = tape.relu(z1);
  return tape.add(tape.matmul(a1, leaf(layer.w2)), leaf(layer.b2));
}

ValueId encode_impl(Tape& tape, const GinEncoderParams& params, const Graph& g, const LeafFn& leaf) {
  if (params.layers.empty()) {
    throw std::invalid_argument("encode_graph: encoder has no layers");
  }
  if (g.features.numel() == 0 || g.features.cols() != params.input_dim) {
    throw std::invalid_argument("encode_graph: graph features do not match encoder input dim " +
                                std::to_string(params.input_dim));
  }
  if (g.features.rows() != g.node_count) {
    throw std::invalid_argument("encode_graph: feature rows do not match node count");
  }
  auto neighbors = std::make_shared<const std::vector<std::vector<std::int32_t>>>(adjacency_lists(g));
  ValueId h = tape.constant(g.features);
  std::vector<ValueId> per_layer;
  per_layer.reserve(params.layers.size());
  for (const GinLayerParams& layer : params.layers) {
    h = layer_forward_impl(tape, layer, h, neighbors, leaf);
    per_layer.push_back(h);
  }
  return graph_readout(tape, per_layer);
}

}  // namespace

std::vector<Parameter*> GinEncoderParams::parameters() {
  std::vector<Parameter*> out;
  for (GinLayerParams& layer : layers) {
    out.push_back(&layer.epsilon);
    out.push_back(&layer.w1);
    out.push_back(&layer.b1);
    out.push_back(&layer.w2);
    out.push_back(&layer.b2);
  }
  return out;
}

std::vector<const Parameter*> GinEncoderParams::parameters() const {
  std::vector<const Parameter*> out;
  for (const GinLayerParams& layer : layers) {
    out.push_back(&layer.epsilon);
    out.push_back(&layer.w1);
    out.push_back(&layer.b1);
    out.push_back(&layer.w2);
    out.push_back(&layer.b2);
  }
  return out;
}

GinEncoderParams init_gin_encoder(std::int64_t input_dim, std::int64_t hidden_dim, std::int64_t num_layers,
                                  std::uint64_t seed) {
  if (input_dim < 1 || hidden_dim < 1 || num_layers < 1) {
    throw std::invalid_argument("init_gin_encoder: dims and layer count must be positive");
  }
  GinEncoderParams params;
  params.input_dim = input_dim;
  params.hidden_dim = hidden_dim;
  std::mt19937_64 rng(seed);
  for (std::int64_t k = 0; k < num_layers; ++k) {
    const std::int64_t in_dim = k == 0 ? input_dim : hidden_dim;
    const std::string prefix = "layer" + std::to_string(k) + ".";
    GinLayerParams layer{
        Parameter(prefix + "epsilon", Tensor::scalar(0.0)),
        Parameter(prefix + "w1", glorot_uniform(in_dim, hidden_dim, rng)),
        Parameter(prefix + "b1", Tensor(1, hidden_dim, 0.0)),
        Parameter(prefix + "w2", glorot_uniform(hidden_dim, hidden_dim, rng)),
        Parameter(prefix + "b2", Tensor(1, hidden_dim, 0.0)),
    };
    params.layers.push_back(std::move(layer));
  }
  return params;
}

std::pair<GinEncoderParams, GinEncoderParams> init_encoders(std::int64_t input_dim, std::int64_t hidden_dim,
                                                            std::int64_t num_layers, std::uint64_t seed) {
  GinEncoderParams query = init_gin_encoder(input_dim, hidden_dim, num_layers, seed);
  GinEncoderParams key = query;  // deep copy; the two diverge under their own update rules
  return {std::move(query), std::move(key)};
}

ValueId gin_layer_forward(Tape& tape, const GinLayerParams& layer, ValueId node_embeddings,
                          const std::vector<std::vector<std::int32_t>>& neighbors, bool as_parameters) {
  auto shared = std::make_shared<const std::vector<std::vector<std::int32_t>>>(neighbors);
  if (as_parameters) {
    return layer_forward_impl(tape, layer, node_embeddings, shared, [&tape](const Parameter& p) {
      return tape.parameter(const_cast<Parameter&>(p));
    });
  }
  return layer_forward_impl(tape, layer, node_embeddings, shared,
                            [&tape](const Parameter& p) { return tape.frozen(p); });
}

ValueId graph_readout(Tape& tape, std::span<const ValueId> per_layer) {
  if (per_layer.empty()) {
    throw std::invalid_argument("graph_readout: no layer embeddings given");
  }
  std::vector<ValueId> sums;
  sums.reserve(per_layer.size());
  for (ValueId id : per_layer) {
    sums.push_back(tape.sum_rows(id));
  }
  return tape.concat_last_axis(sums);
}

ValueId encode_graph(Tape& tape, GinEncoderParams& params, const Graph& g, bool as_parameters) {
  if (as_parameters) {
    return encode_impl(tape, params, g,
                       [&tape](const Parameter& p) { return tape.parameter(const_cast<Parameter&>(p)); });
  }
  return encode_impl(tape, params, g, [&tape](const Parameter& p) { return tape.frozen(p); });
}

Tensor encode_graph_value(const GinEncoderParams& params, const Graph& g) {
  Tape tape;
  const ValueId out = encode_impl(tape, params, g, [&tape](const Parameter& p) { return tape.frozen(p); });
  return tape.value(out);
}

void momentum_update(GinEncoderParams& key_params, const GinEncoderParams& query_params, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("momentum_update: alpha must lie in [0, 1), got " + std::to_string(alpha));
  }
  auto key = key_params.parameters();
  auto query = query_params.parameters();
  if (key.size() != query.size()) {
    throw std::invalid_argument("momentum_update: encoder layouts differ");
  }
  for (std::size_t i = 0; i < key.size(); ++i) {
    if (!key[i]->value.same_shape(query[i]->value)) {
      throw std::invalid_argument("momentum_update: shape mismatch at parameter " + key[i]->name);
    }
    for (std::size_t j = 0; j < key[i]->value.values.size(); ++j) {
      double& kv = key[i]->value.values[j];
      const double qv = query[i]->value.values[j];
      // equal coordinates are a fixed point; skip the blend so they stay
      // bit-identical instead of drifting by an ulp
      if (kv != qv) {
        kv = alpha * kv + (1.0 - alpha) * qv;
      }
    }
  }
}

double parameter_distance(const GinEncoderParams& a, const GinEncoderParams& b) {
  auto pa = a.parameters();
  auto pb = b.parameters();
  if (pa.size() != pb.size()) {
    throw std::invalid_argument("parameter_distance: encoder layouts differ");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    for (std::size_t j = 0; j < pa[i]->value.values.size(); ++j) {
      const double d = pa[i]->value.values[j] - pb[i]->value.values[j];
      acc += d * d;
    }
  }
  return std::sqrt(acc);
}

}  // namespace lcgnn
