#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lcgnn/tensor.hpp"

namespace lcgnn {

struct Graph {
  std::int32_t node_count = 0;
  // Undirected, deduplicated, stored with first endpoint <= second.
  std::vector<std::pair<std::int32_t, std::int32_t>> edges;
  Tensor features;  // node_count x feature_dim; empty until features exist
  std::int32_t label = 0;
};

enum class FeatureSource { kNone, kNodeLabels, kDegreeOneHot };

struct GraphDataset {
  std::string name;
  std::vector<Graph> graphs;
  std::int32_t class_count = 0;
  FeatureSource feature_source = FeatureSource::kNone;

  std::int64_t feature_dim() const;
  std::vector<std::int32_t> labels() const;
};

struct FoldSplit {
  std::int32_t fold_index = 0;
  std::vector<std::int32_t> train_indices;
  std::vector<std::int32_t> test_indices;
};

// Reads NAME_A.txt / NAME_graph_indicator.txt / NAME_graph_labels.txt (and
// NAME_node_labels.txt when present) from root/name/. Raw labels are remapped
// to [0, C) in sorted order; 1-based file indices become 0-based.
GraphDataset parse_tu_dataset(const std::filesystem::path& root, const std::string& name);

// Writes the dataset back in the same multi-file layout under
// root/dataset.name/. Each undirected edge appears in both directions, lines
// sorted ascending, so output produced here round-trips byte-identically.
void write_tu_dataset(const std::filesystem::path& root, const GraphDataset& dataset);

// Replaces features with one-hot encodings of node degree; the encoding width
// is the dataset-wide max degree + 1. Only valid while no native features
// are attached.
GraphDataset degree_onehot_features(const GraphDataset& dataset);

// Sorted neighbor lists (ascending node index) for one graph.
std::vector<std::vector<std::int32_t>> adjacency_lists(const Graph& g);

std::vector<FoldSplit> stratified_kfold_split(const GraphDataset& dataset, std::int32_t k, std::uint64_t seed);

// Keeps ceil(ratio * count) members of every class, preserving the input
// order of the survivors. ratio == 1 returns the input untouched.
std::vector<std::int32_t> subsample_training_set(const std::vector<std::int32_t>& train_indices,
                                                 std::span<const std::int32_t> labels_by_graph, double ratio,
                                                 std::uint64_t seed);

// Deterministic shuffle of `indices` keyed on (seed, epoch), chunked into
// batches; the final partial batch is kept.
std::vector<std::vector<std::int32_t>> make_minibatches(const std::vector<std::int32_t>& indices,
                                                        std::int64_t batch_size, std::uint64_t seed,
                                                        std::int64_t epoch);

// The built-in synthetic dataset: 8 graphs, 2 classes with disjoint degree
// distributions (cycles vs stars). Features are left to degree one-hot.
GraphDataset make_fixture_dataset(std::uint64_t seed = 1);

// splitmix64-based combiner for deriving independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0);

}  // namespace lcgnn
