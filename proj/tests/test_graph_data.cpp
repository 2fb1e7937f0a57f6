#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "lcgnn/graph_data.hpp"

using namespace lcgnn;
namespace fs = std::filesystem;

namespace {

// Hand-built two-graph dataset: a triangle labeled 1 and a single edge
// labeled -1, written in raw TU form (both edge directions, 1-based ids).
fs::path write_hand_fixture() {
  const fs::path dir = fs::temp_directory_path() / "lcgnn_tu_fixture" / "TINY";
  fs::create_directories(dir);
  std::ofstream(dir / "TINY_A.txt") << "1, 2\n2, 1\n1, 3\n3, 1\n2, 3\n3, 2\n4, 5\n5, 4\n";
  std::ofstream(dir / "TINY_graph_indicator.txt") << "1\n1\n1\n2\n2\n";
  std::ofstream(dir / "TINY_graph_labels.txt") << "1\n-1\n";
  return dir.parent_path();
}

Graph path_graph(std::int32_t n) {
  Graph g;
  g.node_count = n;
  for (std::int32_t i = 0; i + 1 < n; ++i) {
    g.edges.emplace_back(i, i + 1);
  }
  return g;
}

}  // namespace

TEST_CASE("parsing the hand fixture remaps labels and groups edges") {
  const fs::path root = write_hand_fixture();
  const GraphDataset ds = parse_tu_dataset(root, "TINY");
  REQUIRE(ds.graphs.size() == 2);
  CHECK(ds.class_count == 2);
  CHECK(ds.graphs[0].node_count == 3);
  CHECK(ds.graphs[1].node_count == 2);
  // raw labels {-1, 1} sorted: -1 -> 0, 1 -> 1
  CHECK(ds.graphs[0].label == 1);
  CHECK(ds.graphs[1].label == 0);
  CHECK(ds.graphs[0].edges.size() == 3);  // directed duplicates collapsed
  CHECK(ds.graphs[1].edges.size() == 1);
  CHECK(ds.feature_source == FeatureSource::kNone);
}

TEST_CASE("a missing adjacency file is rejected by name") {
  const fs::path root = fs::temp_directory_path() / "lcgnn_tu_missing";
  fs::create_directories(root / "EMPTY");
  try {
    parse_tu_dataset(root, "EMPTY");
    FAIL("expected missing-file error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("EMPTY_A.txt") != std::string::npos);
  }
}

TEST_CASE("an edge crossing two graphs is rejected with its line number") {
  const fs::path dir = fs::temp_directory_path() / "lcgnn_tu_cross" / "CROSS";
  fs::create_directories(dir);
  std::ofstream(dir / "CROSS_A.txt") << "1, 2\n2, 3\n";
  std::ofstream(dir / "CROSS_graph_indicator.txt") << "1\n1\n2\n";
  std::ofstream(dir / "CROSS_graph_labels.txt") << "0\n1\n";
  try {
    parse_tu_dataset(dir.parent_path(), "CROSS");
    FAIL("expected crossing-edge error");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("crosses two graphs") != std::string::npos);
    CHECK(msg.find("line 2") != std::string::npos);
  }
}

TEST_CASE("indicator referencing a graph without a label is rejected") {
  const fs::path dir = fs::temp_directory_path() / "lcgnn_tu_mismatch" / "MM";
  fs::create_directories(dir);
  std::ofstream(dir / "MM_A.txt") << "1, 2\n";
  std::ofstream(dir / "MM_graph_indicator.txt") << "1\n1\n2\n";
  std::ofstream(dir / "MM_graph_labels.txt") << "0\n";
  CHECK_THROWS_AS(parse_tu_dataset(dir.parent_path(), "MM"), std::runtime_error);
}

TEST_CASE("node labels expand to one-hot features") {
  const fs::path dir = fs::temp_directory_path() / "lcgnn_tu_nodelabels" / "NL";
  fs::create_directories(dir);
  std::ofstream(dir / "NL_A.txt") << "1, 2\n2, 1\n";
  std::ofstream(dir / "NL_graph_indicator.txt") << "1\n1\n";
  std::ofstream(dir / "NL_graph_labels.txt") << "1\n";
  std::ofstream(dir / "NL_node_labels.txt") << "7\n3\n";
  const GraphDataset ds = parse_tu_dataset(dir.parent_path(), "NL");
  CHECK(ds.feature_source == FeatureSource::kNodeLabels);
  REQUIRE(ds.feature_dim() == 2);
  // sorted raw node labels {3, 7}: node 0 carries 7 -> column 1
  CHECK(ds.graphs[0].features.at(0, 1) == 1.0);
  CHECK(ds.graphs[0].features.at(1, 0) == 1.0);
}

TEST_CASE("degree one-hot features on a path graph") {
  GraphDataset ds;
  ds.name = "PATH";
  ds.class_count = 1;
  Graph g = path_graph(3);
  g.label = 0;
  ds.graphs = {g};
  const GraphDataset out = degree_onehot_features(ds);
  REQUIRE(out.feature_dim() == 3);  // max degree 2
  const Tensor& f = out.graphs[0].features;
  CHECK(f.at(0, 1) == 1.0);
  CHECK(f.at(1, 2) == 1.0);
  CHECK(f.at(2, 1) == 1.0);
  CHECK(out.feature_source == FeatureSource::kDegreeOneHot);
}

TEST_CASE("an isolated node lands in the degree-0 bucket") {
  GraphDataset ds;
  ds.class_count = 1;
  Graph g;
  g.node_count = 1;
  g.label = 0;
  ds.graphs = {g};
  const GraphDataset out = degree_onehot_features(ds);
  CHECK(out.graphs[0].features.at(0, 0) == 1.0);
}

TEST_CASE("star features put the hub and leaves in different buckets") {
  GraphDataset ds;
  ds.class_count = 1;
  Graph g;
  g.node_count = 4;
  g.edges = {{0, 1}, {0, 2}, {0, 3}};
  g.label = 0;
  ds.graphs = {g};
  const GraphDataset out = degree_onehot_features(ds);
  REQUIRE(out.feature_dim() == 4);
  CHECK(out.graphs[0].features.at(0, 3) == 1.0);
  for (int leaf = 1; leaf < 4; ++leaf) {
    CHECK(out.graphs[0].features.at(leaf, 1) == 1.0);
  }
}

TEST_CASE("every degree one-hot row sums to exactly one") {
  const GraphDataset ds = degree_onehot_features(make_fixture_dataset());
  for (const Graph& g : ds.graphs) {
    for (std::int64_t r = 0; r < g.features.rows(); ++r) {
      double sum = 0.0;
      for (std::int64_t c = 0; c < g.features.cols(); ++c) {
        sum += g.features.at(r, c);
      }
      CHECK(sum == 1.0);
    }
  }
}

TEST_CASE("degree features refuse to overwrite native attributes") {
  GraphDataset ds;
  ds.class_count = 1;
  Graph g;
  g.node_count = 1;
  g.features = Tensor(1, 2, 0.5);
  ds.graphs = {g};
  ds.feature_source = FeatureSource::kNodeLabels;
  CHECK_THROWS_AS(degree_onehot_features(ds), std::logic_error);
}

namespace {

GraphDataset labeled_dataset(const std::vector<std::int32_t>& labels) {
  GraphDataset ds;
  ds.name = "LBL";
  ds.class_count = 0;
  for (std::int32_t label : labels) {
    Graph g;
    g.node_count = 1;
    g.label = label;
    ds.class_count = std::max(ds.class_count, label + 1);
    ds.graphs.push_back(g);
  }
  return ds;
}

}  // namespace

TEST_CASE("balanced stratified folds hold one of each class") {
  std::vector<std::int32_t> labels;
  for (int i = 0; i < 5; ++i) {
    labels.push_back(0);
    labels.push_back(1);
  }
  const GraphDataset ds = labeled_dataset(labels);
  const auto splits = stratified_kfold_split(ds, 5, 3);
  REQUIRE(splits.size() == 5);
  for (const FoldSplit& fold : splits) {
    REQUIRE(fold.test_indices.size() == 2);
    std::set<std::int32_t> classes;
    for (std::int32_t idx : fold.test_indices) {
      classes.insert(ds.graphs[static_cast<std::size_t>(idx)].label);
    }
    CHECK(classes == std::set<std::int32_t>{0, 1});
    CHECK(fold.train_indices.size() == 8);
  }
}

TEST_CASE("splits are deterministic under the seed") {
  const GraphDataset ds = labeled_dataset({0, 1, 0, 1, 0, 1, 0, 1});
  const auto a = stratified_kfold_split(ds, 4, 9);
  const auto b = stratified_kfold_split(ds, 4, 9);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].train_indices == b[i].train_indices);
    CHECK(a[i].test_indices == b[i].test_indices);
  }
  const auto c = stratified_kfold_split(ds, 4, 10);
  bool any_differ = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    any_differ = any_differ || a[i].test_indices != c[i].test_indices;
  }
  CHECK(any_differ);
}

TEST_CASE("a 188-graph two-class split gives fold sizes 18 and 19") {
  std::vector<std::int32_t> labels(125, 0);
  labels.insert(labels.end(), 63, 1);
  const GraphDataset ds = labeled_dataset(labels);
  const auto splits = stratified_kfold_split(ds, 10, 1);
  std::set<std::int32_t> covered;
  for (const FoldSplit& fold : splits) {
    const std::size_t size = fold.test_indices.size();
    CHECK((size == 18 || size == 19));
    for (std::int32_t idx : fold.test_indices) {
      CHECK(covered.insert(idx).second);  // disjoint test folds
    }
    // per-fold class proportions within one instance of global proportions
    std::map<std::int32_t, int> counts;
    for (std::int32_t idx : fold.train_indices) {
      counts[ds.graphs[static_cast<std::size_t>(idx)].label]++;
    }
    CHECK(std::abs(counts[0] - 112) <= 1);  // 125 * 9/10
    CHECK(std::abs(counts[1] - 57) <= 1);   // 63 * 9/10
  }
  CHECK(covered.size() == 188);
}

TEST_CASE("fold counts outside the dataset are rejected") {
  const GraphDataset ds = labeled_dataset({0, 1, 0, 1});
  CHECK_THROWS_AS(stratified_kfold_split(ds, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(stratified_kfold_split(ds, 5, 0), std::invalid_argument);
}

TEST_CASE("subsampling at ratio one is the identity") {
  const std::vector<std::int32_t> train = {5, 3, 9, 1};
  const std::vector<std::int32_t> labels = {0, 0, 0, 1, 1, 1, 0, 0, 0, 1};
  CHECK(subsample_training_set(train, labels, 1.0, 7) == train);
}

TEST_CASE("subsampling keeps the per-class ceiling") {
  std::vector<std::int32_t> train;
  std::vector<std::int32_t> labels;
  for (std::int32_t i = 0; i < 20; ++i) {
    train.push_back(i);
    labels.push_back(i < 10 ? 0 : 1);
  }
  const auto reduced = subsample_training_set(train, labels, 0.6, 11);
  CHECK(reduced.size() == 12);
  int per_class[2] = {0, 0};
  for (std::int32_t idx : reduced) {
    per_class[labels[static_cast<std::size_t>(idx)]]++;
  }
  CHECK(per_class[0] == 6);
  CHECK(per_class[1] == 6);
  // survivors keep their original relative order
  CHECK(std::is_sorted(reduced.begin(), reduced.end()));
}

TEST_CASE("tiny ratios keep at least one member per class") {
  const std::vector<std::int32_t> train = {0, 1, 2, 3};
  const std::vector<std::int32_t> labels = {0, 0, 0, 1};
  const auto reduced = subsample_training_set(train, labels, 0.1, 5);
  int per_class[2] = {0, 0};
  for (std::int32_t idx : reduced) {
    per_class[labels[static_cast<std::size_t>(idx)]]++;
  }
  CHECK(per_class[0] == 1);
  CHECK(per_class[1] == 1);
  CHECK_THROWS_AS(subsample_training_set(train, labels, 0.0, 5), std::invalid_argument);
  CHECK_THROWS_AS(subsample_training_set(train, labels, -0.5, 5), std::invalid_argument);
}

TEST_CASE("minibatches keep the final partial batch") {
  const std::vector<std::int32_t> indices = {0, 1, 2, 3, 4, 5, 6};
  const auto batches = make_minibatches(indices, 3, 1, 0);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].size() == 3);
  CHECK(batches[1].size() == 3);
  CHECK(batches[2].size() == 1);
  std::set<std::int32_t> seen;
  for (const auto& batch : batches) {
    seen.insert(batch.begin(), batch.end());
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("an oversized batch gives a single batch") {
  const std::vector<std::int32_t> indices = {4, 5, 6};
  const auto batches = make_minibatches(indices, 10, 1, 0);
  REQUIRE(batches.size() == 1);
  CHECK(batches[0].size() == 3);
}

TEST_CASE("minibatch order is a function of seed and epoch") {
  const std::vector<std::int32_t> indices = {0, 1, 2, 3, 4, 5, 6, 7};
  CHECK(make_minibatches(indices, 3, 2, 5) == make_minibatches(indices, 3, 2, 5));
  CHECK(make_minibatches(indices, 3, 2, 5) != make_minibatches(indices, 3, 2, 6));
  CHECK_THROWS_AS(make_minibatches({}, 3, 2, 5), std::invalid_argument);
  CHECK_THROWS_AS(make_minibatches(indices, 0, 2, 5), std::invalid_argument);
}

TEST_CASE("writing and re-parsing preserves counts exactly") {
  const GraphDataset ds = make_fixture_dataset();
  const fs::path root = fs::temp_directory_path() / "lcgnn_tu_roundtrip";
  fs::remove_all(root);
  write_tu_dataset(root, ds);
  const GraphDataset back = parse_tu_dataset(root, ds.name);
  REQUIRE(back.graphs.size() == ds.graphs.size());
  CHECK(back.class_count == ds.class_count);
  for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
    CHECK(back.graphs[i].node_count == ds.graphs[i].node_count);
    CHECK(back.graphs[i].edges == ds.graphs[i].edges);
    CHECK(back.graphs[i].label == ds.graphs[i].label);
  }
}

TEST_CASE("the fixture dataset has disjoint degree profiles per class") {
  const GraphDataset ds = make_fixture_dataset();
  REQUIRE(ds.graphs.size() == 8);
  CHECK(ds.class_count == 2);
  int per_class[2] = {0, 0};
  for (const Graph& g : ds.graphs) {
    per_class[g.label]++;
    const auto neighbors = adjacency_lists(g);
    for (const auto& list : neighbors) {
      if (g.label == 0) {
        CHECK(list.size() == 2);  // cycles
      } else {
        CHECK((list.size() == 1 || list.size() >= 3));  // stars
      }
    }
  }
  CHECK(per_class[0] == 4);
  CHECK(per_class[1] == 4);
}

TEST_CASE("fixture generation is deterministic per seed") {
  const GraphDataset a = make_fixture_dataset(3);
  const GraphDataset b = make_fixture_dataset(3);
  REQUIRE(a.graphs.size() == b.graphs.size());
  for (std::size_t i = 0; i < a.graphs.size(); ++i) {
    CHECK(a.graphs[i].node_count == b.graphs[i].node_count);
    CHECK(a.graphs[i].edges == b.graphs[i].edges);
    CHECK(a.graphs[i].label == b.graphs[i].label);
  }
}
