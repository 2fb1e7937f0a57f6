#include "lcgnn/graph_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace lcgnn {

namespace fs = std::filesystem;

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto splitmix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return splitmix(splitmix(splitmix(a) ^ b) ^ c);
}

std::int64_t GraphDataset::feature_dim() const {
  if (graphs.empty() || graphs.front().features.numel() == 0) {
    return 0;
  }
  return graphs.front().features.cols();
}

std::vector<std::int32_t> GraphDataset::labels() const {
  std::vector<std::int32_t> out;
  out.reserve(graphs.size());
  for (const Graph& g : graphs) {
    out.push_back(g.label);
  }
  return out;
}

namespace {

std::vector<std::string> read_lines(const fs::path& path, bool required) {
  std::ifstream in(path);
  if (!in) {
    if (required) {
      throw std::runtime_error("parse_tu_dataset: missing required file " + path.string());
    }
    return {};
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    lines.push_back(line);
  }
  // drop trailing blank lines but keep interior ones so line numbers stay honest
  while (!lines.empty() && lines.back().find_first_not_of(" \t") == std::string::npos) {
    lines.pop_back();
  }
  return lines;
}

std::int64_t parse_int(const std::string& text, const fs::path& file, std::size_t line_no) {
  try {
    std::size_t pos = 0;
    const std::int64_t v = std::stoll(text, &pos);
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) {
      ++pos;
    }
    if (pos != text.size()) {
      throw std::invalid_argument("trailing characters");
    }
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("parse_tu_dataset: bad integer '" + text + "' in " + file.filename().string() +
                             " line " + std::to_string(line_no));
  }
}

std::pair<std::int64_t, std::int64_t> parse_edge_line(const std::string& line, const fs::path& file,
                                                      std::size_t line_no) {
  const std::size_t comma = line.find(',');
  if (comma == std::string::npos) {
    throw std::runtime_error("parse_tu_dataset: expected 'u, v' in " + file.filename().string() + " line " +
                             std::to_string(line_no));
  }
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  return {parse_int(trim(line.substr(0, comma)), file, line_no),
          parse_int(trim(line.substr(comma + 1)), file, line_no)};
}

}  // namespace

GraphDataset parse_tu_dataset(const fs::path& root, const std::string& name) {
  const fs::path dir = root / name;
  const fs::path adjacency_file = dir / (name + "_A.txt");
  const fs::path indicator_file = dir / (name + "_graph_indicator.txt");
  const fs::path graph_labels_file = dir / (name + "_graph_labels.txt");
  const fs::path node_labels_file = dir / (name + "_node_labels.txt");

  const auto adjacency_lines = read_lines(adjacency_file, true);
  const auto indicator_lines = read_lines(indicator_file, true);
  const auto graph_label_lines = read_lines(graph_labels_file, true);
  const auto node_label_lines = read_lines(node_labels_file, false);

  const std::int64_t graph_count = static_cast<std::int64_t>(graph_label_lines.size());
  const std::int64_t node_count = static_cast<std::int64_t>(indicator_lines.size());
  if (graph_count == 0) {
    throw std::runtime_error("parse_tu_dataset: " + graph_labels_file.string() + " is empty");
  }

  // node -> graph membership, and local index within that graph
  std::vector<std::int32_t> node_graph(static_cast<std::size_t>(node_count));
  std::vector<std::int32_t> node_local(static_cast<std::size_t>(node_count));
  std::vector<std::int32_t> graph_sizes(static_cast<std::size_t>(graph_count), 0);
  for (std::int64_t i = 0; i < node_count; ++i) {
    const std::int64_t gid = parse_int(indicator_lines[static_cast<std::size_t>(i)], indicator_file,
                                       static_cast<std::size_t>(i) + 1);
    if (gid < 1 || gid > graph_count) {
      throw std::runtime_error("parse_tu_dataset: graph indicator " + std::to_string(gid) + " on line " +
                               std::to_string(i + 1) + " does not match the " + std::to_string(graph_count) +
                               " labels in " + graph_labels_file.filename().string());
    }
    node_graph[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(gid - 1);
    node_local[static_cast<std::size_t>(i)] = graph_sizes[static_cast<std::size_t>(gid - 1)]++;
  }
  for (std::int64_t g = 0; g < graph_count; ++g) {
    if (graph_sizes[static_cast<std::size_t>(g)] == 0) {
      throw std::runtime_error("parse_tu_dataset: graph " + std::to_string(g + 1) + " has no nodes in " +
                               indicator_file.filename().string());
    }
  }

  // raw graph labels remapped to [0, C) in sorted order
  std::vector<std::int64_t> raw_labels(static_cast<std::size_t>(graph_count));
  std::set<std::int64_t> distinct_labels;
  for (std::int64_t g = 0; g < graph_count; ++g) {
    raw_labels[static_cast<std::size_t>(g)] =
        parse_int(graph_label_lines[static_cast<std::size_t>(g)], graph_labels_file, static_cast<std::size_t>(g) + 1);
    distinct_labels.insert(raw_labels[static_cast<std::size_t>(g)]);
  }
  std::map<std::int64_t, std::int32_t> label_map;
  for (std::int64_t raw : distinct_labels) {
    label_map.emplace(raw, static_cast<std::int32_t>(label_map.size()));
  }

  GraphDataset ds;
  ds.name = name;
  ds.class_count = static_cast<std::int32_t>(label_map.size());
  ds.graphs.resize(static_cast<std::size_t>(graph_count));
  for (std::int64_t g = 0; g < graph_count; ++g) {
    ds.graphs[static_cast<std::size_t>(g)].node_count = graph_sizes[static_cast<std::size_t>(g)];
    ds.graphs[static_cast<std::size_t>(g)].label = label_map.at(raw_labels[static_cast<std::size_t>(g)]);
  }

  std::vector<std::set<std::pair<std::int32_t, std::int32_t>>> edge_sets(static_cast<std::size_t>(graph_count));
  for (std::size_t ln = 0; ln < adjacency_lines.size(); ++ln) {
    if (adjacency_lines[ln].find_first_not_of(" \t") == std::string::npos) {
      continue;
    }
    const auto [u_raw, v_raw] = parse_edge_line(adjacency_lines[ln], adjacency_file, ln + 1);
    if (u_raw < 1 || u_raw > node_count || v_raw < 1 || v_raw > node_count) {
      throw std::runtime_error("parse_tu_dataset: node id out of range in " + adjacency_file.filename().string() +
                               " line " + std::to_string(ln + 1));
    }
    const std::int32_t gu = node_graph[static_cast<std::size_t>(u_raw - 1)];
    const std::int32_t gv = node_graph[static_cast<std::size_t>(v_raw - 1)];
    if (gu != gv) {
      throw std::runtime_error("parse_tu_dataset: edge crosses two graphs in " +
                               adjacency_file.filename().string() + " line " + std::to_string(ln + 1));
    }
    std::int32_t lu = node_local[static_cast<std::size_t>(u_raw - 1)];
    std::int32_t lv = node_local[static_cast<std::size_t>(v_raw - 1)];
    if (lu > lv) {
      std::swap(lu, lv);
    }
    edge_sets[static_cast<std::size_t>(gu)].emplace(lu, lv);
  }
  for (std::int64_t g = 0; g < graph_count; ++g) {
    auto& graph = ds.graphs[static_cast<std::size_t>(g)];
    graph.edges.assign(edge_sets[static_cast<std::size_t>(g)].begin(), edge_sets[static_cast<std::size_t>(g)].end());
  }

  if (!node_label_lines.empty()) {
    if (static_cast<std::int64_t>(node_label_lines.size()) != node_count) {
      throw std::runtime_error("parse_tu_dataset: " + node_labels_file.filename().string() + " has " +
                               std::to_string(node_label_lines.size()) + " lines but " +
                               indicator_file.filename().string() + " has " + std::to_string(node_count));
    }
    std::vector<std::int64_t> raw_node_labels(static_cast<std::size_t>(node_count));
    std::set<std::int64_t> distinct_node_labels;
    for (std::int64_t i = 0; i < node_count; ++i) {
      raw_node_labels[static_cast<std::size_t>(i)] = parse_int(node_label_lines[static_cast<std::size_t>(i)],
                                                               node_labels_file, static_cast<std::size_t>(i) + 1);
      distinct_node_labels.insert(raw_node_labels[static_cast<std::size_t>(i)]);
    }
    std::map<std::int64_t, std::int32_t> node_label_map;
    for (std::int64_t raw : distinct_node_labels) {
      node_label_map.emplace(raw, static_cast<std::int32_t>(node_label_map.size()));
    }
    const std::int64_t dim = static_cast<std::int64_t>(node_label_map.size());
    for (auto& graph : ds.graphs) {
      graph.features = Tensor(graph.node_count, dim, 0.0);
    }
    for (std::int64_t i = 0; i < node_count; ++i) {
      auto& graph = ds.graphs[static_cast<std::size_t>(node_graph[static_cast<std::size_t>(i)])];
      graph.features.at(node_local[static_cast<std::size_t>(i)],
                        node_label_map.at(raw_node_labels[static_cast<std::size_t>(i)])) = 1.0;
    }
    ds.feature_source = FeatureSource::kNodeLabels;
  } else {
    ds.feature_source = FeatureSource::kNone;
  }
  return ds;
}

void write_tu_dataset(const fs::path& root, const GraphDataset& dataset) {
  const fs::path dir = root / dataset.name;
  fs::create_directories(dir);
  const std::string& name = dataset.name;

  std::vector<std::int64_t> offsets;  // global 1-based id of each graph's node 0
  offsets.reserve(dataset.graphs.size());
  std::int64_t next = 1;
  for (const Graph& g : dataset.graphs) {
    offsets.push_back(next);
    next += g.node_count;
  }

  std::vector<std::pair<std::int64_t, std::int64_t>> directed;
  for (std::size_t gi = 0; gi < dataset.graphs.size(); ++gi) {
    const Graph& g = dataset.graphs[gi];
    for (const auto& [u, v] : g.edges) {
      const std::int64_t gu = offsets[gi] + u;
      const std::int64_t gv = offsets[gi] + v;
      directed.emplace_back(gu, gv);
      if (gu != gv) {
        directed.emplace_back(gv, gu);
      }
    }
  }
  std::sort(directed.begin(), directed.end());

  {
    std::ofstream out(dir / (name + "_A.txt"));
    for (const auto& [u, v] : directed) {
      out << u << ", " << v << "\n";
    }
  }
  {
    std::ofstream out(dir / (name + "_graph_indicator.txt"));
    for (std::size_t gi = 0; gi < dataset.graphs.size(); ++gi) {
      for (std::int32_t i = 0; i < dataset.graphs[gi].node_count; ++i) {
        out << (gi + 1) << "\n";
      }
    }
  }
  {
    std::ofstream out(dir / (name + "_graph_labels.txt"));
    for (const Graph& g : dataset.graphs) {
      out << g.label << "\n";
    }
  }
  if (dataset.feature_source == FeatureSource::kNodeLabels) {
    std::ofstream out(dir / (name + "_node_labels.txt"));
    for (const Graph& g : dataset.graphs) {
      for (std::int32_t i = 0; i < g.node_count; ++i) {
        std::int64_t best = 0;
        for (std::int64_t c = 1; c < g.features.cols(); ++c) {
          if (g.features.at(i, c) > g.features.at(i, best)) {
            best = c;
          }
        }
        out << best << "\n";
      }
    }
  }
}

std::vector<std::vector<std::int32_t>> adjacency_lists(const Graph& g) {
  std::vector<std::vector<std::int32_t>> neighbors(static_cast<std::size_t>(g.node_count));
  for (const auto& [u, v] : g.edges) {
    if (u < 0 || v >= g.node_count) {
      throw std::invalid_argument("adjacency_lists: edge endpoint out of range");
    }
    neighbors[static_cast<std::size_t>(u)].push_back(v);
    if (u != v) {
      neighbors[static_cast<std::size_t>(v)].push_back(u);
    }
  }
  for (auto& list : neighbors) {
    std::sort(list.begin(), list.end());
  }
  return neighbors;
}

GraphDataset degree_onehot_features(const GraphDataset& dataset) {
  if (dataset.feature_source != FeatureSource::kNone) {
    throw std::logic_error("degree_onehot_features: dataset already has node features");
  }
  std::int64_t max_degree = 0;
  std::vector<std::vector<std::int32_t>> degrees;
  degrees.reserve(dataset.graphs.size());
  for (const Graph& g : dataset.graphs) {
    const auto neighbors = adjacency_lists(g);
    std::vector<std::int32_t> d(neighbors.size());
    for (std::size_t i = 0; i < neighbors.size(); ++i) {
      d[i] = static_cast<std::int32_t>(neighbors[i].size());
      max_degree = std::max<std::int64_t>(max_degree, d[i]);
    }
    degrees.push_back(std::move(d));
  }

  GraphDataset out = dataset;
  const std::int64_t dim = max_degree + 1;
  for (std::size_t gi = 0; gi < out.graphs.size(); ++gi) {
    Graph& g = out.graphs[gi];
    g.features = Tensor(g.node_count, dim, 0.0);
    for (std::int32_t i = 0; i < g.node_count; ++i) {
      g.features.at(i, degrees[gi][static_cast<std::size_t>(i)]) = 1.0;
    }
  }
  out.feature_source = FeatureSource::kDegreeOneHot;
  return out;
}

std::vector<FoldSplit> stratified_kfold_split(const GraphDataset& dataset, std::int32_t k, std::uint64_t seed) {
  const std::int64_t n = static_cast<std::int64_t>(dataset.graphs.size());
  if (k < 2) {
    throw std::invalid_argument("stratified_kfold_split: need at least 2 folds");
  }
  if (k > n) {
    throw std::invalid_argument("stratified_kfold_split: " + std::to_string(k) + " folds exceed the " +
                                std::to_string(n) + " graphs available");
  }

  std::vector<std::vector<std::int32_t>> by_class(static_cast<std::size_t>(dataset.class_count));
  for (std::int64_t i = 0; i < n; ++i) {
    by_class[static_cast<std::size_t>(dataset.graphs[static_cast<std::size_t>(i)].label)].push_back(
        static_cast<std::int32_t>(i));
  }
  bool stratify = true;
  for (const auto& members : by_class) {
    if (static_cast<std::int32_t>(members.size()) < k) {
      stratify = false;
      break;
    }
  }

  std::mt19937_64 rng(mix_seed(seed, 0x73706c6974ULL));  // "split"
  std::vector<std::int32_t> fold_of(static_cast<std::size_t>(n));
  if (stratify) {
    // Per class, deal shuffled members round-robin; stagger the starting fold
    // by the running total so fold sizes stay within one of each other.
    std::int64_t cumulative = 0;
    for (auto& members : by_class) {
      std::shuffle(members.begin(), members.end(), rng);
      const std::int32_t offset = static_cast<std::int32_t>(cumulative % k);
      for (std::size_t j = 0; j < members.size(); ++j) {
        fold_of[static_cast<std::size_t>(members[j])] =
            static_cast<std::int32_t>((offset + static_cast<std::int64_t>(j)) % k);
      }
      cumulative += static_cast<std::int64_t>(members.size());
    }
  } else {
    std::cerr << "stratified_kfold_split: some class has fewer than " << k
              << " members; falling back to a plain shuffled split\n";
    std::vector<std::int32_t> order(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
      order[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(i);
    }
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t j = 0; j < order.size(); ++j) {
      fold_of[static_cast<std::size_t>(order[j])] = static_cast<std::int32_t>(j % static_cast<std::size_t>(k));
    }
  }

  std::vector<FoldSplit> splits(static_cast<std::size_t>(k));
  for (std::int32_t f = 0; f < k; ++f) {
    splits[static_cast<std::size_t>(f)].fold_index = f;
  }
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int32_t f = fold_of[static_cast<std::size_t>(i)];
    for (std::int32_t other = 0; other < k; ++other) {
      auto& split = splits[static_cast<std::size_t>(other)];
      if (other == f) {
        split.test_indices.push_back(static_cast<std::int32_t>(i));
      } else {
        split.train_indices.push_back(static_cast<std::int32_t>(i));
      }
    }
  }
  return splits;
}

std::vector<std::int32_t> subsample_training_set(const std::vector<std::int32_t>& train_indices,
                                                 std::span<const std::int32_t> labels_by_graph, double ratio,
                                                 std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw std::invalid_argument("subsample_training_set: ratio must lie in (0, 1], got " + std::to_string(ratio));
  }
  if (ratio == 1.0) {
    return train_indices;
  }
  std::int32_t max_label = 0;
  for (std::int32_t idx : train_indices) {
    max_label = std::max(max_label, labels_by_graph[static_cast<std::size_t>(idx)]);
  }
  // positions into train_indices, grouped per class
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(max_label) + 1);
  for (std::size_t pos = 0; pos < train_indices.size(); ++pos) {
    by_class[static_cast<std::size_t>(labels_by_graph[static_cast<std::size_t>(train_indices[pos])])].push_back(pos);
  }
  std::mt19937_64 rng(mix_seed(seed, 0x737562ULL));  // "sub"
  std::vector<bool> keep(train_indices.size(), false);
  for (auto& positions : by_class) {
    if (positions.empty()) {
      continue;
    }
    const std::size_t quota =
        static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(positions.size())));
    std::shuffle(positions.begin(), positions.end(), rng);
    for (std::size_t j = 0; j < quota; ++j) {
      keep[positions[j]] = true;
    }
  }
  std::vector<std::int32_t> out;
  for (std::size_t pos = 0; pos < train_indices.size(); ++pos) {
    if (keep[pos]) {
      out.push_back(train_indices[pos]);
    }
  }
  return out;
}

std::vector<std::vector<std::int32_t>> make_minibatches(const std::vector<std::int32_t>& indices,
                                                        std::int64_t batch_size, std::uint64_t seed,
                                                        std::int64_t epoch) {
  if (indices.empty()) {
    throw std::invalid_argument("make_minibatches: empty index list");
  }
  if (batch_size < 1) {
    throw std::invalid_argument("make_minibatches: batch size must be at least 1");
  }
  std::vector<std::int32_t> shuffled = indices;
  std::mt19937_64 rng(mix_seed(seed, 0x6570ULL, static_cast<std::uint64_t>(epoch)));
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  std::vector<std::vector<std::int32_t>> batches;
  for (std::size_t start = 0; start < shuffled.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t stop = std::min(shuffled.size(), start + static_cast<std::size_t>(batch_size));
    batches.emplace_back(shuffled.begin() + static_cast<std::ptrdiff_t>(start),
                         shuffled.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return batches;
}

GraphDataset make_fixture_dataset(std::uint64_t seed) {
  auto cycle = [](std::int32_t n) {
    Graph g;
    g.node_count = n;
    for (std::int32_t i = 0; i < n; ++i) {
      const std::int32_t j = (i + 1) % n;
      g.edges.emplace_back(std::min(i, j), std::max(i, j));
    }
    std::sort(g.edges.begin(), g.edges.end());
    g.label = 0;
    return g;
  };
  auto star = [](std::int32_t leaves) {
    Graph g;
    g.node_count = leaves + 1;
    for (std::int32_t i = 1; i <= leaves; ++i) {
      g.edges.emplace_back(0, i);
    }
    g.label = 1;
    return g;
  };

  GraphDataset ds;
  ds.name = "FIXTURE";
  ds.class_count = 2;
  ds.feature_source = FeatureSource::kNone;
  ds.graphs = {cycle(4), star(3), cycle(5), star(4), cycle(6), star(5), cycle(7), star(6)};
  std::mt19937_64 rng(mix_seed(seed, 0x66697874ULL));  // "fixt"
  std::shuffle(ds.graphs.begin(), ds.graphs.end(), rng);
  return ds;
}

}  // namespace lcgnn
