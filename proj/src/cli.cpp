#include "lcgnn/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lcgnn/graph_data.hpp"
#include "lcgnn/trainer.hpp"

namespace lcgnn::cli {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) {
      continue;
    }
    const auto e = item.find_last_not_of(" \t");
    out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& text, const char* flag) {
  std::vector<double> out;
  for (const std::string& item : split_list(text)) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string(flag) + ": '" + item + "' is not a number");
    }
  }
  if (out.empty()) {
    throw std::invalid_argument(std::string(flag) + ": empty value list");
  }
  return out;
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << contents;
}

struct CommonArgs {
  std::string dataset;
  std::string data_dir = "./data";
  std::string out_dir = "./runs";
  TrainingConfig config;
};

void add_config_options(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--dataset", args.dataset, "dataset name (directory under --data-dir)")->required();
  cmd->add_option("--data-dir", args.data_dir, "directory holding <name>/<name>_*.txt files")
      ->envname("LCGNN_DATA_DIR");
  cmd->add_option("--out", args.out_dir, "output directory for manifest, CSVs and summary");
  cmd->add_option("--beta", args.config.beta, "contrastive loss weight (sweep range 0.3-1.0; 0 disables)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--alpha", args.config.alpha, "key-encoder momentum in [0,1)")
      ->check(CLI::Range(0.0, 1.0).description("[0,1)"));
  cmd->add_option("--tau", args.config.tau, "contrastive temperature (default 0.07)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--lr", args.config.lr, "Adam learning rate (protocol grid: 0.01/0.001)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--batch", args.config.batch_size, "minibatch size (protocol grid: 32/128/512)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--dropout", args.config.dropout, "dropout rate before the classifier (grid: 0.0/0.5)")
      ->check(CLI::Range(0.0, 1.0).description("[0,1)"));
  cmd->add_option("--epochs", args.config.epochs, "training epochs per fold")->check(CLI::PositiveNumber);
  cmd->add_option("--hidden", args.config.hidden_dim, "hidden representation width (default 64)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--layers", args.config.num_layers, "message-passing layers (default 3)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--folds", args.config.folds, "cross-validation folds (default 10)")
      ->check(CLI::Range(2, 1 << 20));
  cmd->add_option("--seed", args.config.seed, "master seed; fixes splits, inits and shuffles");
  cmd->add_option_function<std::string>(
         "--mode", [&args](const std::string& v) { args.config.mode = parse_loss_mode(v); },
         "contrastive term: label-contrastive, infonce or none")
      ->check(CLI::IsMember({"label-contrastive", "infonce", "none"}));
  cmd->add_option("--workers", args.config.workers, "parallel fold workers (0 = all cores)")
      ->check(CLI::NonNegativeNumber);
}

GraphDataset load_dataset(const CommonArgs& args) {
  GraphDataset ds = parse_tu_dataset(args.data_dir, args.dataset);
  if (ds.feature_source == FeatureSource::kNone) {
    ds = degree_onehot_features(ds);
  }
  return ds;
}

ordered_json manifest_json(const std::string& command, const CommonArgs& args) {
  ordered_json m;
  m["command"] = command;
  m["dataset"] = args.dataset;
  m["data_dir"] = args.data_dir;
  m["out_dir"] = args.out_dir;
  m["timestamp"] = utc_timestamp();
  m["seed"] = args.config.seed;
  m["config"] = ordered_json::parse(config_json(args.config));
  return m;
}

void print_result(const CVResult& r, const std::string& tag) {
  std::cout << tag << ": mean accuracy " << r.mean_accuracy << " +/- " << r.std_accuracy << " (epoch "
            << r.selected_epoch << ", folds:";
  for (double acc : r.fold_accuracies) {
    std::cout << ' ' << acc;
  }
  std::cout << ")\n";
}

int cmd_cv(const CommonArgs& args) {
  args.config.validate();
  const GraphDataset ds = load_dataset(args);
  fs::create_directories(args.out_dir);
  write_file(fs::path(args.out_dir) / "manifest.json", manifest_json("cv", args).dump(2) + "\n");

  const CrossValidationOutcome outcome = run_cross_validation(ds, args.config);
  for (const FoldOutcome& fold : outcome.folds) {
    std::ofstream csv(fs::path(args.out_dir) / ("fold_" + std::to_string(fold.fold_index) + ".csv"));
    write_epoch_csv(csv, fold.epochs);
  }
  write_file(fs::path(args.out_dir) / "summary.json", cv_summary_json(outcome));
  print_result(outcome.result, ds.name);
  std::cout << "artifacts in " << args.out_dir << "\n";
  return 0;
}

int cmd_ablate(const CommonArgs& args, const std::string& axis, const std::string& values_flag,
               const std::string& ratios_flag) {
  args.config.validate();
  const GraphDataset ds = load_dataset(args);

  if (axis == "train-ratio") {
    std::string source = !ratios_flag.empty() ? ratios_flag : values_flag;
    if (source.empty()) {
      source = "0.6,0.7,0.8,0.9,1.0";
    }
    const std::vector<double> ratios = parse_double_list(source, "--ratios");
    fs::create_directories(args.out_dir);
    write_file(fs::path(args.out_dir) / "manifest.json", manifest_json("ablate:train-ratio", args).dump(2) + "\n");
    const LessDataReport report = run_less_data_experiment(ds, args.config, ratios);
    std::ofstream csv(fs::path(args.out_dir) / "sweep.csv");
    write_less_data_csv(csv, report);
    write_file(fs::path(args.out_dir) / "summary.json", less_data_summary_json(report));
    for (const LessDataRow& row : report.rows) {
      print_result(row.result, row.method + " @ ratio " + std::to_string(row.ratio));
    }
    std::cout << "artifacts in " << args.out_dir << "\n";
    return 0;
  }

  const AblationAxis parsed_axis = parse_ablation_axis(axis);
  std::string source = values_flag;
  if (source.empty()) {
    switch (parsed_axis) {
      case AblationAxis::kBeta: source = "0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0"; break;
      case AblationAxis::kMomentum: source = "0.0,0.3,0.5,0.7,0.9,0.99"; break;
      case AblationAxis::kLossMode: source = "label-contrastive,infonce,none"; break;
    }
  }
  std::vector<std::string> values = split_list(source);
  if (values.empty()) {
    throw std::invalid_argument("--values: empty value list");
  }
  if (parsed_axis != AblationAxis::kLossMode) {
    parse_double_list(source, "--values");  // numeric validation up front
  }

  fs::create_directories(args.out_dir);
  write_file(fs::path(args.out_dir) / "manifest.json", manifest_json("ablate:" + axis, args).dump(2) + "\n");
  const std::vector<SweepRow> rows = run_ablation(ds, args.config, parsed_axis, values);
  std::ofstream csv(fs::path(args.out_dir) / "sweep.csv");
  write_sweep_csv(csv, rows);
  write_file(fs::path(args.out_dir) / "summary.json", ablation_summary_json(axis, rows));
  for (const SweepRow& row : rows) {
    print_result(row.result, axis + " = " + row.value);
  }
  std::cout << "artifacts in " << args.out_dir << "\n";
  return 0;
}

int cmd_fixture(const std::string& out_dir, const std::string& name, std::uint64_t seed) {
  GraphDataset ds = make_fixture_dataset(seed);
  ds.name = name;
  write_tu_dataset(out_dir, ds);
  std::cout << "wrote " << ds.graphs.size() << "-graph fixture to " << (fs::path(out_dir) / name).string() << "\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"label-contrastive graph classification trainer"};
  app.require_subcommand(1);

  CommonArgs cv_args;
  CLI::App* cv = app.add_subcommand("cv", "k-fold cross-validation on one dataset");
  add_config_options(cv, cv_args);

  CommonArgs ablate_args;
  std::string axis;
  std::string values_flag;
  std::string ratios_flag;
  CLI::App* ablate = app.add_subcommand("ablate", "sweep one axis and report accuracy per point");
  add_config_options(ablate, ablate_args);
  ablate->add_option("--axis", axis, "sweep axis: beta, momentum, loss-mode or train-ratio")
      ->required()
      ->check(CLI::IsMember({"beta", "momentum", "loss-mode", "train-ratio"}));
  ablate->add_option("--values", values_flag, "comma-separated sweep points (axis-specific default)");
  ablate->add_option("--ratios", ratios_flag, "comma-separated training ratios (train-ratio axis)");

  std::string fixture_out;
  std::string fixture_name = "FIXTURE";
  std::uint64_t fixture_seed = 1;
  CLI::App* fixture = app.add_subcommand("fixture", "write the synthetic 8-graph benchmark");
  fixture->add_option("--out", fixture_out, "directory to place the dataset folder in")->required();
  fixture->add_option("--name", fixture_name, "dataset name (default FIXTURE)");
  fixture->add_option("--seed", fixture_seed, "permutation seed for graph order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (cv->parsed()) {
      return cmd_cv(cv_args);
    }
    if (ablate->parsed()) {
      return cmd_ablate(ablate_args, axis, values_flag, ratios_flag);
    }
    if (fixture->parsed()) {
      return cmd_fixture(fixture_out, fixture_name, fixture_seed);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace lcgnn::cli
