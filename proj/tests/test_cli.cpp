#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lcgnn/cli.hpp"
#include "lcgnn/graph_data.hpp"

namespace fs = std::filesystem;

namespace {

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv = {"lcgnn"};
  for (const std::string& a : args) {
    argv.push_back(a.c_str());
  }
  return lcgnn::cli::run(static_cast<int>(argv.size()), argv.data());
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "lcgnn_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::vector<std::string> kFastFlags = {"--folds", "2",  "--epochs", "3", "--hidden", "8",
                                             "--layers", "2", "--dropout", "0", "--workers", "1"};

std::vector<std::string> with_fast(std::vector<std::string> args) {
  args.insert(args.end(), kFastFlags.begin(), kFastFlags.end());
  return args;
}

}  // namespace

TEST_CASE("fixture generation round-trips and is byte-stable per seed") {
  const fs::path a = fresh_dir("fixture_a");
  const fs::path b = fresh_dir("fixture_b");
  CHECK(run_cli({"fixture", "--out", a.string(), "--seed", "5"}) == 0);
  CHECK(run_cli({"fixture", "--out", b.string(), "--seed", "5"}) == 0);
  for (const char* file : {"FIXTURE_A.txt", "FIXTURE_graph_indicator.txt", "FIXTURE_graph_labels.txt"}) {
    CHECK(slurp(a / "FIXTURE" / file) == slurp(b / "FIXTURE" / file));
  }
  const lcgnn::GraphDataset ds = lcgnn::parse_tu_dataset(a, "FIXTURE");
  CHECK(ds.graphs.size() == 8);
  CHECK(ds.class_count == 2);

  const fs::path c = fresh_dir("fixture_c");
  CHECK(run_cli({"fixture", "--out", c.string(), "--seed", "6"}) == 0);
  CHECK(slurp(a / "FIXTURE" / "FIXTURE_A.txt") != slurp(c / "FIXTURE" / "FIXTURE_A.txt"));
}

TEST_CASE("cv writes manifest, per-fold CSVs and a summary") {
  const fs::path data = fresh_dir("cv_data");
  REQUIRE(run_cli({"fixture", "--out", data.string()}) == 0);
  const fs::path out = fresh_dir("cv_out");
  const int status = run_cli(with_fast(
      {"cv", "--dataset", "FIXTURE", "--data-dir", data.string(), "--out", out.string(), "--seed", "3"}));
  CHECK(status == 0);
  CHECK(fs::exists(out / "manifest.json"));
  CHECK(fs::exists(out / "fold_0.csv"));
  CHECK(fs::exists(out / "fold_1.csv"));
  CHECK(fs::exists(out / "summary.json"));

  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["command"] == "cv");
  CHECK(manifest["dataset"] == "FIXTURE");
  CHECK(manifest["config"]["folds"] == 2);
  CHECK(manifest.contains("timestamp"));

  const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  CHECK(summary["fold_accuracies"].size() == 2);

  std::istringstream csv(slurp(out / "fold_0.csv"));
  std::string header;
  std::getline(csv, header);
  CHECK(header == "epoch,cls_loss,lc_loss,train_acc,test_acc");
  int rows = 0;
  for (std::string line; std::getline(csv, line);) {
    rows += line.empty() ? 0 : 1;
  }
  CHECK(rows == 3);
}

TEST_CASE("a negative beta is rejected before any work happens") {
  const fs::path data = fresh_dir("beta_data");
  REQUIRE(run_cli({"fixture", "--out", data.string()}) == 0);
  const fs::path out = fresh_dir("beta_out");
  fs::remove_all(out);
  const int status = run_cli({"cv", "--dataset", "FIXTURE", "--data-dir", data.string(), "--out", out.string(),
                              "--beta", "-1"});
  CHECK(status != 0);
  CHECK(!fs::exists(out / "manifest.json"));
}

TEST_CASE("mode none and beta zero give identical summary accuracies") {
  const fs::path data = fresh_dir("none_data");
  REQUIRE(run_cli({"fixture", "--out", data.string()}) == 0);
  const fs::path out_none = fresh_dir("none_out");
  const fs::path out_zero = fresh_dir("zero_out");
  REQUIRE(run_cli(with_fast({"cv", "--dataset", "FIXTURE", "--data-dir", data.string(), "--out",
                             out_none.string(), "--mode", "none", "--seed", "4"})) == 0);
  REQUIRE(run_cli(with_fast({"cv", "--dataset", "FIXTURE", "--data-dir", data.string(), "--out",
                             out_zero.string(), "--beta", "0", "--seed", "4"})) == 0);
  const auto a = nlohmann::json::parse(slurp(out_none / "summary.json"));
  const auto b = nlohmann::json::parse(slurp(out_zero / "summary.json"));
  CHECK(a["fold_accuracies"] == b["fold_accuracies"]);
  CHECK(a["mean_accuracy"] == b["mean_accuracy"]);
  CHECK(a["final_train_cls_loss_mean"] == b["final_train_cls_loss_mean"]);
}

TEST_CASE("a missing dataset directory fails with a nonzero status") {
  const fs::path out = fresh_dir("missing_out");
  const int status = run_cli({"cv", "--dataset", "NOPE", "--data-dir", "/nonexistent", "--out", out.string()});
  CHECK(status != 0);
}

TEST_CASE("unknown flags and axes are usage errors") {
  CHECK(run_cli({"cv", "--no-such-flag"}) != 0);
  const fs::path data = fresh_dir("axis_data");
  REQUIRE(run_cli({"fixture", "--out", data.string()}) == 0);
  CHECK(run_cli({"ablate", "--dataset", "FIXTURE", "--data-dir", data.string(), "--axis", "bogus"}) != 0);
  CHECK(run_cli(with_fast({"ablate", "--dataset", "FIXTURE", "--data-dir", data.string(), "--axis", "beta",
                           "--values", ","})) != 0);
}

TEST_CASE("the beta ablation writes one row per sweep point") {
  const fs::path data = fresh_dir("ablate_data");
  REQUIRE(run_cli({"fixture", "--out", data.string()}) == 0);
  const fs::path out = fresh_dir("ablate_out");
  const int status = run_cli(with_fast({"ablate", "--dataset", "FIXTURE", "--data-dir", data.string(), "--out",
                                        out.string(), "--axis", "beta", "--values", "0.3,0.5"}));
  CHECK(status == 0);
  const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  CHECK(summary["axis"] == "beta");
  REQUIRE(summary["rows"].size() == 2);
  CHECK(summary["rows"][0]["value"] == "0.3");
  CHECK(fs::exists(out / "sweep.csv"));
}

TEST_CASE("the train-ratio ablation emits the methods-by-ratios grid") {
  const fs::path data = fresh_dir("ratio_data");
  REQUIRE(run_cli({"fixture", "--out", data.string()}) == 0);
  const fs::path out = fresh_dir("ratio_out");
  const int status = run_cli(with_fast({"ablate", "--dataset", "FIXTURE", "--data-dir", data.string(), "--out",
                                        out.string(), "--axis", "train-ratio", "--ratios", "0.6,1.0"}));
  CHECK(status == 0);
  const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  CHECK(summary["axis"] == "train-ratio");
  REQUIRE(summary["rows"].size() == 4);  // 2 methods x 2 ratios
  std::set<std::string> methods;
  for (const auto& row : summary["rows"]) {
    methods.insert(row["method"].get<std::string>());
  }
  CHECK(methods == std::set<std::string>{"label-contrastive", "none"});
}

TEST_CASE("LCGNN_DATA_DIR provides the data directory default") {
  const fs::path data = fresh_dir("env_data");
  REQUIRE(run_cli({"fixture", "--out", data.string()}) == 0);
  setenv("LCGNN_DATA_DIR", data.string().c_str(), 1);
  const fs::path out = fresh_dir("env_out");
  const int status =
      run_cli(with_fast({"cv", "--dataset", "FIXTURE", "--out", out.string(), "--seed", "2"}));
  unsetenv("LCGNN_DATA_DIR");
  CHECK(status == 0);
  CHECK(fs::exists(out / "summary.json"));
}
