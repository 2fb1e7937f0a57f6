#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "lcgnn/bank.hpp"
#include "lcgnn/gin.hpp"
#include "lcgnn/graph_data.hpp"
#include "lcgnn/objective.hpp"

namespace lcgnn {

enum class LossMode { kLabelContrastive, kInfoNce, kNone };

LossMode parse_loss_mode(const std::string& text);
std::string to_string(LossMode mode);

struct TrainingConfig {
  double beta = 0.5;
  double alpha = 0.9;
  double tau = 0.07;
  double lr = 0.01;
  std::int64_t batch_size = 32;
  double dropout = 0.5;
  std::int64_t epochs = 300;
  std::int64_t hidden_dim = 64;
  std::int64_t num_layers = 3;
  std::int32_t folds = 10;
  std::uint64_t seed = 1;
  LossMode mode = LossMode::kLabelContrastive;
  std::int32_t workers = 0;  // 0 = hardware concurrency

  void validate() const;
  // Mode none trains on the classification loss alone; the contrastive term
  // still runs (bank writes, metrics) but enters the total with weight 0.
  double effective_beta() const { return mode == LossMode::kNone ? 0.0 : beta; }
};

struct EpochMetrics {
  std::int64_t epoch = 0;
  double cls_loss = 0.0;
  double lc_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
};

struct FoldOutcome {
  std::int32_t fold_index = 0;
  std::vector<EpochMetrics> epochs;
};

struct CVResult {
  std::vector<double> fold_accuracies;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  std::int64_t selected_epoch = -1;
  double final_train_cls_loss_mean = 0.0;
  TrainingConfig config;
};

struct CrossValidationOutcome {
  CVResult result;
  std::vector<FoldOutcome> folds;
};

// Mutable per-fold training context: the two encoders, the classifier, and
// the bank. Bank slot s always belongs to graph train_indices[s].
struct TrainState {
  GinEncoderParams query_encoder;
  GinEncoderParams key_encoder;
  ClassifierParams classifier;
  MemoryBank bank;
  std::vector<std::int32_t> train_indices;
  std::uint64_t run_seed = 0;

  // Parameters the optimizer may touch: the query encoder and the classifier.
  // Key-encoder weights are updated only through momentum_update.
  std::vector<Parameter*> optimizer_registry();
};

TrainState init_train_state(const GraphDataset& dataset, std::span<const std::int32_t> train_indices,
                            const TrainingConfig& config, std::int32_t fold_index);

// One pass over the training split: per minibatch the key encoder refreshes
// the bank slots, the query encoder and classifier take a gradient step, and
// the key encoder follows by momentum.
EpochMetrics train_epoch(TrainState& state, const GraphDataset& dataset,
                         std::span<const std::int32_t> test_indices, const TrainingConfig& config,
                         std::int64_t epoch);

double evaluate_accuracy(const GinEncoderParams& encoder, const ClassifierParams& classifier,
                         const GraphDataset& dataset, std::span<const std::int32_t> indices);

FoldOutcome run_fold(const GraphDataset& dataset, const FoldSplit& fold, const TrainingConfig& config);

CrossValidationOutcome run_cross_validation(const GraphDataset& dataset, const TrainingConfig& config);

// Same folds and seeds as run_cross_validation, but with per-fold training
// indices reduced to the given splits (used by the less-data harness).
CrossValidationOutcome run_splits(const GraphDataset& dataset, std::span<const FoldSplit> splits,
                                  const TrainingConfig& config);

struct LessDataRow {
  std::string method;
  double ratio = 1.0;
  CVResult result;
};

struct LessDataReport {
  std::vector<LessDataRow> rows;
};

// Runs the configured mode and the mode-none baseline across the given
// training ratios; the test folds stay untouched. Ratio 1.0 reproduces the
// plain cross-validation run exactly.
LessDataReport run_less_data_experiment(const GraphDataset& dataset, const TrainingConfig& config,
                                        std::span<const double> ratios);

enum class AblationAxis { kBeta, kMomentum, kLossMode };

AblationAxis parse_ablation_axis(const std::string& text);

struct SweepRow {
  std::string value;
  CVResult result;
};

std::vector<SweepRow> run_ablation(const GraphDataset& dataset, const TrainingConfig& config, AblationAxis axis,
                                   std::span<const std::string> values);

// --- reporting -----------------------------------------------------------

void write_epoch_csv(std::ostream& out, std::span<const EpochMetrics> metrics);
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);
void write_less_data_csv(std::ostream& out, const LessDataReport& report);

std::string config_json(const TrainingConfig& config);
std::string cv_summary_json(const CrossValidationOutcome& outcome);
std::string ablation_summary_json(const std::string& axis, std::span<const SweepRow> rows);
std::string less_data_summary_json(const LessDataReport& report);

}  // namespace lcgnn
