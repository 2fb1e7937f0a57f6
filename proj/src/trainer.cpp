#include "lcgnn/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace lcgnn {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double mean_of(std::span<const double> xs) {
  double acc = 0.0;
  for (double x : xs) {
    acc += x;
  }
  return acc / static_cast<double>(xs.size());
}

double population_std(std::span<const double> xs, double mean) {
  double acc = 0.0;
  for (double x : xs) {
    acc += (x - mean) * (x - mean);
  }
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

CVResult aggregate_folds(const std::vector<FoldOutcome>& folds, const TrainingConfig& config) {
  if (folds.empty()) {
    throw std::logic_error("aggregate_folds: no folds");
  }
  const std::size_t epochs = folds.front().epochs.size();
  for (const FoldOutcome& f : folds) {
    if (f.epochs.size() != epochs) {
      throw std::logic_error("aggregate_folds: folds ran different epoch counts");
    }
  }
  // The reported epoch is the one maximizing mean test accuracy across folds
  // (first such epoch on ties); the per-fold accuracies are read off there.
  std::size_t best_epoch = 0;
  double best_mean = -1.0;
  for (std::size_t e = 0; e < epochs; ++e) {
    double acc = 0.0;
    for (const FoldOutcome& f : folds) {
      acc += f.epochs[e].test_acc;
    }
    acc /= static_cast<double>(folds.size());
    if (acc > best_mean) {
      best_mean = acc;
      best_epoch = e;
    }
  }

  CVResult result;
  result.config = config;
  result.selected_epoch = static_cast<std::int64_t>(best_epoch);
  for (const FoldOutcome& f : folds) {
    result.fold_accuracies.push_back(f.epochs[best_epoch].test_acc);
  }
  result.mean_accuracy = mean_of(result.fold_accuracies);
  result.std_accuracy = population_std(result.fold_accuracies, result.mean_accuracy);
  double final_cls = 0.0;
  for (const FoldOutcome& f : folds) {
    final_cls += f.epochs.back().cls_loss;
  }
  result.final_train_cls_loss_mean = final_cls / static_cast<double>(folds.size());
  return result;
}

}  // namespace

LossMode parse_loss_mode(const std::string& text) {
  if (text == "label-contrastive") {
    return LossMode::kLabelContrastive;
  }
  if (text == "infonce") {
    return LossMode::kInfoNce;
  }
  if (text == "none") {
    return LossMode::kNone;
  }
  throw std::invalid_argument("unknown loss mode '" + text + "' (expected label-contrastive, infonce or none)");
}

std::string to_string(LossMode mode) {
  switch (mode) {
    case LossMode::kLabelContrastive: return "label-contrastive";
    case LossMode::kInfoNce: return "infonce";
    case LossMode::kNone: return "none";
  }
  return "unknown";
}

void TrainingConfig::validate() const {
  if (beta < 0.0) {
    throw std::invalid_argument("config: beta must be nonnegative, got " + std::to_string(beta));
  }
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("config: alpha must lie in [0, 1), got " + std::to_string(alpha));
  }
  if (!(tau > 0.0)) {
    throw std::invalid_argument("config: tau must be positive, got " + std::to_string(tau));
  }
  if (lr < 0.0) {
    throw std::invalid_argument("config: learning rate must be nonnegative, got " + std::to_string(lr));
  }
  if (batch_size < 1) {
    throw std::invalid_argument("config: batch size must be at least 1");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw std::invalid_argument("config: dropout must lie in [0, 1), got " + std::to_string(dropout));
  }
  if (epochs < 1) {
    throw std::invalid_argument("config: epochs must be at least 1");
  }
  if (hidden_dim < 1 || num_layers < 1) {
    throw std::invalid_argument("config: hidden dim and layer count must be positive");
  }
  if (folds < 2) {
    throw std::invalid_argument("config: need at least 2 folds");
  }
  if (workers < 0) {
    throw std::invalid_argument("config: workers must be nonnegative");
  }
}

std::vector<Parameter*> TrainState::optimizer_registry() {
  std::vector<Parameter*> registry = query_encoder.parameters();
  for (Parameter* p : classifier.parameters()) {
    registry.push_back(p);
  }
  return registry;
}

TrainState init_train_state(const GraphDataset& dataset, std::span<const std::int32_t> train_indices,
                            const TrainingConfig& config, std::int32_t fold_index) {
  if (train_indices.empty()) {
    throw std::invalid_argument("init_train_state: empty training split");
  }
  const std::int64_t input_dim = dataset.feature_dim();
  if (input_dim == 0) {
    throw std::invalid_argument("init_train_state: dataset has no node features attached");
  }
  const std::uint64_t fold_seed = mix_seed(config.seed, 0x666f6c64ULL, static_cast<std::uint64_t>(fold_index));

  TrainState state;
  auto [query, key] =
      init_encoders(input_dim, config.hidden_dim, config.num_layers, mix_seed(fold_seed, 1));
  state.query_encoder = std::move(query);
  state.key_encoder = std::move(key);
  state.classifier =
      init_classifier(state.query_encoder.readout_dim(), dataset.class_count, mix_seed(fold_seed, 2));
  state.train_indices.assign(train_indices.begin(), train_indices.end());

  std::vector<std::int32_t> bank_labels;
  bank_labels.reserve(train_indices.size());
  for (std::int32_t idx : train_indices) {
    bank_labels.push_back(dataset.graphs[static_cast<std::size_t>(idx)].label);
  }
  state.bank = init_memory_bank(bank_labels, state.query_encoder.readout_dim(), mix_seed(fold_seed, 3));
  state.run_seed = mix_seed(fold_seed, 4);
  return state;
}

double evaluate_accuracy(const GinEncoderParams& encoder, const ClassifierParams& classifier,
                         const GraphDataset& dataset, std::span<const std::int32_t> indices) {
  if (indices.empty()) {
    throw std::invalid_argument("evaluate_accuracy: empty index list");
  }
  std::int64_t correct = 0;
  for (std::int32_t idx : indices) {
    const Graph& g = dataset.graphs[static_cast<std::size_t>(idx)];
    const Tensor rep = encode_graph_value(encoder, g);
    if (predict_class(classifier, rep) == g.label) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(indices.size());
}

EpochMetrics train_epoch(TrainState& state, const GraphDataset& dataset,
                         std::span<const std::int32_t> test_indices, const TrainingConfig& config,
                         std::int64_t epoch) {
  if (state.bank.size() != static_cast<std::int64_t>(state.train_indices.size())) {
    throw std::logic_error("train_epoch: bank capacity does not match the training split");
  }
  auto registry = state.optimizer_registry();
  for (const Parameter* key_param : state.key_encoder.parameters()) {
    for (const Parameter* reg : registry) {
      if (reg == key_param) {
        throw std::logic_error("train_epoch: key-encoder parameter found in the optimizer registry");
      }
    }
  }

  // Batches are drawn over bank slots; slot s maps to graph train_indices[s].
  std::vector<std::int32_t> slots(state.train_indices.size());
  for (std::size_t s = 0; s < slots.size(); ++s) {
    slots[s] = static_cast<std::int32_t>(s);
  }
  const auto batches = make_minibatches(slots, config.batch_size, state.run_seed, epoch);

  double cls_sum = 0.0;
  double lc_sum = 0.0;
  for (std::size_t batch_idx = 0; batch_idx < batches.size(); ++batch_idx) {
    const auto& batch = batches[batch_idx];

    // Key graphs are encoded and written into the dictionary before the
    // queries contrast against it.
    std::vector<Tensor> keys;
    keys.reserve(batch.size());
    for (std::int32_t slot : batch) {
      keys.push_back(encode_graph_value(
          state.key_encoder, dataset.graphs[static_cast<std::size_t>(state.train_indices[static_cast<std::size_t>(slot)])]));
    }
    replace_bank_entries(state.bank, batch, keys, epoch);

    Tape tape(mix_seed(state.run_seed, static_cast<std::uint64_t>(epoch) + 1, batch_idx + 1));
    std::vector<ValueId> queries;
    std::vector<ValueId> nlls;
    std::vector<std::int32_t> labels;
    std::vector<std::int64_t> positive_slots;
    queries.reserve(batch.size());
    for (std::int32_t slot : batch) {
      const Graph& g =
          dataset.graphs[static_cast<std::size_t>(state.train_indices[static_cast<std::size_t>(slot)])];
      const ValueId rep = encode_graph(tape, state.query_encoder, g, true);
      queries.push_back(rep);
      labels.push_back(g.label);
      positive_slots.push_back(slot);
      const ValueId lsm = classifier_log_probs(tape, state.classifier, rep, config.dropout, true);
      nlls.push_back(nll_loss(tape, lsm, g.label));
    }

    const ValueId cls = mean_scalar(tape, nlls);
    const ValueId lc = config.mode == LossMode::kInfoNce
                           ? infonce_loss_batch(tape, queries, positive_slots, state.bank, config.tau)
                           : label_contrastive_loss_batch(tape, queries, labels, state.bank, config.tau);
    const ValueId total = mixed_loss(tape, cls, lc, config.effective_beta());

    const double cls_val = tape.scalar(cls);
    const double lc_val = tape.scalar(lc);
    if (!std::isfinite(tape.scalar(total))) {
      throw std::runtime_error("train_epoch: non-finite loss at batch " + std::to_string(batch_idx) +
                               " (cls=" + fmt_double(cls_val) + ", lc=" + fmt_double(lc_val) + ")");
    }

    if (config.lr > 0.0) {
      tape.backward(total);
      AdamOptions opts;
      opts.lr = config.lr;
      adam_step(registry, opts);
      for (Parameter* p : registry) {
        p->zero_grad();
      }
    }
    momentum_update(state.key_encoder, state.query_encoder, config.alpha);

    cls_sum += cls_val;
    lc_sum += lc_val;
  }

  EpochMetrics metrics;
  metrics.epoch = epoch;
  metrics.cls_loss = cls_sum / static_cast<double>(batches.size());
  metrics.lc_loss = lc_sum / static_cast<double>(batches.size());
  metrics.train_acc = evaluate_accuracy(state.query_encoder, state.classifier, dataset, state.train_indices);
  metrics.test_acc = evaluate_accuracy(state.query_encoder, state.classifier, dataset, test_indices);
  return metrics;
}

FoldOutcome run_fold(const GraphDataset& dataset, const FoldSplit& fold, const TrainingConfig& config) {
  config.validate();
  TrainState state = init_train_state(dataset, fold.train_indices, config, fold.fold_index);
  FoldOutcome outcome;
  outcome.fold_index = fold.fold_index;
  outcome.epochs.reserve(static_cast<std::size_t>(config.epochs));
  for (std::int64_t epoch = 0; epoch < config.epochs; ++epoch) {
    outcome.epochs.push_back(train_epoch(state, dataset, fold.test_indices, config, epoch));
  }
  return outcome;
}

CrossValidationOutcome run_splits(const GraphDataset& dataset, std::span<const FoldSplit> splits,
                                  const TrainingConfig& config) {
  config.validate();
  if (splits.empty()) {
    throw std::invalid_argument("run_splits: no folds given");
  }
  std::size_t worker_count = config.workers > 0 ? static_cast<std::size_t>(config.workers)
                                                : std::max(1u, std::thread::hardware_concurrency());
  worker_count = std::min(worker_count, splits.size());

  std::vector<FoldOutcome> outcomes(splits.size());
  std::vector<std::exception_ptr> errors(splits.size());
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= splits.size()) {
        return;
      }
      try {
        outcomes[i] = run_fold(dataset, splits[i], config);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (worker_count <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(worker_count);
    for (std::size_t t = 0; t < worker_count; ++t) {
      pool.emplace_back(work);
    }
    for (std::thread& t : pool) {
      t.join();
    }
  }
  for (const auto& err : errors) {
    if (err) {
      std::rethrow_exception(err);
    }
  }

  CrossValidationOutcome outcome;
  outcome.folds = std::move(outcomes);
  outcome.result = aggregate_folds(outcome.folds, config);
  return outcome;
}

CrossValidationOutcome run_cross_validation(const GraphDataset& dataset, const TrainingConfig& config) {
  config.validate();
  const auto splits = stratified_kfold_split(dataset, config.folds, config.seed);
  return run_splits(dataset, splits, config);
}

LessDataReport run_less_data_experiment(const GraphDataset& dataset, const TrainingConfig& config,
                                        std::span<const double> ratios) {
  config.validate();
  if (ratios.empty()) {
    throw std::invalid_argument("run_less_data_experiment: no ratios given");
  }
  for (double r : ratios) {
    if (!(r > 0.0 && r <= 1.0)) {
      throw std::invalid_argument("run_less_data_experiment: ratio " + std::to_string(r) + " outside (0, 1]");
    }
  }
  const auto splits = stratified_kfold_split(dataset, config.folds, config.seed);
  const auto labels = dataset.labels();

  std::vector<LossMode> methods{config.mode};
  if (config.mode != LossMode::kNone) {
    methods.push_back(LossMode::kNone);
  }

  LessDataReport report;
  for (LossMode method : methods) {
    TrainingConfig method_config = config;
    method_config.mode = method;
    for (double ratio : ratios) {
      std::vector<FoldSplit> reduced = {splits.begin(), splits.end()};
      for (FoldSplit& fold : reduced) {
        fold.train_indices = subsample_training_set(
            fold.train_indices, labels, ratio,
            mix_seed(config.seed, 0x726174696fULL, static_cast<std::uint64_t>(fold.fold_index)));
      }
      LessDataRow row;
      row.method = to_string(method);
      row.ratio = ratio;
      row.result = run_splits(dataset, reduced, method_config).result;
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

AblationAxis parse_ablation_axis(const std::string& text) {
  if (text == "beta") {
    return AblationAxis::kBeta;
  }
  if (text == "momentum") {
    return AblationAxis::kMomentum;
  }
  if (text == "loss-mode") {
    return AblationAxis::kLossMode;
  }
  throw std::invalid_argument("unknown ablation axis '" + text + "' (expected beta, momentum or loss-mode)");
}

std::vector<SweepRow> run_ablation(const GraphDataset& dataset, const TrainingConfig& config, AblationAxis axis,
                                   std::span<const std::string> values) {
  config.validate();
  if (values.empty()) {
    throw std::invalid_argument("run_ablation: no sweep values given");
  }
  std::vector<SweepRow> rows;
  for (const std::string& value : values) {
    TrainingConfig point = config;
    switch (axis) {
      case AblationAxis::kBeta:
        point.beta = std::stod(value);
        break;
      case AblationAxis::kMomentum:
        point.alpha = std::stod(value);
        break;
      case AblationAxis::kLossMode:
        point.mode = parse_loss_mode(value);
        break;
    }
    SweepRow row;
    row.value = value;
    row.result = run_cross_validation(dataset, point).result;
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_epoch_csv(std::ostream& out, std::span<const EpochMetrics> metrics) {
  out << "epoch,cls_loss,lc_loss,train_acc,test_acc\n";
  for (const EpochMetrics& m : metrics) {
    out << m.epoch << ',' << fmt_double(m.cls_loss) << ',' << fmt_double(m.lc_loss) << ','
        << fmt_double(m.train_acc) << ',' << fmt_double(m.test_acc) << '\n';
  }
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "value,mean_accuracy,std_accuracy,selected_epoch,final_train_cls_loss_mean\n";
  for (const SweepRow& row : rows) {
    out << row.value << ',' << fmt_double(row.result.mean_accuracy) << ',' << fmt_double(row.result.std_accuracy)
        << ',' << row.result.selected_epoch << ',' << fmt_double(row.result.final_train_cls_loss_mean) << '\n';
  }
}

void write_less_data_csv(std::ostream& out, const LessDataReport& report) {
  out << "method,ratio,mean_accuracy,std_accuracy,selected_epoch\n";
  for (const LessDataRow& row : report.rows) {
    out << row.method << ',' << fmt_double(row.ratio) << ',' << fmt_double(row.result.mean_accuracy) << ','
        << fmt_double(row.result.std_accuracy) << ',' << row.result.selected_epoch << '\n';
  }
}

namespace {

ordered_json config_to_json(const TrainingConfig& c) {
  ordered_json j;
  j["beta"] = c.beta;
  j["alpha"] = c.alpha;
  j["tau"] = c.tau;
  j["lr"] = c.lr;
  j["batch"] = c.batch_size;
  j["dropout"] = c.dropout;
  j["epochs"] = c.epochs;
  j["hidden"] = c.hidden_dim;
  j["layers"] = c.num_layers;
  j["folds"] = c.folds;
  j["seed"] = c.seed;
  j["mode"] = to_string(c.mode);
  j["workers"] = c.workers;
  return j;
}

ordered_json result_to_json(const CVResult& r) {
  ordered_json j;
  j["fold_accuracies"] = r.fold_accuracies;
  j["mean_accuracy"] = r.mean_accuracy;
  j["std_accuracy"] = r.std_accuracy;
  j["selected_epoch"] = r.selected_epoch;
  j["final_train_cls_loss_mean"] = r.final_train_cls_loss_mean;
  return j;
}

}  // namespace

std::string config_json(const TrainingConfig& config) {
  return config_to_json(config).dump(2) + "\n";
}

std::string cv_summary_json(const CrossValidationOutcome& outcome) {
  ordered_json j;
  j["config"] = config_to_json(outcome.result.config);
  j.update(result_to_json(outcome.result));
  return j.dump(2) + "\n";
}

std::string ablation_summary_json(const std::string& axis, std::span<const SweepRow> rows) {
  ordered_json j;
  j["axis"] = axis;
  j["rows"] = ordered_json::array();
  for (const SweepRow& row : rows) {
    ordered_json r;
    r["value"] = row.value;
    r["config"] = config_to_json(row.result.config);
    r.update(result_to_json(row.result));
    j["rows"].push_back(std::move(r));
  }
  return j.dump(2) + "\n";
}

std::string less_data_summary_json(const LessDataReport& report) {
  ordered_json j;
  j["axis"] = "train-ratio";
  j["rows"] = ordered_json::array();
  for (const LessDataRow& row : report.rows) {
    ordered_json r;
    r["method"] = row.method;
    r["ratio"] = row.ratio;
    r["config"] = config_to_json(row.result.config);
    r.update(result_to_json(row.result));
    j["rows"].push_back(std::move(r));
  }
  return j.dump(2) + "\n";
}

}  // namespace lcgnn
