#include "lcgnn/objective.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace lcgnn {

namespace {
constexpr double kProbFloor = 1e-12;
}

ClassifierParams init_classifier(std::int64_t input_dim, std::int64_t class_count, std::uint64_t seed) {
  if (input_dim < 1 || class_count < 2) {
    throw std::invalid_argument("init_classifier: need input_dim >= 1 and class_count >= 2");
  }
  std::mt19937_64 rng(seed);
  const double limit = std::sqrt(6.0 / static_cast<double>(input_dim + class_count));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor w(input_dim, class_count, 0.0);
  for (double& v : w.values) {
    v = dist(rng);
  }
  return ClassifierParams{Parameter("classifier.weight", std::move(w)),
                          Parameter("classifier.bias", Tensor(1, class_count, 0.0))};
}

ValueId classifier_log_probs(Tape& tape, ClassifierParams& clf, ValueId representation, double dropout_rate,
                             bool train_flag, bool as_parameters) {
  const Tensor& rep = tape.value(representation);
  if (rep.cols() != clf.input_dim()) {
    throw std::invalid_argument("classifier: representation width " + std::to_string(rep.cols()) +
                                " does not match classifier input dim " + std::to_string(clf.input_dim()));
  }
  const ValueId dropped = tape.dropout(representation, dropout_rate, train_flag);
  const ValueId w = as_parameters ? tape.parameter(clf.weight) : tape.frozen(clf.weight);
  const ValueId b = as_parameters ? tape.parameter(clf.bias) : tape.frozen(clf.bias);
  const ValueId logits = tape.add(tape.matmul(dropped, w), b);
  return tape.log_softmax_rows(logits);
}

Tensor classifier_forward(const ClassifierParams& clf, const Tensor& representation, double dropout_rate,
                          bool train_flag, std::uint64_t dropout_seed) {
  Tape tape(dropout_seed);
  const ValueId rep = tape.constant(representation);
  auto& mutable_clf = const_cast<ClassifierParams&>(clf);  // frozen path never writes
  const ValueId lsm = classifier_log_probs(tape, mutable_clf, rep, dropout_rate, train_flag, false);
  Tensor probs = tape.value(lsm);
  for (double& v : probs.values) {
    v = std::exp(v);
  }
  return probs;
}

std::int32_t predict_class(const ClassifierParams& clf, const Tensor& representation) {
  const Tensor probs = classifier_forward(clf, representation);
  std::int32_t best = 0;
  for (std::int64_t c = 1; c < probs.cols(); ++c) {
    if (probs.at(0, c) > probs.at(0, best)) {
      best = static_cast<std::int32_t>(c);
    }
  }
  return best;
}

double cross_entropy_loss(std::span<const Tensor> predictions, std::span<const std::int32_t> labels) {
  if (predictions.empty() || predictions.size() != labels.size()) {
    throw std::invalid_argument("cross_entropy_loss: predictions and labels are empty or misaligned");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const Tensor& p = predictions[i];
    const std::int32_t label = labels[i];
    if (label < 0 || label >= p.cols()) {
      throw std::invalid_argument("cross_entropy_loss: label " + std::to_string(label) +
                                  " outside the " + std::to_string(p.cols()) + " classes");
    }
    total += -std::log(std::max(p.at(0, label), kProbFloor));
  }
  return total / static_cast<double>(predictions.size());
}

ValueId nll_loss(Tape& tape, ValueId log_probs, std::int32_t label) {
  const Tensor& lsm = tape.value(log_probs);
  if (lsm.rows() != 1) {
    throw std::invalid_argument("nll_loss: expected a 1 x C log-probability row, got " + lsm.shape_str());
  }
  if (label < 0 || label >= lsm.cols()) {
    throw std::invalid_argument("nll_loss: label " + std::to_string(label) + " outside the " +
                                std::to_string(lsm.cols()) + " classes");
  }
  Tensor mask(1, lsm.cols(), 0.0);
  mask.at(0, label) = 1.0;
  const ValueId picked = tape.multiply(log_probs, tape.constant(std::move(mask)));
  const ValueId summed = tape.matmul(picked, tape.constant(Tensor(lsm.cols(), 1, 1.0)));
  return tape.scalar_scale(summed, -1.0);
}

ValueId mean_scalar(Tape& tape, std::span<const ValueId> scalars) {
  if (scalars.empty()) {
    throw std::invalid_argument("mean_scalar: empty list");
  }
  ValueId acc = scalars[0];
  for (std::size_t i = 1; i < scalars.size(); ++i) {
    acc = tape.add(acc, scalars[i]);
  }
  return tape.scalar_scale(acc, 1.0 / static_cast<double>(scalars.size()));
}

ValueId mixed_loss(Tape& tape, ValueId cls_loss, ValueId lc_loss, double beta) {
  if (beta < 0.0) {
    throw std::invalid_argument("mixed_loss: beta must be nonnegative, got " + std::to_string(beta));
  }
  return tape.add(cls_loss, tape.scalar_scale(lc_loss, beta));
}

double mixed_loss_value(double cls_loss, double lc_loss, double beta) {
  if (beta < 0.0) {
    throw std::invalid_argument("mixed_loss: beta must be nonnegative, got " + std::to_string(beta));
  }
  return cls_loss + beta * lc_loss;
}

}  // namespace lcgnn
