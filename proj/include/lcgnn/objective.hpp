#pragma once

#include <cstdint>
#include <span>

#include "lcgnn/tape.hpp"

namespace lcgnn {

// Logistic-regression head over the encoder readout.
struct ClassifierParams {
  Parameter weight;  // input_dim x class_count
  Parameter bias;    // 1 x class_count

  std::int64_t input_dim() const { return weight.value.rows(); }
  std::int64_t class_count() const { return weight.value.cols(); }
  std::vector<Parameter*> parameters() { return {&weight, &bias}; }
};

ClassifierParams init_classifier(std::int64_t input_dim, std::int64_t class_count, std::uint64_t seed);

// Log-probabilities on the tape: dropout(representation) -> affine ->
// log-softmax. Dropout fires only when train_flag is set.
ValueId classifier_log_probs(Tape& tape, ClassifierParams& clf, ValueId representation, double dropout_rate,
                             bool train_flag, bool as_parameters = true);

// Probability vector over classes (rows sum to 1). Gradient-free.
Tensor classifier_forward(const ClassifierParams& clf, const Tensor& representation, double dropout_rate = 0.0,
                          bool train_flag = false, std::uint64_t dropout_seed = 0);

std::int32_t predict_class(const ClassifierParams& clf, const Tensor& representation);

// -(1/|Q|) sum of log p at the true class. Probabilities are floored at 1e-12
// so externally supplied predictions cannot produce an infinite loss.
double cross_entropy_loss(std::span<const Tensor> predictions, std::span<const std::int32_t> labels);

// -log p[label] picked out of a 1 x C log-probability row.
ValueId nll_loss(Tape& tape, ValueId log_probs, std::int32_t label);

ValueId mean_scalar(Tape& tape, std::span<const ValueId> scalars);

// total = classification + beta * contrastive.
ValueId mixed_loss(Tape& tape, ValueId cls_loss, ValueId lc_loss, double beta);
double mixed_loss_value(double cls_loss, double lc_loss, double beta);

}  // namespace lcgnn
