#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lcgnn/tensor.hpp"

namespace lcgnn {

// A trainable tensor together with its gradient accumulator and Adam slots.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;
  std::int64_t adam_steps = 0;

  Parameter() = default;
  Parameter(std::string name_, Tensor value_);

  void zero_grad();
  std::int64_t numel() const { return value.numel(); }
};

enum class Primitive {
  kMatmul,
  kAdd,
  kElementwiseMultiply,
  kRelu,
  kConcatLastAxis,
  kSumRows,
  kScalarScale,
  kLogSoftmaxRows,
  kDropout,
};

const char* primitive_name(Primitive tag);

struct ValueId {
  std::int32_t index = -1;
  bool valid() const { return index >= 0; }
};

// Reverse-mode tape. One node is appended per primitive application, so the
// record is topologically ordered by construction; backward() walks it once
// in reverse. A tape is single-use: re-trace on a fresh tape after backward.
class Tape {
 public:
  explicit Tape(std::uint64_t dropout_seed = 0);
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  ValueId constant(Tensor value);
  // Registers a parameter leaf; repeated registration of the same parameter
  // returns the existing node so adjoints accumulate in one place.
  ValueId parameter(Parameter& p);
  // Records the parameter's current value as a constant (no gradient path).
  ValueId frozen(const Parameter& p);

  // Tag-dispatched entry point. `scalar` carries the scale factor for
  // kScalarScale and the drop rate for kDropout; `train_flag` is only
  // meaningful for kDropout.
  ValueId forward_primitive(Primitive tag, std::span<const ValueId> operands, double scalar = 0.0,
                            bool train_flag = false);

  ValueId matmul(ValueId a, ValueId b);
  ValueId add(ValueId a, ValueId b);
  ValueId multiply(ValueId a, ValueId b);
  ValueId relu(ValueId a);
  ValueId concat_last_axis(std::span<const ValueId> parts);
  ValueId sum_rows(ValueId a);
  ValueId scalar_scale(ValueId a, double factor);
  ValueId log_softmax_rows(ValueId a);
  ValueId dropout(ValueId a, double rate, bool train_flag);

  // Custom differentiable operation. `backward` receives the output adjoint,
  // the operand values, and one writable adjoint per operand (nullptr when
  // that operand needs no gradient).
  using CustomBackward = std::function<void(const Tensor& out_grad, std::span<const Tensor* const> operand_values,
                                            std::span<Tensor* const> operand_grads)>;
  ValueId custom(std::string op_name, std::span<const ValueId> operands, Tensor output, CustomBackward backward);

  const Tensor& value(ValueId id) const;
  double scalar(ValueId id) const;
  std::size_t size() const { return nodes_.size(); }

  // Accumulates d(loss)/d(p) into every reached Parameter's grad. The loss
  // must be a 1x1 value produced on this tape.
  void backward(ValueId loss);

 private:
  struct Node {
    enum class Kind { kConstant, kParameter, kPrimitive, kCustom };
    Kind kind = Kind::kConstant;
    Primitive tag = Primitive::kMatmul;
    std::string custom_name;
    std::vector<std::int32_t> inputs;
    Tensor value;
    Tensor aux;  // dropout keeps its pre-scaled mask here
    double scalar = 0.0;
    bool needs_grad = false;
    Parameter* param = nullptr;
    CustomBackward custom_backward;
  };

  ValueId push(Node node);
  const Node& node(ValueId id) const;
  void check_operands_finite(const char* tag, std::span<const ValueId> operands) const;

  // deque: appending must not invalidate references handed out by value()
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::int32_t> param_ids_;
  std::mt19937_64 dropout_rng_;
  bool used_ = false;
};

// Central-difference gradient of a scalar-valued function with respect to
// every coordinate of `p`. `f` must be deterministic and is re-evaluated with
// p perturbed in place; p is restored before returning.
Tensor finite_difference_gradient(Parameter& p, double step, const std::function<double()>& f);

struct AdamOptions {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected first-order update. Gradients are left untouched; the caller
// zeroes them once the step is taken.
void adam_step(std::span<Parameter* const> params, const AdamOptions& opts);

}  // namespace lcgnn
