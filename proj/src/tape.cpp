#include "lcgnn/tape.hpp"

#include <cmath>
#include <stdexcept>

#include "lcgnn/exact_sum.hpp"

namespace lcgnn {

namespace {

std::string shape_pair(const Tensor& a, const Tensor& b) {
  return a.shape_str() + " vs " + b.shape_str();
}

}  // namespace

Parameter::Parameter(std::string name_, Tensor value_) : name(std::move(name_)), value(std::move(value_)) {
  grad = Tensor(value.rows(), value.cols(), 0.0);
  adam_m = Tensor(value.rows(), value.cols(), 0.0);
  adam_v = Tensor(value.rows(), value.cols(), 0.0);
}

void Parameter::zero_grad() {
  std::fill(grad.values.begin(), grad.values.end(), 0.0);
}

const char* primitive_name(Primitive tag) {
  switch (tag) {
    case Primitive::kMatmul: return "matmul";
    case Primitive::kAdd: return "add";
    case Primitive::kElementwiseMultiply: return "elementwise-multiply";
    case Primitive::kRelu: return "relu";
    case Primitive::kConcatLastAxis: return "concat-last-axis";
    case Primitive::kSumRows: return "sum-rows";
    case Primitive::kScalarScale: return "scalar-scale";
    case Primitive::kLogSoftmaxRows: return "log-softmax-rows";
    case Primitive::kDropout: return "dropout";
  }
  return "unknown";
}

Tape::Tape(std::uint64_t dropout_seed) : dropout_rng_(dropout_seed) {}

ValueId Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return ValueId{static_cast<std::int32_t>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(ValueId id) const {
  if (!id.valid() || static_cast<std::size_t>(id.index) >= nodes_.size()) {
    throw std::logic_error("Tape: value id does not belong to this tape");
  }
  return nodes_[static_cast<std::size_t>(id.index)];
}

const Tensor& Tape::value(ValueId id) const {
  return node(id).value;
}

double Tape::scalar(ValueId id) const {
  return node(id).value.item();
}

ValueId Tape::constant(Tensor value) {
  if (value.numel() == 0) {
    throw std::invalid_argument("Tape::constant: empty tensor");
  }
  Node n;
  n.kind = Node::Kind::kConstant;
  n.value = std::move(value);
  return push(std::move(n));
}

ValueId Tape::parameter(Parameter& p) {
  auto it = param_ids_.find(&p);
  if (it != param_ids_.end()) {
    return ValueId{it->second};
  }
  Node n;
  n.kind = Node::Kind::kParameter;
  n.value = p.value;
  n.needs_grad = true;
  n.param = &p;
  ValueId id = push(std::move(n));
  param_ids_.emplace(&p, id.index);
  return id;
}

ValueId Tape::frozen(const Parameter& p) {
  return constant(p.value);
}

void Tape::check_operands_finite(const char* tag, std::span<const ValueId> operands) const {
  for (ValueId id : operands) {
    if (!node(id).value.all_finite()) {
      throw std::runtime_error(std::string(tag) + ": non-finite operand");
    }
  }
}

ValueId Tape::forward_primitive(Primitive tag, std::span<const ValueId> operands, double scalar, bool train_flag) {
  const char* name = primitive_name(tag);
  auto arity = [&](std::size_t want) {
    if (operands.size() != want) {
      throw std::invalid_argument(std::string(name) + ": expected " + std::to_string(want) + " operands, got " +
                                  std::to_string(operands.size()));
    }
  };
  check_operands_finite(name, operands);

  Node n;
  n.kind = Node::Kind::kPrimitive;
  n.tag = tag;
  for (ValueId id : operands) {
    n.inputs.push_back(id.index);
    n.needs_grad = n.needs_grad || node(id).needs_grad;
  }

  switch (tag) {
    case Primitive::kMatmul: {
      arity(2);
      const Tensor& a = value(operands[0]);
      const Tensor& b = value(operands[1]);
      if (a.cols() != b.rows()) {
        throw std::invalid_argument(std::string(name) + ": inner dimensions do not conform: " + shape_pair(a, b));
      }
      Tensor out(a.rows(), b.cols(), 0.0);
      const std::int64_t m = a.rows(), k = a.cols(), p = b.cols();
      for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t kk = 0; kk < k; ++kk) {
          const double av = a.values[static_cast<std::size_t>(i * k + kk)];
          if (av == 0.0) {
            continue;
          }
          const double* brow = &b.values[static_cast<std::size_t>(kk * p)];
          double* orow = &out.values[static_cast<std::size_t>(i * p)];
          for (std::int64_t j = 0; j < p; ++j) {
            orow[j] += av * brow[j];
          }
        }
      }
      n.value = std::move(out);
      break;
    }
    case Primitive::kAdd: {
      arity(2);
      const Tensor& a = value(operands[0]);
      const Tensor& b = value(operands[1]);
      if (a.same_shape(b)) {
        Tensor out = a;
        for (std::size_t i = 0; i < out.values.size(); ++i) {
          out.values[i] += b.values[i];
        }
        n.value = std::move(out);
      } else if (a.cols() == b.cols() && b.rows() == 1) {
        // Bias-row broadcast over the node axis.
        Tensor out = a;
        for (std::int64_t r = 0; r < a.rows(); ++r) {
          for (std::int64_t c = 0; c < a.cols(); ++c) {
            out.at(r, c) += b.at(0, c);
          }
        }
        n.value = std::move(out);
      } else if (a.cols() == b.cols() && a.rows() == 1) {
        Tensor out = b;
        for (std::int64_t r = 0; r < b.rows(); ++r) {
          for (std::int64_t c = 0; c < b.cols(); ++c) {
            out.at(r, c) += a.at(0, c);
          }
        }
        n.value = std::move(out);
      } else {
        throw std::invalid_argument(std::string(name) + ": shape mismatch: " + shape_pair(a, b));
      }
      break;
    }
    case Primitive::kElementwiseMultiply: {
      arity(2);
      const Tensor& a = value(operands[0]);
      const Tensor& b = value(operands[1]);
      if (a.same_shape(b)) {
        Tensor out = a;
        for (std::size_t i = 0; i < out.values.size(); ++i) {
          out.values[i] *= b.values[i];
        }
        n.value = std::move(out);
      } else if (b.is_scalar()) {
        Tensor out = a;
        const double s = b.values[0];
        for (double& v : out.values) {
          v *= s;
        }
        n.value = std::move(out);
      } else if (a.is_scalar()) {
        Tensor out = b;
        const double s = a.values[0];
        for (double& v : out.values) {
          v *= s;
        }
        n.value = std::move(out);
      } else {
        throw std::invalid_argument(std::string(name) + ": shape mismatch: " + shape_pair(a, b));
      }
      break;
    }
    case Primitive::kRelu: {
      arity(1);
      Tensor out = value(operands[0]);
      for (double& v : out.values) {
        v = v > 0.0 ? v : 0.0;
      }
      n.value = std::move(out);
      break;
    }
    case Primitive::kConcatLastAxis: {
      if (operands.empty()) {
        throw std::invalid_argument(std::string(name) + ": needs at least one operand");
      }
      const std::int64_t rows = value(operands[0]).rows();
      std::int64_t total_cols = 0;
      for (ValueId id : operands) {
        const Tensor& t = value(id);
        if (t.rows() != rows) {
          throw std::invalid_argument(std::string(name) + ": row counts differ: " +
                                      shape_pair(value(operands[0]), t));
        }
        total_cols += t.cols();
      }
      Tensor out(rows, total_cols, 0.0);
      std::int64_t offset = 0;
      for (ValueId id : operands) {
        const Tensor& t = value(id);
        for (std::int64_t r = 0; r < rows; ++r) {
          for (std::int64_t c = 0; c < t.cols(); ++c) {
            out.at(r, offset + c) = t.at(r, c);
          }
        }
        offset += t.cols();
      }
      n.value = std::move(out);
      break;
    }
    case Primitive::kSumRows: {
      arity(1);
      const Tensor& a = value(operands[0]);
      Tensor out(1, a.cols(), 0.0);
      // Column sums via exact accumulation: the result does not depend on the
      // order rows are visited, so relabeled graphs read out identically.
      for (std::int64_t c = 0; c < a.cols(); ++c) {
        ExactSum acc;
        for (std::int64_t r = 0; r < a.rows(); ++r) {
          acc.add(a.at(r, c));
        }
        out.at(0, c) = acc.result();
      }
      n.value = std::move(out);
      break;
    }
    case Primitive::kScalarScale: {
      arity(1);
      Tensor out = value(operands[0]);
      for (double& v : out.values) {
        v *= scalar;
      }
      n.scalar = scalar;
      n.value = std::move(out);
      break;
    }
    case Primitive::kLogSoftmaxRows: {
      arity(1);
      const Tensor& a = value(operands[0]);
      Tensor out = a;
      for (std::int64_t r = 0; r < a.rows(); ++r) {
        double mx = a.at(r, 0);
        for (std::int64_t c = 1; c < a.cols(); ++c) {
          mx = std::max(mx, a.at(r, c));
        }
        double denom = 0.0;
        for (std::int64_t c = 0; c < a.cols(); ++c) {
          denom += std::exp(a.at(r, c) - mx);
        }
        const double log_denom = std::log(denom);
        for (std::int64_t c = 0; c < a.cols(); ++c) {
          out.at(r, c) = a.at(r, c) - mx - log_denom;
        }
      }
      n.value = std::move(out);
      break;
    }
    case Primitive::kDropout: {
      arity(1);
      if (!(scalar >= 0.0 && scalar < 1.0)) {
        throw std::invalid_argument(std::string(name) + ": rate must be in [0, 1), got " + std::to_string(scalar));
      }
      const Tensor& a = value(operands[0]);
      n.scalar = scalar;
      if (!train_flag || scalar == 0.0) {
        n.value = a;  // identity outside training
      } else {
        const double keep = 1.0 - scalar;
        const double inv_keep = 1.0 / keep;
        Tensor mask(a.rows(), a.cols(), 0.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (double& m : mask.values) {
          m = unif(dropout_rng_) < keep ? inv_keep : 0.0;
        }
        Tensor out = a;
        for (std::size_t i = 0; i < out.values.size(); ++i) {
          out.values[i] *= mask.values[i];
        }
        n.aux = std::move(mask);
        n.value = std::move(out);
      }
      break;
    }
  }
  return push(std::move(n));
}

ValueId Tape::matmul(ValueId a, ValueId b) {
  const ValueId ops[] = {a, b};
  return forward_primitive(Primitive::kMatmul, ops);
}

ValueId Tape::add(ValueId a, ValueId b) {
  const ValueId ops[] = {a, b};
  return forward_primitive(Primitive::kAdd, ops);
}

ValueId Tape::multiply(ValueId a, ValueId b) {
  const ValueId ops[] = {a, b};
  return forward_primitive(Primitive::kElementwiseMultiply, ops);
}

ValueId Tape::relu(ValueId a) {
  const ValueId ops[] = {a};
  return forward_primitive(Primitive::kRelu, ops);
}

ValueId Tape::concat_last_axis(std::span<const ValueId> parts) {
  return forward_primitive(Primitive::kConcatLastAxis, parts);
}

ValueId Tape::sum_rows(ValueId a) {
  const ValueId ops[] = {a};
  return forward_primitive(Primitive::kSumRows, ops);
}

ValueId Tape::scalar_scale(ValueId a, double factor) {
  const ValueId ops[] = {a};
  return forward_primitive(Primitive::kScalarScale, ops, factor);
}

ValueId Tape::log_softmax_rows(ValueId a) {
  const ValueId ops[] = {a};
  return forward_primitive(Primitive::kLogSoftmaxRows, ops);
}

ValueId Tape::dropout(ValueId a, double rate, bool train_flag) {
  const ValueId ops[] = {a};
  return forward_primitive(Primitive::kDropout, ops, rate, train_flag);
}

ValueId Tape::custom(std::string op_name, std::span<const ValueId> operands, Tensor output,
                     CustomBackward backward) {
  check_operands_finite(op_name.c_str(), operands);
  if (!output.all_finite()) {
    throw std::runtime_error(op_name + ": non-finite output");
  }
  Node n;
  n.kind = Node::Kind::kCustom;
  n.custom_name = std::move(op_name);
  for (ValueId id : operands) {
    n.inputs.push_back(id.index);
    n.needs_grad = n.needs_grad || node(id).needs_grad;
  }
  n.value = std::move(output);
  n.custom_backward = std::move(backward);
  return push(std::move(n));
}

void Tape::backward(ValueId loss) {
  const Node& loss_node = node(loss);
  if (!loss_node.value.is_scalar()) {
    throw std::invalid_argument("backward: loss must be scalar, got " + loss_node.value.shape_str());
  }
  if (used_) {
    throw std::logic_error("backward: tape already consumed; re-trace before differentiating again");
  }
  used_ = true;

  std::vector<Tensor> grads(nodes_.size());
  auto grad_of = [&](std::int32_t idx) -> Tensor& {
    Tensor& g = grads[static_cast<std::size_t>(idx)];
    if (g.numel() == 0) {
      const Tensor& v = nodes_[static_cast<std::size_t>(idx)].value;
      g = Tensor(v.rows(), v.cols(), 0.0);
    }
    return g;
  };

  if (!loss_node.needs_grad) {
    return;  // no parameter reachable; all gradients stay zero
  }
  grad_of(loss.index).values[0] = 1.0;

  for (std::int32_t i = loss.index; i >= 0; --i) {
    Node& nd = nodes_[static_cast<std::size_t>(i)];
    Tensor& g = grads[static_cast<std::size_t>(i)];
    if (!nd.needs_grad || g.numel() == 0) {
      continue;
    }
    switch (nd.kind) {
      case Node::Kind::kConstant:
        break;
      case Node::Kind::kParameter: {
        for (std::size_t j = 0; j < g.values.size(); ++j) {
          nd.param->grad.values[j] += g.values[j];
        }
        break;
      }
      case Node::Kind::kCustom: {
        std::vector<const Tensor*> in_values;
        std::vector<Tensor*> in_grads;
        for (std::int32_t in : nd.inputs) {
          in_values.push_back(&nodes_[static_cast<std::size_t>(in)].value);
          in_grads.push_back(nodes_[static_cast<std::size_t>(in)].needs_grad ? &grad_of(in) : nullptr);
        }
        nd.custom_backward(g, in_values, in_grads);
        break;
      }
      case Node::Kind::kPrimitive: {
        switch (nd.tag) {
          case Primitive::kMatmul: {
            const Tensor& a = nodes_[static_cast<std::size_t>(nd.inputs[0])].value;
            const Tensor& b = nodes_[static_cast<std::size_t>(nd.inputs[1])].value;
            const std::int64_t m = a.rows(), k = a.cols(), p = b.cols();
            if (nodes_[static_cast<std::size_t>(nd.inputs[0])].needs_grad) {
              Tensor& ga = grad_of(nd.inputs[0]);
              for (std::int64_t r = 0; r < m; ++r) {
                for (std::int64_t kk = 0; kk < k; ++kk) {
                  double acc = 0.0;
                  for (std::int64_t j = 0; j < p; ++j) {
                    acc += g.at(r, j) * b.at(kk, j);
                  }
                  ga.at(r, kk) += acc;
                }
              }
            }
            if (nodes_[static_cast<std::size_t>(nd.inputs[1])].needs_grad) {
              Tensor& gb = grad_of(nd.inputs[1]);
              for (std::int64_t kk = 0; kk < k; ++kk) {
                for (std::int64_t r = 0; r < m; ++r) {
                  const double av = a.at(r, kk);
                  if (av == 0.0) {
                    continue;
                  }
                  for (std::int64_t j = 0; j < p; ++j) {
                    gb.at(kk, j) += av * g.at(r, j);
                  }
                }
              }
            }
            break;
          }
          case Primitive::kAdd: {
            for (int side = 0; side < 2; ++side) {
              const std::int32_t in = nd.inputs[static_cast<std::size_t>(side)];
              if (!nodes_[static_cast<std::size_t>(in)].needs_grad) {
                continue;
              }
              const Tensor& iv = nodes_[static_cast<std::size_t>(in)].value;
              Tensor& gi = grad_of(in);
              if (iv.same_shape(nd.value)) {
                for (std::size_t j = 0; j < gi.values.size(); ++j) {
                  gi.values[j] += g.values[j];
                }
              } else {
                // bias row: column sums of the adjoint
                for (std::int64_t r = 0; r < nd.value.rows(); ++r) {
                  for (std::int64_t c = 0; c < nd.value.cols(); ++c) {
                    gi.at(0, c) += g.at(r, c);
                  }
                }
              }
            }
            break;
          }
          case Primitive::kElementwiseMultiply: {
            const Tensor& a = nodes_[static_cast<std::size_t>(nd.inputs[0])].value;
            const Tensor& b = nodes_[static_cast<std::size_t>(nd.inputs[1])].value;
            auto accumulate = [&](std::int32_t in, const Tensor& self, const Tensor& other) {
              if (!nodes_[static_cast<std::size_t>(in)].needs_grad) {
                return;
              }
              Tensor& gi = grad_of(in);
              if (self.same_shape(nd.value)) {
                if (other.is_scalar() && !nd.value.is_scalar()) {
                  const double s = other.values[0];
                  for (std::size_t j = 0; j < gi.values.size(); ++j) {
                    gi.values[j] += g.values[j] * s;
                  }
                } else {
                  for (std::size_t j = 0; j < gi.values.size(); ++j) {
                    gi.values[j] += g.values[j] * other.values[j];
                  }
                }
              } else {
                // scalar operand broadcast across the other tensor
                double acc = 0.0;
                for (std::size_t j = 0; j < other.values.size(); ++j) {
                  acc += g.values[j] * other.values[j];
                }
                gi.values[0] += acc;
              }
            };
            accumulate(nd.inputs[0], a, b);
            accumulate(nd.inputs[1], b, a);
            break;
          }
          case Primitive::kRelu: {
            const std::int32_t in = nd.inputs[0];
            if (nodes_[static_cast<std::size_t>(in)].needs_grad) {
              const Tensor& a = nodes_[static_cast<std::size_t>(in)].value;
              Tensor& gi = grad_of(in);
              for (std::size_t j = 0; j < gi.values.size(); ++j) {
                if (a.values[j] > 0.0) {
                  gi.values[j] += g.values[j];
                }
              }
            }
            break;
          }
          case Primitive::kConcatLastAxis: {
            std::int64_t offset = 0;
            for (std::int32_t in : nd.inputs) {
              const Tensor& iv = nodes_[static_cast<std::size_t>(in)].value;
              if (nodes_[static_cast<std::size_t>(in)].needs_grad) {
                Tensor& gi = grad_of(in);
                for (std::int64_t r = 0; r < iv.rows(); ++r) {
                  for (std::int64_t c = 0; c < iv.cols(); ++c) {
                    gi.at(r, c) += g.at(r, offset + c);
                  }
                }
              }
              offset += iv.cols();
            }
            break;
          }
          case Primitive::kSumRows: {
            const std::int32_t in = nd.inputs[0];
            if (nodes_[static_cast<std::size_t>(in)].needs_grad) {
              const Tensor& iv = nodes_[static_cast<std::size_t>(in)].value;
              Tensor& gi = grad_of(in);
              for (std::int64_t r = 0; r < iv.rows(); ++r) {
                for (std::int64_t c = 0; c < iv.cols(); ++c) {
                  gi.at(r, c) += g.at(0, c);
                }
              }
            }
            break;
          }
          case Primitive::kScalarScale: {
            const std::int32_t in = nd.inputs[0];
            if (nodes_[static_cast<std::size_t>(in)].needs_grad) {
              Tensor& gi = grad_of(in);
              for (std::size_t j = 0; j < gi.values.size(); ++j) {
                gi.values[j] += g.values[j] * nd.scalar;
              }
            }
            break;
          }
          case Primitive::kLogSoftmaxRows: {
            const std::int32_t in = nd.inputs[0];
            if (nodes_[static_cast<std::size_t>(in)].needs_grad) {
              Tensor& gi = grad_of(in);
              for (std::int64_t r = 0; r < nd.value.rows(); ++r) {
                double gsum = 0.0;
                for (std::int64_t c = 0; c < nd.value.cols(); ++c) {
                  gsum += g.at(r, c);
                }
                for (std::int64_t c = 0; c < nd.value.cols(); ++c) {
                  gi.at(r, c) += g.at(r, c) - std::exp(nd.value.at(r, c)) * gsum;
                }
              }
            }
            break;
          }
          case Primitive::kDropout: {
            const std::int32_t in = nd.inputs[0];
            if (nodes_[static_cast<std::size_t>(in)].needs_grad) {
              Tensor& gi = grad_of(in);
              if (nd.aux.numel() == 0) {
                for (std::size_t j = 0; j < gi.values.size(); ++j) {
                  gi.values[j] += g.values[j];
                }
              } else {
                for (std::size_t j = 0; j < gi.values.size(); ++j) {
                  gi.values[j] += g.values[j] * nd.aux.values[j];
                }
              }
            }
            break;
          }
        }
        break;
      }
    }
  }
}

Tensor finite_difference_gradient(Parameter& p, double step, const std::function<double()>& f) {
  if (!(step > 0.0)) {
    throw std::invalid_argument("finite_difference_gradient: step must be positive");
  }
  Tensor grad(p.value.rows(), p.value.cols(), 0.0);
  for (std::size_t i = 0; i < p.value.values.size(); ++i) {
    const double original = p.value.values[i];
    p.value.values[i] = original + step;
    const double f_plus = f();
    p.value.values[i] = original - step;
    const double f_minus = f();
    p.value.values[i] = original;
    if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
      throw std::runtime_error("finite_difference_gradient: function returned a non-finite value");
    }
    grad.values[i] = (f_plus - f_minus) / (2.0 * step);
  }
  return grad;
}

void adam_step(std::span<Parameter* const> params, const AdamOptions& opts) {
  if (!(opts.lr > 0.0)) {
    throw std::invalid_argument("adam_step: learning rate must be positive, got " + std::to_string(opts.lr));
  }
  if (!(opts.beta1 >= 0.0 && opts.beta1 < 1.0) || !(opts.beta2 >= 0.0 && opts.beta2 < 1.0)) {
    throw std::invalid_argument("adam_step: betas must lie in [0, 1)");
  }
  if (!(opts.eps > 0.0)) {
    throw std::invalid_argument("adam_step: eps must be positive");
  }
  for (Parameter* p : params) {
    p->adam_steps += 1;
    const double bc1 = 1.0 - std::pow(opts.beta1, static_cast<double>(p->adam_steps));
    const double bc2 = 1.0 - std::pow(opts.beta2, static_cast<double>(p->adam_steps));
    for (std::size_t i = 0; i < p->value.values.size(); ++i) {
      const double g = p->grad.values[i];
      double& m = p->adam_m.values[i];
      double& v = p->adam_v.values[i];
      m = opts.beta1 * m + (1.0 - opts.beta1) * g;
      v = opts.beta2 * v + (1.0 - opts.beta2) * g * g;
      const double m_hat = m / bc1;
      const double v_hat = v / bc2;
      p->value.values[i] -= opts.lr * m_hat / (std::sqrt(v_hat) + opts.eps);
    }
  }
}

}  // namespace lcgnn
