#include "lcgnn/bank.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>

namespace lcgnn {

namespace {

struct BankSnapshot {
  std::int64_t dim = 0;
  std::vector<std::vector<double>> keys;
  std::vector<std::int32_t> labels;
};

std::shared_ptr<const BankSnapshot> snapshot_bank(const MemoryBank& bank) {
  auto snap = std::make_shared<BankSnapshot>();
  snap->dim = bank.dim;
  snap->keys = bank.keys;
  snap->labels = bank.labels;
  return snap;
}

void check_query(const Tensor& q, const BankSnapshot& snap, double tau, const char* op) {
  if (!(tau > 0.0)) {
    throw std::invalid_argument(std::string(op) + ": temperature must be positive, got " + std::to_string(tau));
  }
  if (snap.keys.empty()) {
    throw std::invalid_argument(std::string(op) + ": empty key set");
  }
  if (q.rows() != 1 || q.cols() != snap.dim) {
    throw std::invalid_argument(std::string(op) + ": query shape " + q.shape_str() + " does not match key dim " +
                                std::to_string(snap.dim));
  }
}

std::vector<double> scaled_logits(const Tensor& q, const BankSnapshot& snap, double tau) {
  std::vector<double> logits(snap.keys.size());
  for (std::size_t i = 0; i < snap.keys.size(); ++i) {
    double dot = 0.0;
    for (std::int64_t c = 0; c < snap.dim; ++c) {
      dot += q.values[static_cast<std::size_t>(c)] * snap.keys[i][static_cast<std::size_t>(c)];
    }
    logits[i] = dot / tau;
  }
  return logits;
}

// Shared forward/backward for both loss flavours; `positive` marks which keys
// count toward the numerator.
// log-sum-exp with its own max shift, so neither the all-keys denominator nor
// the positive-keys numerator can overflow or underflow to zero.
double log_sum_exp(const std::vector<double>& logits, const std::vector<bool>& mask, bool masked) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!masked || mask[i]) {
      mx = std::max(mx, logits[i]);
    }
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!masked || mask[i]) {
      acc += std::exp(logits[i] - mx);
    }
  }
  return mx + std::log(acc);
}

ValueId contrast_node(Tape& tape, const char* op, ValueId query, std::shared_ptr<const BankSnapshot> snap,
                      std::vector<bool> positive, double tau) {
  const Tensor& q = tape.value(query);
  const auto logits = scaled_logits(q, *snap, tau);
  const double loss = log_sum_exp(logits, positive, false) - log_sum_exp(logits, positive, true);

  const ValueId operands[] = {query};
  auto positives = std::make_shared<const std::vector<bool>>(std::move(positive));
  return tape.custom(
      op, operands, Tensor::scalar(loss),
      [snap, positives, tau](const Tensor& out_grad, std::span<const Tensor* const> operand_values,
                             std::span<Tensor* const> operand_grads) {
        Tensor* gq = operand_grads[0];
        if (gq == nullptr) {
          return;
        }
        const Tensor& q_in = *operand_values[0];
        const auto logits = scaled_logits(q_in, *snap, tau);
        double max_all = -std::numeric_limits<double>::infinity();
        double max_pos = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < logits.size(); ++i) {
          max_all = std::max(max_all, logits[i]);
          if ((*positives)[i]) {
            max_pos = std::max(max_pos, logits[i]);
          }
        }
        double denom = 0.0;
        double numer = 0.0;
        for (std::size_t i = 0; i < logits.size(); ++i) {
          denom += std::exp(logits[i] - max_all);
          if ((*positives)[i]) {
            numer += std::exp(logits[i] - max_pos);
          }
        }
        const double g = out_grad.values[0] / tau;
        for (std::size_t i = 0; i < logits.size(); ++i) {
          const double softmax_all = std::exp(logits[i] - max_all) / denom;
          const double softmax_pos = (*positives)[i] ? std::exp(logits[i] - max_pos) / numer : 0.0;
          const double coeff = g * (softmax_all - softmax_pos);
          if (coeff == 0.0) {
            continue;
          }
          for (std::int64_t c = 0; c < snap->dim; ++c) {
            gq->values[static_cast<std::size_t>(c)] += coeff * snap->keys[i][static_cast<std::size_t>(c)];
          }
        }
      });
}

ValueId label_contrastive_node(Tape& tape, ValueId query, std::int32_t query_label,
                               std::shared_ptr<const BankSnapshot> snap, double tau) {
  check_query(tape.value(query), *snap, tau, "label_contrastive_loss");
  std::vector<bool> positive(snap->labels.size(), false);
  bool any = false;
  for (std::size_t i = 0; i < snap->labels.size(); ++i) {
    if (snap->labels[i] == query_label) {
      positive[i] = true;
      any = true;
    }
  }
  if (!any) {
    throw std::invalid_argument("label_contrastive_loss: no key in the bank carries label " +
                                std::to_string(query_label));
  }
  return contrast_node(tape, "label-contrastive-loss", query, std::move(snap), std::move(positive), tau);
}

ValueId infonce_node(Tape& tape, ValueId query, std::int64_t positive_slot,
                     std::shared_ptr<const BankSnapshot> snap, double tau) {
  check_query(tape.value(query), *snap, tau, "infonce_loss");
  if (positive_slot < 0 || positive_slot >= static_cast<std::int64_t>(snap->keys.size())) {
    throw std::invalid_argument("infonce_loss: positive slot " + std::to_string(positive_slot) +
                                " is outside the bank");
  }
  std::vector<bool> positive(snap->keys.size(), false);
  positive[static_cast<std::size_t>(positive_slot)] = true;
  return contrast_node(tape, "infonce-loss", query, std::move(snap), std::move(positive), tau);
}

ValueId mean_of(Tape& tape, std::span<const ValueId> scalars) {
  ValueId acc = scalars[0];
  for (std::size_t i = 1; i < scalars.size(); ++i) {
    acc = tape.add(acc, scalars[i]);
  }
  return tape.scalar_scale(acc, 1.0 / static_cast<double>(scalars.size()));
}

}  // namespace

MemoryBank init_memory_bank(std::span<const std::int32_t> labels, std::int64_t dim, std::uint64_t seed) {
  if (labels.empty()) {
    throw std::invalid_argument("init_memory_bank: training set is empty");
  }
  if (dim <= 0) {
    throw std::invalid_argument("init_memory_bank: key dim must be positive, got " + std::to_string(dim));
  }
  MemoryBank bank;
  bank.dim = dim;
  bank.labels.assign(labels.begin(), labels.end());
  bank.last_updated_epoch.assign(labels.size(), -1);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  bank.keys.resize(labels.size());
  for (auto& key : bank.keys) {
    key.resize(static_cast<std::size_t>(dim));
    for (double& v : key) {
      v = dist(rng);
    }
  }
  return bank;
}

void replace_bank_entries(MemoryBank& bank, std::span<const std::int32_t> slots, std::span<const Tensor> new_keys,
                          std::int64_t epoch) {
  if (slots.size() != new_keys.size()) {
    throw std::invalid_argument("replace_bank_entries: " + std::to_string(slots.size()) + " slots but " +
                                std::to_string(new_keys.size()) + " keys");
  }
  std::vector<bool> seen(bank.keys.size(), false);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const std::int32_t slot = slots[i];
    if (slot < 0 || slot >= bank.size()) {
      throw std::invalid_argument("replace_bank_entries: slot " + std::to_string(slot) + " outside bank of size " +
                                  std::to_string(bank.size()));
    }
    if (seen[static_cast<std::size_t>(slot)]) {
      throw std::invalid_argument("replace_bank_entries: slot " + std::to_string(slot) +
                                  " listed twice in one call");
    }
    seen[static_cast<std::size_t>(slot)] = true;
    const Tensor& key = new_keys[i];
    if (key.rows() != 1 || key.cols() != bank.dim) {
      throw std::invalid_argument("replace_bank_entries: key shape " + key.shape_str() + " does not match dim " +
                                  std::to_string(bank.dim));
    }
    if (!key.all_finite()) {
      throw std::invalid_argument("replace_bank_entries: non-finite key for slot " + std::to_string(slot));
    }
    bank.keys[static_cast<std::size_t>(slot)] = key.values;
    bank.last_updated_epoch[static_cast<std::size_t>(slot)] = epoch;
  }
}

ValueId label_contrastive_loss_single(Tape& tape, ValueId query, std::int32_t query_label, const MemoryBank& bank,
                                      double tau) {
  return label_contrastive_node(tape, query, query_label, snapshot_bank(bank), tau);
}

ValueId label_contrastive_loss_batch(Tape& tape, std::span<const ValueId> queries,
                                     std::span<const std::int32_t> query_labels, const MemoryBank& bank, double tau) {
  if (queries.empty() || queries.size() != query_labels.size()) {
    throw std::invalid_argument("label_contrastive_loss_batch: batch is empty or misaligned");
  }
  auto snap = snapshot_bank(bank);
  std::vector<ValueId> losses;
  losses.reserve(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    losses.push_back(label_contrastive_node(tape, queries[i], query_labels[i], snap, tau));
  }
  return mean_of(tape, losses);
}

ValueId infonce_loss(Tape& tape, ValueId query, std::int64_t positive_slot, const MemoryBank& bank, double tau) {
  return infonce_node(tape, query, positive_slot, snapshot_bank(bank), tau);
}

ValueId infonce_loss_batch(Tape& tape, std::span<const ValueId> queries, std::span<const std::int64_t> positive_slots,
                           const MemoryBank& bank, double tau) {
  if (queries.empty() || queries.size() != positive_slots.size()) {
    throw std::invalid_argument("infonce_loss_batch: batch is empty or misaligned");
  }
  auto snap = snapshot_bank(bank);
  std::vector<ValueId> losses;
  losses.reserve(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    losses.push_back(infonce_node(tape, queries[i], positive_slots[i], snap, tau));
  }
  return mean_of(tape, losses);
}

}  // namespace lcgnn
