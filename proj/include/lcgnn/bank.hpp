#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lcgnn/tape.hpp"

namespace lcgnn {

// Per-labeled-graph dictionary of key representations. One slot per training
// graph; labels never change after construction, keys are overwritten in
// place as the key encoder evolves.
struct MemoryBank {
  std::int64_t dim = 0;
  std::vector<std::vector<double>> keys;
  std::vector<std::int32_t> labels;
  std::vector<std::int64_t> last_updated_epoch;  // -1 while still the random init

  std::int64_t size() const { return static_cast<std::int64_t>(keys.size()); }
};

enum class ContrastMode { kLabelContrastive, kInfoNce };

struct ContrastConfig {
  double tau = 0.07;
  ContrastMode mode = ContrastMode::kLabelContrastive;
};

// Slots start from a zero-mean unit-variance random init, labels copied
// slot-for-slot from the training split.
MemoryBank init_memory_bank(std::span<const std::int32_t> labels, std::int64_t dim, std::uint64_t seed);

// Overwrites the listed slots with freshly encoded keys; all other slots are
// untouched. A slot may appear at most once per call.
void replace_bank_entries(MemoryBank& bank, std::span<const std::int32_t> slots, std::span<const Tensor> new_keys,
                          std::int64_t epoch);

// -log( sum over same-label keys of exp(q.k/tau) / sum over all keys ).
// Differentiable w.r.t. the query only; keys enter as constants. Logits are
// max-shifted before exponentiation.
ValueId label_contrastive_loss_single(Tape& tape, ValueId query, std::int32_t query_label, const MemoryBank& bank,
                                      double tau);

// Arithmetic mean of per-query losses; the bank is snapshotted once for the
// whole batch.
ValueId label_contrastive_loss_batch(Tape& tape, std::span<const ValueId> queries,
                                     std::span<const std::int32_t> query_labels, const MemoryBank& bank, double tau);

// Single-positive contrastive loss against the full bank; the positive is
// identified by its slot.
ValueId infonce_loss(Tape& tape, ValueId query, std::int64_t positive_slot, const MemoryBank& bank, double tau);

ValueId infonce_loss_batch(Tape& tape, std::span<const ValueId> queries, std::span<const std::int64_t> positive_slots,
                           const MemoryBank& bank, double tau);

}  // namespace lcgnn
