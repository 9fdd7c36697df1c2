#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "elbert/exit_policy/exit_policy.h"
#include "elbert/model/model.h"
#include "elbert/model/parameters.h"
#include "elbert/scheduler/step_log.h"

namespace elbert {

// Every runner pads streamed sequences to the model's max_seq_len, returns
// per-sample results in stream order, and logs one StepRecord per encoder
// invocation. A `depth_override` of k > 0 caps every sample at k layers.

StepLog run_case1(std::span<const StreamItem> stream, const Parameters& model,
                  size_t depth_override = 0);

StepLog run_case2(std::span<const StreamItem> stream, const Parameters& model,
                  const std::optional<ExitPolicy>& policy,
                  size_t depth_override = 0);

StepLog run_case3(std::span<const StreamItem> stream, const Parameters& model,
                  size_t slots, size_t depth_override = 0);

// Synchronous batches: each batch runs until its slowest sample exits, and
// finished samples keep occupying their slot.
StepLog run_case4(std::span<const StreamItem> stream, const Parameters& model,
                  const std::optional<ExitPolicy>& policy, size_t slots,
                  size_t depth_override = 0);

// Batch state of the slot-refill loop: N stacked hidden states with their
// masks, active flags, per-slot iteration counters and traces, and the list
// of slots freed since the last refill.
struct BatchState {
  BatchState(size_t slots, size_t seq_len, size_t hidden);

  size_t slots() const { return active.size(); }
  bool all_active() const;
  bool any_active() const;
  void zero_slot(size_t slot);

  size_t seq_len;
  HiddenState hidden;                       // (slots * seq_len) x hidden
  std::vector<std::vector<uint8_t>> masks;  // per slot
  std::vector<bool> active;
  std::vector<size_t> layers;
  std::vector<size_t> stream_index;
  std::vector<LayerTrace> traces;
  std::vector<size_t> returned;
};

// Slot-refill batched inference. Whenever any slot exits, the step loop
// breaks and freed slots are refilled with fresh embeddings next to
// partially processed samples; after the stream empties, remaining samples
// drain with inactive slots zero-filled. Per-sample outputs are identical
// to run_case2 for the same model and policy.
StepLog run_algorithm1(std::span<const StreamItem> stream,
                       const Parameters& model,
                       const std::optional<ExitPolicy>& policy, size_t slots,
                       size_t depth_override = 0);

}  // namespace elbert
