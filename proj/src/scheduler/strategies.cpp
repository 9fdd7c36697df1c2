#include "elbert/scheduler/strategies.h"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "elbert/numerics/ops.h"

namespace elbert {

namespace {

ExitDecision decide(const LayerTrace& trace,
                    const std::optional<ExitPolicy>& policy, size_t layer,
                    size_t depth) {
  if (policy) return cwb_decide(trace, *policy, layer, depth);
  return {layer >= depth, layer >= depth ? ExitStage::kForced : ExitStage::kNone};
}

void require_slots(size_t slots) {
  if (slots == 0) {
    throw std::invalid_argument("scheduler: batch slot count must be >= 1");
  }
}

StepLog start_log(Strategy strategy, size_t slots, const Parameters& model,
                  std::span<const StreamItem> stream) {
  StepLog log;
  log.strategy = strategy;
  log.slots = slots;
  log.depth = model.config.depth;
  log.samples.resize(stream.size());
  return log;
}

SampleRecord finish(const StreamItem& item, LayerTrace trace, size_t layer,
                    ExitStage stage) {
  SampleRecord r;
  r.sample_id = item.sample_id;
  r.label = item.label;
  r.prediction = trace.labels.back();
  r.exit_layer = layer;
  r.stage = stage;
  r.trace = std::move(trace);
  return r;
}

TokenSequence padded(const StreamItem& item, const Parameters& model) {
  TokenSequence t = item.tokens.padded_to(model.config.max_seq_len);
  t.validate(model.config);
  return t;
}

StepLog run_sequential(Strategy strategy, std::span<const StreamItem> stream,
                       const Parameters& model,
                       const std::optional<ExitPolicy>& policy,
                       size_t depth_override) {
  StepLog log = start_log(strategy, 1, model, stream);
  ForwardOptions options;
  options.depth_override = depth_override;
  for (size_t s = 0; s < stream.size(); ++s) {
    ForwardResult r =
        forward_with_trace(padded(stream[s], model), model, policy, options);
    for (size_t layer = 1; layer <= r.exit_layer; ++layer) {
      log.steps.push_back({log.steps.size(), 1, layer == 1 ? 1u : 0u, 1});
    }
    log.samples[s] = finish(stream[s], std::move(r.trace), r.exit_layer, r.stage);
  }
  return log;
}

// Embeds one sample into a slot of the stacked batch tensor.
void load_slot(BatchState& state, size_t slot, const TokenSequence& tokens,
               const Parameters& model) {
  const HiddenState h = embed(tokens, model);
  const size_t base = slot * state.seq_len;
  for (size_t r = 0; r < state.seq_len; ++r) {
    auto src = h.row(r);
    std::copy(src.begin(), src.end(), state.hidden.row(base + r).begin());
  }
  state.masks[slot] = tokens.mask;
}

// One shared-encoder step over every slot, then a classifier call for each
// active slot. Returns the slots that exited at this step.
std::vector<size_t> step_batch(BatchState& state, const Parameters& model,
                               const std::optional<ExitPolicy>& policy,
                               size_t depth, std::vector<ExitStage>& stages) {
  state.hidden =
      encoder_step_batched(state.hidden, state.seq_len, state.masks, model);
  std::vector<size_t> exited;
  for (size_t i = 0; i < state.slots(); ++i) {
    if (!state.active[i]) continue;
    ++state.layers[i];
    state.traces[i].push(
        classify_row(state.hidden.row(i * state.seq_len), model));
    const ExitDecision d = decide(state.traces[i], policy, state.layers[i], depth);
    if (d.exit) {
      exited.push_back(i);
      stages[i] = d.stage;
    }
  }
  return exited;
}

StepLog run_synchronous(Strategy strategy, std::span<const StreamItem> stream,
                        const Parameters& model,
                        const std::optional<ExitPolicy>& policy, size_t slots,
                        size_t depth_override) {
  require_slots(slots);
  if (policy) policy->validate();
  const size_t depth = effective_depth(model.config, depth_override);
  StepLog log = start_log(strategy, slots, model, stream);
  const size_t seq_len = model.config.max_seq_len;
  std::vector<ExitStage> stages(slots, ExitStage::kNone);

  for (size_t start = 0; start < stream.size(); start += slots) {
    const size_t count = std::min(slots, stream.size() - start);
    BatchState state(slots, seq_len, model.config.hidden);
    for (size_t i = 0; i < count; ++i) {
      load_slot(state, i, padded(stream[start + i], model), model);
      state.active[i] = true;
      state.stream_index[i] = start + i;
    }
    bool first = true;
    while (state.any_active()) {
      const size_t occupancy = static_cast<size_t>(
          std::count(state.active.begin(), state.active.end(), true));
      for (size_t i : step_batch(state, model, policy, depth, stages)) {
        const size_t s = state.stream_index[i];
        log.samples[s] = finish(stream[s], std::move(state.traces[i]),
                                state.layers[i], stages[i]);
        // The finished sample stays in its slot as dead occupancy.
        state.active[i] = false;
      }
      log.steps.push_back(
          {log.steps.size(), occupancy, first ? count : 0, slots});
      first = false;
    }
  }
  return log;
}

}  // namespace

BatchState::BatchState(size_t slots, size_t seq_len_in, size_t hidden_size)
    : seq_len(seq_len_in),
      hidden(slots * seq_len_in, hidden_size),
      masks(slots),
      active(slots, false),
      layers(slots, 0),
      stream_index(slots, 0),
      traces(slots) {
  for (size_t i = 0; i < slots; ++i) zero_slot(i);
  returned.resize(slots);
  for (size_t i = 0; i < slots; ++i) returned[i] = i;
}

bool BatchState::all_active() const {
  return std::all_of(active.begin(), active.end(), [](bool a) { return a; });
}

bool BatchState::any_active() const {
  return std::any_of(active.begin(), active.end(), [](bool a) { return a; });
}

void BatchState::zero_slot(size_t slot) {
  const size_t base = slot * seq_len;
  for (size_t r = 0; r < seq_len; ++r) {
    auto row = hidden.row(base + r);
    std::fill(row.begin(), row.end(), 0.0);
  }
  masks[slot].assign(seq_len, 0);
  masks[slot][0] = 1;
}

StepLog run_case1(std::span<const StreamItem> stream, const Parameters& model,
                  size_t depth_override) {
  return run_sequential(Strategy::kCase1, stream, model, std::nullopt,
                        depth_override);
}

StepLog run_case2(std::span<const StreamItem> stream, const Parameters& model,
                  const std::optional<ExitPolicy>& policy,
                  size_t depth_override) {
  return run_sequential(Strategy::kCase2, stream, model, policy,
                        depth_override);
}

StepLog run_case3(std::span<const StreamItem> stream, const Parameters& model,
                  size_t slots, size_t depth_override) {
  return run_synchronous(Strategy::kCase3, stream, model, std::nullopt, slots,
                         depth_override);
}

StepLog run_case4(std::span<const StreamItem> stream, const Parameters& model,
                  const std::optional<ExitPolicy>& policy, size_t slots,
                  size_t depth_override) {
  return run_synchronous(Strategy::kCase4, stream, model, policy, slots,
                         depth_override);
}

StepLog run_algorithm1(std::span<const StreamItem> stream,
                       const Parameters& model,
                       const std::optional<ExitPolicy>& policy, size_t slots,
                       size_t depth_override) {
  require_slots(slots);
  if (policy) policy->validate();
  const size_t depth = effective_depth(model.config, depth_override);
  StepLog log = start_log(Strategy::kAlgorithm1, slots, model, stream);
  BatchState state(slots, model.config.max_seq_len, model.config.hidden);
  std::vector<ExitStage> stages(slots, ExitStage::kNone);

  auto retire = [&](const std::vector<size_t>& exited, bool to_return_list) {
    for (size_t i : exited) {
      const size_t s = state.stream_index[i];
      log.samples[s] = finish(stream[s], std::move(state.traces[i]),
                              state.layers[i], stages[i]);
      state.traces[i] = LayerTrace{};
      state.active[i] = false;
      state.layers[i] = 0;
      if (to_return_list) state.returned.push_back(i);
    }
  };

  size_t next = 0;
  while (next < stream.size()) {
    // Refill: the next len(returned) samples go into the freed slots.
    size_t refilled = 0;
    for (size_t slot : state.returned) {
      if (next >= stream.size()) break;
      load_slot(state, slot, padded(stream[next], model), model);
      state.active[slot] = true;
      state.layers[slot] = 0;
      state.stream_index[slot] = next;
      ++next;
      ++refilled;
    }
    state.returned.clear();

    while (state.all_active()) {
      const auto exited = step_batch(state, model, policy, depth, stages);
      log.steps.push_back({log.steps.size(), slots, refilled, slots});
      refilled = 0;
      retire(exited, true);
    }
  }

  // Drain: the stream is empty; step the stragglers to completion.
  while (state.any_active()) {
    for (size_t i = 0; i < slots; ++i) {
      if (!state.active[i]) state.zero_slot(i);
    }
    const size_t occupancy = static_cast<size_t>(
        std::count(state.active.begin(), state.active.end(), true));
    const auto exited = step_batch(state, model, policy, depth, stages);
    log.steps.push_back({log.steps.size(), occupancy, 0, slots});
    retire(exited, false);
  }
  return log;
}

}  // namespace elbert
