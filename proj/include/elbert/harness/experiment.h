#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "elbert/harness/dataset.h"
#include "elbert/harness/tokenizer.h"
#include "elbert/model/parameters.h"
#include "elbert/scheduler/step_log.h"
#include "elbert/training/trainer.h"

namespace elbert {

// Flat "key = value" file; '#' starts a comment.
std::map<std::string, std::string> read_run_config(
    const std::filesystem::path& path);

// Model keys: depth hidden heads ffn vocab max_seq_len classes.
// Train keys: learning_rate batch_size epochs beta1 beta2 epsilon seed
// stop_at_accuracy init_seed.
// Throws std::invalid_argument on unknown keys or unparsable values.
void apply_run_config(const std::map<std::string, std::string>& entries,
                      ModelConfig& model, TrainConfig& train,
                      uint64_t& init_seed);

std::vector<Example> to_examples(const std::vector<LabeledText>& records,
                                 const Vocabulary& vocab, size_t max_seq_len);
std::vector<StreamItem> to_stream(const std::vector<LabeledText>& records,
                                  const Vocabulary& vocab, size_t max_seq_len);

struct Checkpoint {
  Parameters params;
  Vocabulary vocab;
  AdamState optimizer;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace elbert
