// Command-line front end: data preparation, training, early-exit evaluation,
// delta sweeps, scheduling simulation and attention export.

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "CLI11.hpp"
#include "elbert/harness/attention_trace.h"
#include "elbert/harness/dataset.h"
#include "elbert/harness/experiment.h"
#include "elbert/harness/preprocess.h"
#include "elbert/harness/sweep.h"
#include "elbert/harness/tokenizer.h"
#include "elbert/scheduler/cost_model.h"
#include "elbert/scheduler/csv_export.h"
#include "elbert/scheduler/strategies.h"

namespace {

using namespace elbert;

struct PolicyFlags {
  double delta = 0.0;
  std::string window;  // empty: second stage off unless a criterion is named
  std::string criterion;
  double range_eps = 0.05;

  void attach(CLI::App* app) {
    app->add_option("--delta", delta, "Stage-1 puzzlement threshold in [0, 1]")
        ->check(CLI::Range(0.0, 1.0));
    app->add_option("--window", window,
                    "Stage-2 window size (integer >= 2, or 'inf' to disable)");
    app->add_option("--criterion", criterion,
                    "Stage-2 criterion: bias-trend, range or stable-label");
    app->add_option("--range-eps", range_eps, "Tolerance of the range criterion")
        ->check(CLI::PositiveNumber);
  }

  // Stage 2 is opt-in here, so a bare --delta 0 means "never exit early".
  ExitPolicy build() const {
    ExitPolicy p;
    p.delta = delta;
    p.range_eps = range_eps;
    p.window = criterion.empty() ? ExitPolicy::kNoWindow : ExitPolicy::kDefaultWindow;
    if (!criterion.empty()) {
      const auto c = parse_criterion(criterion);
      if (!c) throw std::invalid_argument("unknown criterion '" + criterion + "'");
      p.criterion = *c;
    }
    if (window == "inf") {
      p.window = ExitPolicy::kNoWindow;
    } else if (!window.empty()) {
      size_t w = 0;
      const char* end = window.data() + window.size();
      const auto [ptr, ec] = std::from_chars(window.data(), end, w);
      if (ec != std::errc{} || ptr != end) {
        throw std::invalid_argument("--window expects an integer or 'inf', got '" +
                                    window + "'");
      }
      p.window = w;
    }
    p.validate();
    return p;
  }
};

void attach_cost(CLI::App* app, CostModel& cm) {
  app->add_option("--step-base", cm.step_base,
                  "Fixed latency of one encoder step, seconds");
  app->add_option("--step-per-slot", cm.step_per_slot,
                  "Added step latency per batch slot, seconds");
  app->add_option("--embed-cost", cm.embed_per_sample,
                  "Embedding cost per sample, seconds");
  app->add_option("--classifier-cost", cm.classifier_per_slot,
                  "Classifier cost per occupied slot-step, seconds");
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  return out;
}

std::vector<StreamItem> load_stream(const Checkpoint& ckpt, const std::string& path) {
  const auto records = load_dataset(path, ckpt.params.config.classes);
  if (records.empty()) throw std::runtime_error(path + ": dataset is empty");
  return to_stream(records, ckpt.vocab, ckpt.params.config.max_seq_len);
}

void write_logs(const std::string& samples_out, const std::string& steps_out,
                std::span<const StepLog> logs) {
  if (!samples_out.empty()) {
    auto out = open_output(samples_out);
    for (const auto& log : logs) write_sample_csv(out, log);
  }
  if (!steps_out.empty()) {
    auto out = open_output(steps_out);
    write_step_csv(out, logs);
  }
}

double mean_exit_layer(const StepLog& log) {
  return static_cast<double>(log.executed_layers()) /
         static_cast<double>(log.samples.size());
}

struct TrainArgs {
  std::string config, data, validation, out;
  uint64_t split_seed = 0;
};

void run_train(const TrainArgs& a) {
  ModelConfig model;
  TrainConfig settings;
  uint64_t init_seed = 0;
  if (!a.config.empty()) {
    apply_run_config(read_run_config(a.config), model, settings, init_seed);
  }
  model.validate();
  settings.validate();

  auto train_records = load_dataset(a.data, model.classes);
  std::vector<LabeledText> val_records;
  if (!a.validation.empty()) {
    val_records = load_dataset(a.validation, model.classes);
  } else {
    DatasetSplit split = split_dataset(std::move(train_records), a.split_seed);
    train_records = std::move(split.train);
    val_records = std::move(split.validation);
  }
  if (train_records.empty()) throw std::runtime_error("no training records");

  std::vector<std::string> texts;
  for (const auto& r : train_records) texts.push_back(r.text);
  Checkpoint ckpt{Parameters::initialize(model, init_seed),
                  Vocabulary::build(texts, model.vocab), {}};
  const auto train_set = to_examples(train_records, ckpt.vocab, model.max_seq_len);
  const auto val_set = to_examples(val_records, ckpt.vocab, model.max_seq_len);

  std::cout << "model " << model.to_string() << "\ntrain " << train_set.size()
            << " validation " << val_set.size() << " vocab " << ckpt.vocab.size()
            << std::endl;
  TrainResult result =
      train(ckpt.params, train_set, val_set, settings, [](const EpochMetrics& m) {
        std::cout << "epoch " << m.epoch << " loss " << format_double(m.mean_loss);
        if (m.validation_accuracy) {
          std::cout << " val_acc " << format_double(*m.validation_accuracy);
        }
        std::cout << std::endl;
      });
  ckpt.params = std::move(result.params);
  ckpt.optimizer = std::move(result.optimizer);
  save_checkpoint(a.out, ckpt);
  std::cout << "saved " << a.out << '\n';
}

struct RunArgs {
  std::string checkpoint, data, samples_out, steps_out, out;
  size_t slots = 8;
  size_t depth_override = 0;
  PolicyFlags policy;
};

void run_eval(const RunArgs& a, bool no_policy) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const auto stream = load_stream(ckpt, a.data);
  const std::optional<ExitPolicy> policy =
      no_policy ? std::nullopt : std::optional<ExitPolicy>(a.policy.build());
  const StepLog log =
      run_algorithm1(stream, ckpt.params, policy, a.slots, a.depth_override);
  const auto acc = log.accuracy();
  std::cout << "samples " << log.samples.size() << "\naccuracy "
            << (acc ? format_double(*acc) : "n/a") << "\ncompute_ratio "
            << format_double(compute_ratio(log, ckpt.params.config.depth))
            << "\nmean_exit_layer " << format_double(mean_exit_layer(log)) << '\n';
  const std::vector<StepLog> logs{log};
  write_logs(a.samples_out, a.steps_out, logs);
}

std::vector<double> parse_grid(const std::string& text) {
  if (text.empty()) return default_delta_grid();
  std::vector<double> grid;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != item.size()) {
      throw std::invalid_argument("--grid: bad value '" + item + "'");
    }
    grid.push_back(v);
  }
  return grid;
}

void run_sweep(const RunArgs& a, const std::string& grid_text) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const auto stream = load_stream(ckpt, a.data);
  const auto grid = parse_grid(grid_text);
  const SweepResult result =
      sweep_delta(ckpt.params, stream, grid, a.policy.build(), a.slots);
  if (a.out.empty()) {
    write_sweep_csv(std::cout, result);
  } else {
    auto out = open_output(a.out);
    write_sweep_csv(out, result);
  }
}

void run_schedule(const RunArgs& a, const std::string& strategy,
                  const CostModel& cost) {
  std::optional<Strategy> only;
  if (strategy != "all") {
    only = parse_strategy(strategy);
    if (!only) throw std::invalid_argument("unknown strategy '" + strategy + "'");
  }
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const auto stream = load_stream(ckpt, a.data);
  const StrategyComparison cmp = compare_strategies(
      stream, ckpt.params, a.policy.build(), a.slots, cost, a.depth_override);

  std::vector<StrategyRow> rows;
  std::vector<StepLog> logs;
  for (size_t i = 0; i < cmp.rows.size(); ++i) {
    if (only && cmp.rows[i].strategy != *only) continue;
    rows.push_back(cmp.rows[i]);
    logs.push_back(cmp.logs[i]);
  }
  if (a.out.empty()) {
    write_comparison_csv(std::cout, rows);
  } else {
    auto out = open_output(a.out);
    write_comparison_csv(out, rows);
  }
  write_logs(a.samples_out, a.steps_out, logs);
}

void run_trace(const std::string& checkpoint, const std::string& text,
               const std::string& out_path) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const TokenSequence seq = ckpt.vocab.encode(text, ckpt.params.config.max_seq_len);
  const Matrix trace = export_attention_trace(ckpt.params, seq);
  const auto tokens = ckpt.vocab.token_strings(seq);
  if (out_path.empty()) {
    write_attention_csv(std::cout, tokens, trace);
  } else {
    auto out = open_output(out_path);
    write_attention_csv(out, tokens, trace);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive-depth shared-encoder classifier with early exit"};
  app.require_subcommand(1);

  // synth
  uint64_t synth_seed = 0;
  size_t synth_n = 3000;
  size_t synth_classes = 3;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a keyword-planted dataset");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--n", synth_n, "Number of records")->check(CLI::PositiveNumber);
  synth->add_option("--classes", synth_classes, "Number of classes")
      ->check(CLI::Range(size_t{2}, size_t{1000}));
  synth->add_option("--out", synth_out, "Output dataset file")->required();

  // preprocess
  std::string pre_in, pre_out, pre_stop, pre_block;
  size_t pre_classes = 3;
  auto* pre = app.add_subcommand("preprocess", "Clean the text of a dataset file");
  pre->add_option("--in", pre_in, "Input dataset file")->required();
  pre->add_option("--out", pre_out, "Output dataset file")->required();
  pre->add_option("--stopwords", pre_stop, "Stopword list, one per line");
  pre->add_option("--blocklist", pre_block, "Blocked terms, one per line");
  pre->add_option("--classes", pre_classes, "Number of classes");

  // train
  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  train_cmd->add_option("--config", train_args.config, "Run config (key = value)");
  train_cmd->add_option("--data", train_args.data, "Dataset file")->required();
  train_cmd->add_option("--validation", train_args.validation,
                        "Validation file (default: 60/20/20 split of --data)");
  train_cmd->add_option("--out", train_args.out, "Checkpoint path")->required();
  train_cmd->add_option("--seed", train_args.split_seed, "Split seed");

  // eval / sweep / schedule-sim share the run flags.
  RunArgs eval_args, sweep_args, sched_args;
  auto add_run_flags = [](CLI::App* cmd, RunArgs& a, bool outputs) {
    cmd->add_option("--checkpoint", a.checkpoint, "Checkpoint path")->required();
    cmd->add_option("--data", a.data, "Dataset file")->required();
    cmd->add_option("--batch-slots", a.slots, "Batch slots N")
        ->check(CLI::PositiveNumber);
    a.policy.attach(cmd);
    if (outputs) {
      cmd->add_option("--depth-override", a.depth_override,
                      "Run only the first k layers (0 = full depth)");
      cmd->add_option("--samples-out", a.samples_out, "Per-sample CSV");
      cmd->add_option("--steps-out", a.steps_out, "Per-step CSV");
    }
  };

  bool eval_full = false;
  auto* eval = app.add_subcommand("eval", "Accuracy and compute ratio under a policy");
  add_run_flags(eval, eval_args, true);
  eval->add_flag("--full-depth", eval_full, "Disable early exit entirely");

  std::string grid_text;
  auto* sweep = app.add_subcommand("sweep", "Accuracy/compute trade-off over a delta grid");
  add_run_flags(sweep, sweep_args, false);
  sweep->add_option("--grid", grid_text, "Comma-separated deltas (default 0.1..1.0)");
  sweep->add_option("--out", sweep_args.out, "Sweep CSV (default stdout)");

  std::string strategy = "all";
  CostModel cost = CostModel::reference();
  auto* sched = app.add_subcommand("schedule-sim", "Simulate execution strategies");
  add_run_flags(sched, sched_args, true);
  sched->add_option("--strategy", strategy, "case1, case2, case3, case4, alg1 or all");
  sched->add_option("--out", sched_args.out, "Comparison CSV (default stdout)");
  attach_cost(sched, cost);

  std::string trace_ckpt, trace_text, trace_out;
  auto* trace = app.add_subcommand("trace-attention", "Cumulative [CLS] attention per layer");
  trace->add_option("--checkpoint", trace_ckpt, "Checkpoint path")->required();
  trace->add_option("--text", trace_text, "Input text")->required();
  trace->add_option("--out", trace_out, "Output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  try {
    if (*synth) {
      save_dataset(synth_out, synth_dataset(synth_seed, synth_n, synth_classes));
      std::cout << "wrote " << synth_n << " records to " << synth_out << '\n';
    } else if (*pre) {
      const Preprocessor p(
          pre_stop.empty() ? Preprocessor::default_stopwords()
                           : Preprocessor::read_word_list(pre_stop),
          pre_block.empty() ? std::set<std::string>{}
                            : Preprocessor::read_word_list(pre_block));
      const auto report = p.apply(load_dataset(pre_in, pre_classes));
      save_dataset(pre_out, report.kept);
      std::cout << "kept " << report.kept.size() << ", dropped " << report.dropped
                << " empty after cleanup\n";
    } else if (*train_cmd) {
      run_train(train_args);
    } else if (*eval) {
      run_eval(eval_args, eval_full);
    } else if (*sweep) {
      run_sweep(sweep_args, grid_text);
    } else if (*sched) {
      run_schedule(sched_args, strategy, cost);
    } else if (*trace) {
      run_trace(trace_ckpt, trace_text, trace_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
