#pragma once

#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tagclip/config.hpp"
#include "tagclip/embeddings.hpp"
#include "tagclip/head.hpp"
#include "tagclip/losses.hpp"
#include "tagclip/metrics.hpp"

namespace tagclip {

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Train/test split of one benchmark. Labels are the raw annotations; masking
/// happens inside training according to the protocol.
struct Dataset {
  ClassVocabulary vocab;
  std::vector<ToySample> train;
  std::vector<ToySample> test;
};

/// Generates the toy benchmark for `config` and holds out the last
/// round(test_fraction·samples) images for testing.
Dataset make_dataset(const RunConfig& config);

/// Adam over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<Tensor> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  /// Applies one update from the accumulated gradients.
  void step();
  std::size_t steps_taken() const { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

struct RunResult {
  EvalReport report;
  std::vector<LossReport> trace;       // one mean report per step
  std::vector<std::size_t> pseudo_pixels;  // per step; empty outside self-training
  double seconds = 0.0;
};

struct TrainOutput {
  HeadParams params;
  RunResult result;
};

/// Observer called after every optimizer step with (step index, mean report).
using StepCallback = std::function<void(std::size_t, const LossReport&)>;

LossOptions loss_options(const RunConfig& config, UnseenSupervision unseen);

/// Classes the head sees during training under `protocol` (seen only for inductive).
std::vector<ClassId> training_classes(const ClassVocabulary& vocab, Protocol protocol);

/// Training labels for one sample under `protocol`, at the embedding grid resolution.
LabelMap training_labels(const ToySample& sample, const ClassVocabulary& vocab, Protocol protocol);

/// Reduces a pixel-level map to one label per P×P patch by majority vote
/// (lowest id on ties). Identity when the map already matches the grid.
LabelMap downsample_labels(const LabelMap& labels, GridShape grid);

/// Pseudo labels for one image: MASKED cells whose best unseen raw score
/// exceeds `threshold` take that unseen class. Returns the number relabelled.
std::size_t assign_pseudo_labels(LabelMap& labels, const SegOutputs& all_classes,
                                 const ClassVocabulary& vocab, double threshold);

/// Optimizer state and batch order for one run. Plain and self-training steps
/// share it, so switching phases does not reset the moment estimates.
class Trainer {
 public:
  /// `params`, `train` and `vocab` must outlive the trainer.
  Trainer(HeadParams& params, const RunConfig& config, const std::vector<ToySample>& train,
          const ClassVocabulary& vocab);

  /// Plain training: inductive uses seen classes only, supervised uses every class.
  std::vector<LossReport> fit(Protocol protocol, std::size_t steps, const StepCallback& on_step = {});

  /// Self-training: every step pseudo-labels the masked cells of its batch
  /// with the current parameters, then trains on seen classes plus the
  /// unseen classes that received pseudo labels.
  std::vector<LossReport> self_train(std::size_t steps, const StepCallback& on_step = {});

  std::size_t steps_done() const { return step_; }
  /// Pseudo-labelled cells per self-training step.
  const std::vector<std::size_t>& pseudo_counts() const { return pseudo_counts_; }

 private:
  struct Item {
    const EmbeddingBundle* bundle;
    LabelMap labels;
    std::vector<ClassId> classes;
  };
  LossReport optimize(const std::vector<Item>& items, const LossOptions& options);
  std::vector<std::size_t> next_batch();

  HeadParams& params_;
  RunConfig config_;
  const std::vector<ToySample>& train_;
  const ClassVocabulary& vocab_;
  Adam opt_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  std::size_t step_ = 0;
  std::vector<std::size_t> pseudo_counts_;
};

/// Label map the model predicts for one image, at label resolution.
LabelMap predict(const HeadParams& params, const ToySample& sample, const ClassVocabulary& vocab,
                 bool weighted_map);

ConfusionMatrix confusion(const HeadParams& params, const std::vector<ToySample>& samples,
                          const ClassVocabulary& vocab, bool weighted_map);
EvalReport evaluate(const HeadParams& params, const std::vector<ToySample>& samples,
                    const ClassVocabulary& vocab, bool weighted_map);

/// Inductive steps before self-training starts: round(warmup_fraction·steps).
std::size_t warmup_steps(const RunConfig& config);

/// Full protocol: initialize from config.seed, train (with self-training after
/// warmup for the transductive protocol) and evaluate on the test split.
TrainOutput train(const RunConfig& config, const Dataset& data, const StepCallback& on_step = {});

struct AblationRow {
  std::string label;  // "(a)", "(b)", "(c)", "(d)"
  RunConfig config;
  RunResult result;
};

/// Extra Q/K/V variants evaluated in row (c) before That/That/That.
std::vector<LearnerVariant> default_ablation_variants();

/// Configs for every grid row in table order. Row (d) is the last (c) config
/// with weighted_map switched on.
std::vector<AblationRow> ablation_plan(const RunConfig& base,
                                       const std::vector<LearnerVariant>& extra_variants);

/// Runs the grid. Row (d) reuses the parameters trained for the final row (c)
/// and differs from it only in decoding with the weighted map.
std::vector<AblationRow> run_ablation_grid(const RunConfig& base, const Dataset& data,
                                           const std::vector<LearnerVariant>& extra_variants,
                                           const std::function<void(const AblationRow&)>& on_row = {});

std::string format_ablation_table(const std::vector<AblationRow>& rows);

struct SweepEntry {
  double gamma = 0.0;
  RunResult result;
};

std::vector<SweepEntry> sweep_gamma(const RunConfig& base, const Dataset& data,
                                    const std::vector<double>& gammas);

std::string format_sweep_table(const std::vector<SweepEntry>& entries);

/// Mean of the total loss over a trailing/leading window of the trace.
double smoothed_total(std::span<const LossReport> trace, std::size_t begin, std::size_t window);

// Persistence.

/// dir/vocab.txt plus dir/{train,test}/NNNNN/*.tgt.
void save_dataset(const std::filesystem::path& dir, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& dir);

/// dir/head.cfg plus one TGT1 file per named parameter.
void save_params(const std::filesystem::path& dir, const HeadParams& params);
HeadParams load_params(const std::filesystem::path& dir);

std::string serialize_vocab(const ClassVocabulary& vocab);
ClassVocabulary parse_vocab(const std::string& text);

}  // namespace tagclip
