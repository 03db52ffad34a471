#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgcn/dataset.hpp"
#include "kgcn/models.hpp"

namespace kgcn {

enum class OptimizerKind { adam, rmsprop };

OptimizerKind parse_optimizer(std::string_view name);
std::string_view to_string(OptimizerKind kind);

/// Column names follow the published hyperparameter tables.
struct Hyperparams {
  double lr = 1e-3;
  double weight_decay = 5e-4;
  std::size_t hidden = 128;
  std::size_t layers_or_blocks = 2;  // depth for snowball/vanilla, n_blocks for truncated Krylov
  std::size_t krylov_layers = 1;     // depth of the truncated Krylov network
  double dropout = 0.5;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::size_t max_episodes = 3000;
  std::size_t patience = 100;
  double min_delta = 1e-4;           // training-loss improvement needed without validation
  std::size_t runs = 10;
  std::size_t width_cap = 0;         // 0 = uncapped
  std::uint64_t seed = 0;
};

/// Messages for values outside the searched ranges (lr ∈ [1e-6, 5e-3],
/// weight_decay ∈ [1e-5, 1e-2]). Advisory only.
std::vector<std::string> range_warnings(const Hyperparams& hp);

/// Builds a spec from a named preset: vanilla_gcn, linear_snowball, snowball
/// or truncated_krylov.
ModelSpec preset_spec(std::string_view preset, std::size_t n_features, std::size_t n_classes,
                      const Hyperparams& hp);

struct LossResult {
  double loss = 0.0;
  DenseMatrix grad_logits;  // zero outside the mask
};

/// Mean negative log-likelihood of softmax(logits) over `mask`.
LossResult masked_cross_entropy(const DenseMatrix& logits, std::span<const std::uint16_t> labels,
                                std::span<const std::size_t> mask);

/// Argmax accuracy over `index_set`; ties go to the lowest class index.
double accuracy(const DenseMatrix& logits, std::span<const std::uint16_t> labels,
                std::span<const std::size_t> index_set);

struct OptimizerState {
  std::vector<DenseMatrix> first;   // Adam m
  std::vector<DenseMatrix> second;  // Adam v / RMSprop square average
  std::size_t step = 0;

  static OptimizerState for_params(const ModelParams& params);
};

/// Coupled L2: g ← g + wd·W before the moment updates. Bias-corrected as in
/// the PyTorch implementation.
void adam_step(ModelParams& params, const ModelParams& grads, OptimizerState& state, double lr,
               double weight_decay, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
void rmsprop_step(ModelParams& params, const ModelParams& grads, OptimizerState& state, double lr,
                  double weight_decay, double alpha = 0.99, double eps = 1e-8);

/// Accuracy of the (dropout-free) model over `index_set`.
double evaluate(const ModelParams& params, const ModelSpec& spec, const SparseMatrix& op,
                const GraphDataset& data, std::span<const std::size_t> index_set);

struct RunResult {
  std::uint64_t seed = 0;
  double test_accuracy = 0.0;
  double best_val_accuracy = 0.0;  // 0 without validation
  std::size_t episodes = 0;
  std::size_t best_episode = 0;    // 1-based
  bool diverged = false;
  std::string error;
};

struct TrainReport {
  std::string dataset;
  std::string arch;
  std::string split;
  std::vector<RunResult> runs;
  std::vector<double> accuracies;  // test accuracy of every run that finished
  double mean = 0.0;
  double std = 0.0;                // population standard deviation
  double wall_seconds = 0.0;
};

struct TrainOptions {
  std::string preset = "truncated_krylov";
  SplitMode split_mode = SplitMode::public_split;
  double split_percent = 0.0;
  std::size_t jobs = 1;
  /// Called once per finished run, possibly from a worker thread.
  std::function<void(std::size_t, const RunResult&)> on_run;
  /// When set, receives the trained weights of run 0.
  ModelParams* first_run_params = nullptr;
};

/// Seed of run `index` derived from the base seed.
std::uint64_t run_seed(std::uint64_t base, std::size_t index);

/// Single run: full-batch episodes with early stopping.
RunResult train_run(const GraphDataset& data, const SparseMatrix& op, const ModelSpec& spec,
                    const Hyperparams& hp, const SplitSpec& split, std::uint64_t seed,
                    ModelParams* trained = nullptr);

/// `hp.runs` independent runs (distinct seeds) and their summary.
TrainReport train(const GraphDataset& data, const Hyperparams& hp, const TrainOptions& options);

std::string split_label(SplitMode mode, double percent);

}  // namespace kgcn
