#include "kgcn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "kgcn/graph.hpp"

namespace kgcn {

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adam" || name == "Adam") return OptimizerKind::adam;
  if (name == "rmsprop" || name == "RMSprop" || name == "RMSProp") return OptimizerKind::rmsprop;
  fail(ErrorCode::BadConfig, "unknown optimizer '" + std::string(name) + "'");
}

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::adam ? "adam" : "rmsprop";
}

std::vector<std::string> range_warnings(const Hyperparams& hp) {
  std::vector<std::string> out;
  if (hp.lr < 1e-6 || hp.lr > 5e-3) {
    std::ostringstream os;
    os << "lr " << hp.lr << " is outside the searched range [1e-6, 5e-3]";
    out.push_back(os.str());
  }
  if (hp.weight_decay < 1e-5 || hp.weight_decay > 1e-2) {
    std::ostringstream os;
    os << "weight_decay " << hp.weight_decay << " is outside the searched range [1e-5, 1e-2]";
    out.push_back(os.str());
  }
  return out;
}

ModelSpec preset_spec(std::string_view preset, std::size_t n_features, std::size_t n_classes,
                      const Hyperparams& hp) {
  const std::size_t hidden = hp.width_cap > 0 ? std::min(hp.hidden, hp.width_cap) : hp.hidden;
  ModelSpec spec;
  if (preset == "linear_snowball") {
    spec = linear_snowball_spec(n_features, hidden, hp.layers_or_blocks, n_classes);
  } else if (preset == "snowball") {
    spec = snowball_spec(n_features, hidden, hp.layers_or_blocks, n_classes);
  } else if (preset == "truncated_krylov") {
    spec = truncated_krylov_spec(n_features, hidden, hp.krylov_layers, hp.layers_or_blocks, n_classes);
  } else if (preset == "vanilla_gcn") {
    spec.arch = Architecture::vanilla_gcn;
    spec.n_features = n_features;
    spec.hidden.assign(hp.layers_or_blocks, hidden);
    spec.f_act = Activation::relu;
    spec.n_classes = n_classes;
  } else {
    fail(ErrorCode::BadConfig, "unknown model preset '" + std::string(preset) + "'");
  }
  spec.dropout = hp.dropout;
  validate(spec);
  return spec;
}

LossResult masked_cross_entropy(const DenseMatrix& logits, std::span<const std::uint16_t> labels,
                                std::span<const std::size_t> mask) {
  if (mask.empty()) fail(ErrorCode::EmptyMask, "masked_cross_entropy: empty mask");
  if (labels.size() != logits.rows()) fail(ErrorCode::ShapeError, "masked_cross_entropy: label count");
  LossResult out;
  out.grad_logits = DenseMatrix(logits.rows(), logits.cols());
  const double inv = 1.0 / static_cast<double>(mask.size());
  const std::size_t c = logits.cols();
  double total = 0.0;
  for (std::size_t i : mask) {
    const auto row = logits.row(i);
    const std::size_t y = labels[i];
    if (y >= c) fail(ErrorCode::ShapeError, "masked_cross_entropy: label out of range");
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    total += lse - row[y];
    auto g = out.grad_logits.row(i);
    for (std::size_t k = 0; k < c; ++k) g[k] = std::exp(row[k] - lse) * inv;
    g[y] -= inv;
  }
  out.loss = total * inv;
  return out;
}

double accuracy(const DenseMatrix& logits, std::span<const std::uint16_t> labels,
                std::span<const std::size_t> index_set) {
  if (index_set.empty()) fail(ErrorCode::EmptyMask, "accuracy: empty index set");
  std::size_t correct = 0;
  for (std::size_t i : index_set) {
    const auto row = logits.row(i);
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    correct += best == labels[i] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(index_set.size());
}

OptimizerState OptimizerState::for_params(const ModelParams& params) {
  OptimizerState s;
  for (const auto* t : params.tensors()) {
    s.first.emplace_back(t->rows(), t->cols());
    s.second.emplace_back(t->rows(), t->cols());
  }
  return s;
}

void adam_step(ModelParams& params, const ModelParams& grads, OptimizerState& state, double lr,
               double weight_decay, double beta1, double beta2, double eps) {
  auto ws = params.tensors();
  const auto gs = grads.tensors();
  if (ws.size() != gs.size() || ws.size() != state.first.size()) {
    fail(ErrorCode::ShapeError, "adam_step: state does not match params");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  const double step_size = lr / bc1;
  const double sqrt_bc2 = std::sqrt(bc2);
  for (std::size_t t = 0; t < ws.size(); ++t) {
    double* w = ws[t]->data();
    const double* g = gs[t]->data();
    double* m = state.first[t].data();
    double* v = state.second[t].data();
    for (std::size_t i = 0; i < ws[t]->size(); ++i) {
      const double gi = g[i] + weight_decay * w[i];
      m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
      v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
      w[i] -= step_size * m[i] / (std::sqrt(v[i]) / sqrt_bc2 + eps);
    }
  }
}

void rmsprop_step(ModelParams& params, const ModelParams& grads, OptimizerState& state, double lr,
                  double weight_decay, double alpha, double eps) {
  auto ws = params.tensors();
  const auto gs = grads.tensors();
  if (ws.size() != gs.size() || ws.size() != state.second.size()) {
    fail(ErrorCode::ShapeError, "rmsprop_step: state does not match params");
  }
  ++state.step;
  for (std::size_t t = 0; t < ws.size(); ++t) {
    double* w = ws[t]->data();
    const double* g = gs[t]->data();
    double* v = state.second[t].data();
    for (std::size_t i = 0; i < ws[t]->size(); ++i) {
      const double gi = g[i] + weight_decay * w[i];
      v[i] = alpha * v[i] + (1.0 - alpha) * gi * gi;
      w[i] -= lr * gi / (std::sqrt(v[i]) + eps);
    }
  }
}

double evaluate(const ModelParams& params, const ModelSpec& spec, const SparseMatrix& op,
                const GraphDataset& data, std::span<const std::size_t> index_set) {
  if (index_set.empty()) fail(ErrorCode::EmptyMask, "evaluate: empty index set");
  const auto tape = forward(op, data.features, params, spec);
  return accuracy(tape.logits, data.labels, index_set);
}

std::uint64_t run_seed(std::uint64_t base, std::size_t index) {
  // splitmix64 finalizer
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

RunResult train_run(const GraphDataset& data, const SparseMatrix& op, const ModelSpec& spec,
                    const Hyperparams& hp, const SplitSpec& split, std::uint64_t seed,
                    ModelParams* trained) {
  if (split.train_idx.empty()) fail(ErrorCode::EmptyMask, "train: empty training set");
  if (split.test_idx.empty()) fail(ErrorCode::EmptyMask, "train: empty test set");
  RunResult result;
  result.seed = seed;

  ModelParams params = init_params(spec, InitScheme::glorot_uniform, seed);
  OptimizerState state = OptimizerState::for_params(params);
  std::mt19937_64 dropout_rng(seed ^ 0xD1B54A32D192ED03ULL);

  const bool has_val = !split.val_idx.empty();
  ModelParams best = params;
  double best_acc = -1.0;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t episode = 1; episode <= hp.max_episodes; ++episode) {
    const ForwardTape tape = forward(op, data.features, params, spec, &dropout_rng);
    const LossResult loss = masked_cross_entropy(tape.logits, data.labels, split.train_idx);
    if (!std::isfinite(loss.loss)) {
      result.diverged = true;
      result.error = "training loss became non-finite at episode " + std::to_string(episode);
      break;
    }
    const ModelParams grads = backward(op, tape, params, spec, loss.grad_logits);
    if (hp.optimizer == OptimizerKind::adam) {
      adam_step(params, grads, state, hp.lr, hp.weight_decay);
    } else {
      rmsprop_step(params, grads, state, hp.lr, hp.weight_decay);
    }
    result.episodes = episode;

    const ForwardTape eval = forward(op, data.features, params, spec);
    bool improved = false;
    if (has_val) {
      const double acc = accuracy(eval.logits, data.labels, split.val_idx);
      const double vloss = masked_cross_entropy(eval.logits, data.labels, split.val_idx).loss;
      if (!std::isfinite(vloss)) {
        result.diverged = true;
        result.error = "validation loss became non-finite at episode " + std::to_string(episode);
        break;
      }
      improved = acc > best_acc || (acc == best_acc && vloss < best_loss);
      if (improved) {
        best_acc = acc;
        best_loss = vloss;
        best = params;
      }
    } else {
      const double tloss = masked_cross_entropy(eval.logits, data.labels, split.train_idx).loss;
      if (!std::isfinite(tloss)) {
        result.diverged = true;
        result.error = "training loss became non-finite at episode " + std::to_string(episode);
        break;
      }
      improved = tloss < best_loss - hp.min_delta;
      if (improved) best_loss = tloss;
    }
    if (improved) {
      since_best = 0;
      result.best_episode = episode;
    } else {
      ++since_best;
    }
    if (since_best >= hp.patience) break;
  }
  if (result.diverged) return result;

  if (has_val) {
    params = std::move(best);
    result.best_val_accuracy = best_acc;
  }
  result.test_accuracy = evaluate(params, spec, op, data, split.test_idx);
  if (trained != nullptr) *trained = std::move(params);
  return result;
}

std::string split_label(SplitMode mode, double percent) {
  if (mode == SplitMode::public_split) return "public";
  std::ostringstream os;
  os << percent * 100.0 << "%";
  if (mode == SplitMode::percent_no_validation) os << "-noval";
  return os.str();
}

TrainReport train(const GraphDataset& data, const Hyperparams& hp, const TrainOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const ModelSpec spec = preset_spec(options.preset, data.features.cols(), data.n_classes, hp);
  const SparseMatrix op = diffusion(data.graph, DiffusionKind::renormalized_adjacency).matrix;

  TrainReport report;
  report.dataset = data.name;
  report.arch = options.preset;
  report.split = split_label(options.split_mode, options.split_percent);
  report.runs.resize(hp.runs);

  auto do_run = [&](std::size_t r) {
    const std::uint64_t seed = run_seed(hp.seed, r);
    SplitSpec split;
    if (options.split_mode == SplitMode::public_split && data.public_split) {
      split = *data.public_split;
    } else {
      split = make_split(data.labels, options.split_mode, options.split_percent, seed);
    }
    RunResult res;
    try {
      res = train_run(data, op, spec, hp, split, seed, r == 0 ? options.first_run_params : nullptr);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NumericalError) throw;
      res.seed = seed;
      res.diverged = true;
      res.error = e.what();
    }
    report.runs[r] = res;
    if (options.on_run) options.on_run(r, res);
  };

  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, hp.runs));
  if (jobs == 1) {
    for (std::size_t r = 0; r < hp.runs; ++r) do_run(r);
  } else {
    std::mutex mu;
    std::size_t next = 0;
    std::exception_ptr first_error;
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (;;) {
          std::size_t r;
          {
            std::lock_guard lock(mu);
            if (next >= hp.runs || first_error) return;
            r = next++;
          }
          try {
            do_run(r);
          } catch (...) {
            std::lock_guard lock(mu);
            if (!first_error) first_error = std::current_exception();
          }
        }
      });
    }
    for (auto& t : workers) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  for (const auto& r : report.runs)
    if (!r.diverged) report.accuracies.push_back(r.test_accuracy);
  if (!report.accuracies.empty()) {
    double sum = 0.0;
    for (double a : report.accuracies) sum += a;
    report.mean = sum / static_cast<double>(report.accuracies.size());
    double sq = 0.0;
    for (double a : report.accuracies) sq += (a - report.mean) * (a - report.mean);
    report.std = std::sqrt(sq / static_cast<double>(report.accuracies.size()));
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace kgcn
