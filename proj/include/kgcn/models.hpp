#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <variant>
#include <vector>

#include "kgcn/linalg.hpp"

namespace kgcn {

/// Node features: dense, or sparse CSR for bag-of-words style inputs. Only
/// the products the models need are exposed.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(DenseMatrix dense) : storage_(std::move(dense)) {}     // NOLINT
  FeatureMatrix(SparseMatrix sparse) : storage_(std::move(sparse)) {}  // NOLINT

  /// Sparse storage when the fraction of nonzeros is at most `max_density`.
  static FeatureMatrix choose_storage(const DenseMatrix& dense, double max_density = 0.1);

  bool is_sparse() const noexcept { return std::holds_alternative<SparseMatrix>(storage_); }
  std::size_t rows() const;
  std::size_t cols() const;

  const DenseMatrix& dense() const { return std::get<DenseMatrix>(storage_); }
  const SparseMatrix& sparse() const { return std::get<SparseMatrix>(storage_); }
  DenseMatrix to_dense() const;

  /// out += X·W[off : off + cols, :]
  void times_accumulate(const DenseMatrix& w, std::size_t w_row_offset, DenseMatrix& out) const;
  /// out[off : off + cols, :] += Xᵀ·G
  void transpose_times_accumulate(const DenseMatrix& g, DenseMatrix& out,
                                  std::size_t out_row_offset) const;
  /// The operator S applied on the left: S·X.
  DenseMatrix left_multiply(const SparseMatrix& s) const;

 private:
  std::variant<DenseMatrix, SparseMatrix> storage_;
};

enum class Architecture { vanilla_gcn, snowball, truncated_krylov };

Architecture parse_architecture(std::string_view name);
std::string_view to_string(Architecture arch);

struct ModelSpec {
  Architecture arch = Architecture::snowball;
  std::size_t n_features = 0;         // F_0
  std::vector<std::size_t> hidden;    // F_1..F_n; depth n = hidden.size()
  std::size_t n_blocks = 1;           // m, truncated Krylov only
  Activation f_act = Activation::tanh;
  Activation g_act = Activation::identity;
  int p = 1;                          // output projection L^p, p ∈ {0,1}
  bool identity_classifier = false;   // C = classifier input, W_n = I
  std::size_t classifier_width = 0;   // F_C (ignored with identity_classifier)
  std::size_t n_classes = 0;          // F_O
  double dropout = 0.0;               // rate in [0, 1)
  bool dropout_classifier = true;     // also drop the classifier input

  std::size_t depth() const noexcept { return hidden.size(); }
  /// Width of layer-l input concatenation (l = depth means the classifier input).
  std::size_t input_width(std::size_t l) const;
  /// Width of C, i.e. the rows of W_C.
  std::size_t c_width() const;
};

/// Throws BadConfig describing the first violated invariant.
void validate(const ModelSpec& spec);

/// Presets used by the training harness.
ModelSpec linear_snowball_spec(std::size_t n_features, std::size_t hidden, std::size_t layers,
                               std::size_t n_classes);
ModelSpec snowball_spec(std::size_t n_features, std::size_t hidden, std::size_t layers,
                        std::size_t n_classes);
ModelSpec truncated_krylov_spec(std::size_t n_features, std::size_t hidden, std::size_t layers,
                                std::size_t n_blocks, std::size_t n_classes);

/// Weights. Vanilla GCN stores its final W_n in `output`, leaving `classifier` empty.
struct ModelParams {
  std::vector<DenseMatrix> layers;  // W_0..W_{n-1}
  DenseMatrix classifier;           // W_n (empty with identity classifier)
  DenseMatrix output;               // W_C

  std::vector<DenseMatrix*> tensors();
  std::vector<const DenseMatrix*> tensors() const;
  std::size_t parameter_count() const;
};

/// Expected shapes in `tensors()` order.
std::vector<std::pair<std::size_t, std::size_t>> parameter_shapes(const ModelSpec& spec);
void check_shapes(const ModelSpec& spec, const ModelParams& params);

ModelParams zeros_like(const ModelParams& params);

enum class InitScheme { glorot_uniform, normal };

ModelParams init_params(const ModelSpec& spec, InitScheme scheme, std::uint64_t seed,
                        double sigma = 1.0);

/// Everything the backward pass needs. Block lists follow the concatenation
/// order of each layer's input.
struct LayerTape {
  std::vector<FeatureMatrix> inputs;  // after dropout
  std::vector<DenseMatrix> masks;     // dropout scale per input block; empty = no dropout
  std::vector<std::size_t> sources;   // hidden index each input came from
  DenseMatrix pre;                    // pre-activation
};

struct ForwardTape {
  std::vector<FeatureMatrix> hidden;  // H_0..H_n (H_0 = X)
  std::vector<LayerTape> layers;
  LayerTape classifier;  // inputs to W_n (or to W_C with an identity classifier)
  DenseMatrix c;         // C (empty with identity classifier)
  DenseMatrix logits;    // pre-softmax
};

/// `dropout_rng` null means inference: no dropout, masks not drawn.
ForwardTape forward_vanilla(const SparseMatrix& op, const FeatureMatrix& x,
                            const ModelParams& params, const ModelSpec& spec,
                            std::mt19937_64* dropout_rng = nullptr);
ForwardTape forward_snowball(const SparseMatrix& op, const FeatureMatrix& x,
                             const ModelParams& params, const ModelSpec& spec,
                             std::mt19937_64* dropout_rng = nullptr);
ForwardTape forward_truncated_krylov(const SparseMatrix& op, const FeatureMatrix& x,
                                     const ModelParams& params, const ModelSpec& spec,
                                     std::mt19937_64* dropout_rng = nullptr);
/// Dispatches on spec.arch.
ForwardTape forward(const SparseMatrix& op, const FeatureMatrix& x, const ModelParams& params,
                    const ModelSpec& spec, std::mt19937_64* dropout_rng = nullptr);

/// Gradients of a scalar loss w.r.t. every weight, given dLoss/dlogits.
ModelParams backward(const SparseMatrix& op, const ForwardTape& tape, const ModelParams& params,
                     const ModelSpec& spec, const DenseMatrix& grad_logits);

struct CollapsedSnowball {
  DenseMatrix krylov;   // K_{n+1}(L, X), N×(n+1)F_0
  DenseMatrix hidden;   // maps K to [H_0..H_n]
  DenseMatrix w_eq;     // maps K to C
};

/// Linear snowball as a single block Krylov layer: [H_0..H_n] = K·hidden and
/// C = K·w_eq, so logits = L^p·K·w_eq·W_C. Throws NotLinear unless f is the
/// identity and C is linear in the hidden blocks.
CollapsedSnowball collapse_linear_snowball(const ModelParams& params, const ModelSpec& spec,
                                           const SparseMatrix& op, const DenseMatrix& x);

}  // namespace kgcn
