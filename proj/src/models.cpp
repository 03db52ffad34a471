#include "kgcn/models.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "kgcn/krylov.hpp"

namespace kgcn {

// ------------------------------------------------------------- FeatureMatrix

FeatureMatrix FeatureMatrix::choose_storage(const DenseMatrix& dense, double max_density) {
  std::size_t nnz = 0;
  for (double v : dense.values()) nnz += v != 0.0 ? 1 : 0;
  const double density =
      dense.empty() ? 1.0 : static_cast<double>(nnz) / static_cast<double>(dense.size());
  if (density <= max_density) return FeatureMatrix(SparseMatrix::from_dense(dense));
  return FeatureMatrix(dense);
}

std::size_t FeatureMatrix::rows() const {
  return std::visit([](const auto& m) { return m.rows(); }, storage_);
}

std::size_t FeatureMatrix::cols() const {
  return std::visit([](const auto& m) { return m.cols(); }, storage_);
}

DenseMatrix FeatureMatrix::to_dense() const {
  if (is_sparse()) return sparse().to_dense();
  return dense();
}

void FeatureMatrix::times_accumulate(const DenseMatrix& w, std::size_t w_row_offset,
                                     DenseMatrix& out) const {
  if (is_sparse()) {
    spmm_accumulate(sparse(), w, w_row_offset, out);
  } else {
    gemm_accumulate(dense(), w, w_row_offset, out);
  }
}

void FeatureMatrix::transpose_times_accumulate(const DenseMatrix& g, DenseMatrix& out,
                                               std::size_t out_row_offset) const {
  if (is_sparse()) {
    spmm_transposed_accumulate(sparse(), g, out, out_row_offset);
  } else {
    gemm_tn_accumulate(dense(), g, out, out_row_offset);
  }
}

DenseMatrix FeatureMatrix::left_multiply(const SparseMatrix& s) const {
  return spmm(s, to_dense());
}

// ----------------------------------------------------------------- ModelSpec

Architecture parse_architecture(std::string_view name) {
  if (name == "vanilla_gcn" || name == "vanilla") return Architecture::vanilla_gcn;
  if (name == "snowball") return Architecture::snowball;
  if (name == "truncated_krylov") return Architecture::truncated_krylov;
  fail(ErrorCode::BadConfig, "unknown architecture '" + std::string(name) + "'");
}

std::string_view to_string(Architecture arch) {
  switch (arch) {
    case Architecture::vanilla_gcn: return "vanilla_gcn";
    case Architecture::snowball: return "snowball";
    case Architecture::truncated_krylov: return "truncated_krylov";
  }
  return "snowball";
}

namespace {

std::size_t block_width(const ModelSpec& spec, std::size_t i) {
  return i == 0 ? spec.n_features : spec.hidden[i - 1];
}

}  // namespace

std::size_t ModelSpec::input_width(std::size_t l) const {
  switch (arch) {
    case Architecture::vanilla_gcn:
      return block_width(*this, l);
    case Architecture::snowball: {
      std::size_t w = 0;
      for (std::size_t i = 0; i <= l; ++i) w += block_width(*this, i);
      return w;
    }
    case Architecture::truncated_krylov:
      return l < depth() ? n_blocks * block_width(*this, l) : block_width(*this, l);
  }
  return 0;
}

std::size_t ModelSpec::c_width() const {
  if (arch == Architecture::vanilla_gcn || identity_classifier) return input_width(depth());
  return classifier_width;
}

void validate(const ModelSpec& spec) {
  auto bad = [](const std::string& msg) { fail(ErrorCode::BadConfig, "model: " + msg); };
  if (spec.n_features == 0) bad("n_features must be positive");
  if (spec.n_classes == 0) bad("n_classes must be positive");
  for (std::size_t w : spec.hidden)
    if (w == 0) bad("hidden widths must be positive");
  if (spec.p != 0 && spec.p != 1) bad("p must be 0 or 1");
  if (spec.arch == Architecture::truncated_krylov && spec.n_blocks == 0) bad("n_blocks must be >= 1");
  if (!(spec.dropout >= 0.0 && spec.dropout < 1.0)) bad("dropout must lie in [0, 1)");
  if (spec.arch != Architecture::vanilla_gcn && !spec.identity_classifier &&
      spec.classifier_width == 0) {
    bad("classifier_width must be positive without an identity classifier");
  }
}

ModelSpec linear_snowball_spec(std::size_t n_features, std::size_t hidden, std::size_t layers,
                               std::size_t n_classes) {
  ModelSpec s;
  s.arch = Architecture::snowball;
  s.n_features = n_features;
  s.hidden.assign(layers, hidden);
  s.f_act = Activation::identity;
  s.g_act = Activation::identity;
  s.p = 1;
  s.identity_classifier = true;
  s.n_classes = n_classes;
  return s;
}

ModelSpec snowball_spec(std::size_t n_features, std::size_t hidden, std::size_t layers,
                        std::size_t n_classes) {
  ModelSpec s = linear_snowball_spec(n_features, hidden, layers, n_classes);
  s.f_act = Activation::tanh;
  return s;
}

ModelSpec truncated_krylov_spec(std::size_t n_features, std::size_t hidden, std::size_t layers,
                                std::size_t n_blocks, std::size_t n_classes) {
  ModelSpec s;
  s.arch = Architecture::truncated_krylov;
  s.n_features = n_features;
  s.hidden.assign(layers, hidden);
  s.n_blocks = n_blocks;
  s.f_act = Activation::tanh;
  s.g_act = Activation::tanh;
  s.p = 0;
  s.identity_classifier = false;
  s.classifier_width = hidden;
  s.n_classes = n_classes;
  return s;
}

// --------------------------------------------------------------- ModelParams

std::vector<DenseMatrix*> ModelParams::tensors() {
  std::vector<DenseMatrix*> out;
  for (auto& w : layers) out.push_back(&w);
  if (!classifier.empty()) out.push_back(&classifier);
  out.push_back(&output);
  return out;
}

std::vector<const DenseMatrix*> ModelParams::tensors() const {
  std::vector<const DenseMatrix*> out;
  for (const auto& w : layers) out.push_back(&w);
  if (!classifier.empty()) out.push_back(&classifier);
  out.push_back(&output);
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto* t : tensors()) n += t->size();
  return n;
}

std::vector<std::pair<std::size_t, std::size_t>> parameter_shapes(const ModelSpec& spec) {
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  for (std::size_t l = 0; l < spec.depth(); ++l) shapes.emplace_back(spec.input_width(l), spec.hidden[l]);
  if (spec.arch != Architecture::vanilla_gcn && !spec.identity_classifier) {
    shapes.emplace_back(spec.input_width(spec.depth()), spec.classifier_width);
  }
  shapes.emplace_back(spec.c_width(), spec.n_classes);
  return shapes;
}

void check_shapes(const ModelSpec& spec, const ModelParams& params) {
  const auto expected = parameter_shapes(spec);
  const auto actual = params.tensors();
  if (expected.size() != actual.size()) {
    fail(ErrorCode::ShapeError, "params: expected " + std::to_string(expected.size()) +
                                    " tensors, got " + std::to_string(actual.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (actual[i]->rows() != expected[i].first || actual[i]->cols() != expected[i].second) {
      fail(ErrorCode::ShapeError,
           "params: tensor " + std::to_string(i) + " is " + std::to_string(actual[i]->rows()) +
               "x" + std::to_string(actual[i]->cols()) + ", expected " +
               std::to_string(expected[i].first) + "x" + std::to_string(expected[i].second));
    }
  }
}

ModelParams zeros_like(const ModelParams& params) {
  ModelParams z;
  for (const auto& w : params.layers) z.layers.emplace_back(w.rows(), w.cols());
  z.classifier = DenseMatrix(params.classifier.rows(), params.classifier.cols());
  z.output = DenseMatrix(params.output.rows(), params.output.cols());
  return z;
}

ModelParams init_params(const ModelSpec& spec, InitScheme scheme, std::uint64_t seed,
                        double sigma) {
  validate(spec);
  const auto shapes = parameter_shapes(spec);
  std::mt19937_64 rng(seed);
  std::vector<DenseMatrix> mats;
  for (const auto& [rows, cols] : shapes) {
    DenseMatrix w(rows, cols);
    if (scheme == InitScheme::glorot_uniform) {
      const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : w.values()) v = dist(rng);
    } else {
      std::normal_distribution<double> dist(0.0, sigma);
      for (auto& v : w.values()) v = dist(rng);
    }
    mats.push_back(std::move(w));
  }
  ModelParams p;
  const std::size_t n = spec.depth();
  for (std::size_t l = 0; l < n; ++l) p.layers.push_back(std::move(mats[l]));
  if (mats.size() == n + 2) p.classifier = std::move(mats[n]);
  p.output = std::move(mats.back());
  return p;
}

// ------------------------------------------------------------------- forward

namespace {

FeatureMatrix drop(const FeatureMatrix& in, double rate, std::mt19937_64& rng, DenseMatrix* mask) {
  const double keep = 1.0 - rate;
  const double scale = 1.0 / keep;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (in.is_sparse()) {
    const auto& s = in.sparse();
    std::vector<Triplet> t;
    t.reserve(s.nnz());
    const auto ptr = s.row_ptr();
    const auto idx = s.col_idx();
    const auto val = s.values();
    for (std::size_t r = 0; r < s.rows(); ++r) {
      for (std::size_t k = ptr[r]; k < ptr[r + 1]; ++k) {
        if (unif(rng) < keep) t.push_back({r, idx[k], val[k] * scale});
      }
    }
    return FeatureMatrix(SparseMatrix::from_triplets(s.rows(), s.cols(), std::move(t)));
  }
  const auto& d = in.dense();
  DenseMatrix m(d.rows(), d.cols());
  for (auto& v : m.values()) v = unif(rng) < keep ? scale : 0.0;
  DenseMatrix out = hadamard(d, m);
  if (mask != nullptr) *mask = std::move(m);
  return FeatureMatrix(std::move(out));
}

// Gathers hidden blocks `sources` as one layer's input, applying dropout when
// training. Masks are kept only where gradients flow back (source > 0).
LayerTape gather(const ForwardTape& tape, const std::vector<std::size_t>& sources,
                 double rate, std::mt19937_64* rng) {
  LayerTape lt;
  lt.sources = sources;
  const bool active = rng != nullptr && rate > 0.0;
  for (std::size_t s : sources) {
    if (!active) {
      lt.inputs.push_back(tape.hidden[s]);
      continue;
    }
    DenseMatrix mask;
    lt.inputs.push_back(drop(tape.hidden[s], rate, *rng, s > 0 ? &mask : nullptr));
    lt.masks.push_back(std::move(mask));
  }
  return lt;
}

std::vector<std::size_t> range_to(std::size_t last) {
  std::vector<std::size_t> v(last + 1);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

// Σ_i inputs[i]·W[rows of block i]
DenseMatrix block_product(const LayerTape& lt, const DenseMatrix& w) {
  const std::size_t n = lt.inputs.front().rows();
  DenseMatrix out(n, w.cols());
  std::size_t off = 0;
  for (const auto& in : lt.inputs) {
    in.times_accumulate(w, off, out);
    off += in.cols();
  }
  if (off != w.rows()) fail(ErrorCode::ShapeError, "layer input width does not match weight rows");
  return out;
}

void check_input(const SparseMatrix& op, const FeatureMatrix& x, const ModelSpec& spec,
                 const ModelParams& params) {
  validate(spec);
  check_shapes(spec, params);
  if (op.rows() != op.cols() || op.rows() != x.rows()) {
    fail(ErrorCode::ShapeError, "operator and feature row counts differ");
  }
  if (x.cols() != spec.n_features) {
    fail(ErrorCode::ShapeError, "features have " + std::to_string(x.cols()) +
                                    " columns, spec expects " + std::to_string(spec.n_features));
  }
}

double classifier_rate(const ModelSpec& spec) { return spec.dropout_classifier ? spec.dropout : 0.0; }

// C (or the identity classifier input) → logits = L^p·C·W_C
void finish_classifier(const SparseMatrix& op, ForwardTape& tape, const ModelParams& params,
                       const ModelSpec& spec) {
  DenseMatrix q;
  if (spec.identity_classifier) {
    q = block_product(tape.classifier, params.output);
  } else {
    tape.classifier.pre = block_product(tape.classifier, params.classifier);
    tape.c = activation(tape.classifier.pre, spec.g_act);
    q = gemm(tape.c, params.output);
  }
  tape.logits = spec.p == 1 ? spmm(op, q) : std::move(q);
}

}  // namespace

ForwardTape forward_vanilla(const SparseMatrix& op, const FeatureMatrix& x,
                            const ModelParams& params, const ModelSpec& spec,
                            std::mt19937_64* dropout_rng) {
  if (spec.arch != Architecture::vanilla_gcn) fail(ErrorCode::BadConfig, "forward_vanilla: wrong arch");
  check_input(op, x, spec, params);
  ForwardTape tape;
  tape.hidden.push_back(x);
  for (std::size_t l = 0; l < spec.depth(); ++l) {
    LayerTape lt = gather(tape, {l}, spec.dropout, dropout_rng);
    lt.pre = spmm(op, block_product(lt, params.layers[l]));
    tape.hidden.emplace_back(activation(lt.pre, spec.f_act));
    tape.layers.push_back(std::move(lt));
  }
  tape.classifier = gather(tape, {spec.depth()}, classifier_rate(spec), dropout_rng);
  tape.logits = spmm(op, block_product(tape.classifier, params.output));
  return tape;
}

ForwardTape forward_snowball(const SparseMatrix& op, const FeatureMatrix& x,
                             const ModelParams& params, const ModelSpec& spec,
                             std::mt19937_64* dropout_rng) {
  if (spec.arch != Architecture::snowball) fail(ErrorCode::BadConfig, "forward_snowball: wrong arch");
  check_input(op, x, spec, params);
  ForwardTape tape;
  tape.hidden.push_back(x);
  for (std::size_t l = 0; l < spec.depth(); ++l) {
    LayerTape lt = gather(tape, range_to(l), spec.dropout, dropout_rng);
    lt.pre = spmm(op, block_product(lt, params.layers[l]));
    tape.hidden.emplace_back(activation(lt.pre, spec.f_act));
    tape.layers.push_back(std::move(lt));
  }
  tape.classifier = gather(tape, range_to(spec.depth()), classifier_rate(spec), dropout_rng);
  finish_classifier(op, tape, params, spec);
  return tape;
}

ForwardTape forward_truncated_krylov(const SparseMatrix& op, const FeatureMatrix& x,
                                     const ModelParams& params, const ModelSpec& spec,
                                     std::mt19937_64* dropout_rng) {
  if (spec.arch != Architecture::truncated_krylov) {
    fail(ErrorCode::BadConfig, "forward_truncated_krylov: wrong arch");
  }
  check_input(op, x, spec, params);
  const std::size_t m = spec.n_blocks;
  ForwardTape tape;
  tape.hidden.push_back(x);
  for (std::size_t l = 0; l < spec.depth(); ++l) {
    LayerTape lt = gather(tape, {l}, spec.dropout, dropout_rng);
    const FeatureMatrix& in = lt.inputs.front();
    const std::size_t width = in.cols();
    const DenseMatrix& w = params.layers[l];
    // [H, LH, …, L^{m-1}H]·W = Σ_j L^j·(H·W_j), evaluated in Horner form.
    DenseMatrix acc(in.rows(), w.cols());
    in.times_accumulate(w, (m - 1) * width, acc);
    for (std::size_t j = m - 1; j-- > 0;) {
      acc = spmm(op, acc);
      in.times_accumulate(w, j * width, acc);
    }
    lt.pre = std::move(acc);
    tape.hidden.emplace_back(activation(lt.pre, spec.f_act));
    tape.layers.push_back(std::move(lt));
  }
  tape.classifier = gather(tape, {spec.depth()}, classifier_rate(spec), dropout_rng);
  finish_classifier(op, tape, params, spec);
  return tape;
}

ForwardTape forward(const SparseMatrix& op, const FeatureMatrix& x, const ModelParams& params,
                    const ModelSpec& spec, std::mt19937_64* dropout_rng) {
  switch (spec.arch) {
    case Architecture::vanilla_gcn: return forward_vanilla(op, x, params, spec, dropout_rng);
    case Architecture::snowball: return forward_snowball(op, x, params, spec, dropout_rng);
    case Architecture::truncated_krylov:
      return forward_truncated_krylov(op, x, params, spec, dropout_rng);
  }
  fail(ErrorCode::BadConfig, "forward: unknown architecture");
}

// ------------------------------------------------------------------ backward

namespace {

// R·W[off : off + width, :]ᵀ
DenseMatrix times_block_transpose(const DenseMatrix& r, const DenseMatrix& w, std::size_t off,
                                  std::size_t width) {
  return gemm_nt(r, row_block(w, off, off + width));
}

// Routes dLoss/d(input block i) back to the hidden block it came from.
void route_back(std::vector<DenseMatrix>& grad_hidden, const LayerTape& lt, std::size_t i,
                const DenseMatrix& grad_input) {
  const std::size_t src = lt.sources[i];
  if (src == 0) return;
  if (lt.masks.empty()) {
    axpy(grad_hidden[src], 1.0, grad_input);
  } else {
    axpy(grad_hidden[src], 1.0, hadamard(grad_input, lt.masks[i]));
  }
}

// Backward through out = Σ_i inputs[i]·W[block i], given G = dLoss/dout.
void block_product_backward(const LayerTape& lt, const DenseMatrix& w, const DenseMatrix& g,
                            DenseMatrix& grad_w, std::vector<DenseMatrix>& grad_hidden) {
  std::size_t off = 0;
  for (std::size_t i = 0; i < lt.inputs.size(); ++i) {
    const auto& in = lt.inputs[i];
    in.transpose_times_accumulate(g, grad_w, off);
    if (lt.sources[i] > 0) route_back(grad_hidden, lt, i, times_block_transpose(g, w, off, in.cols()));
    off += in.cols();
  }
}

}  // namespace

ModelParams backward(const SparseMatrix& op, const ForwardTape& tape, const ModelParams& params,
                     const ModelSpec& spec, const DenseMatrix& grad_logits) {
  check_shapes(spec, params);
  const std::size_t n = spec.depth();
  if (tape.hidden.size() != n + 1 || tape.layers.size() != n) {
    fail(ErrorCode::ShapeError, "backward: tape does not match the model depth");
  }
  if (grad_logits.rows() != tape.logits.rows() || grad_logits.cols() != tape.logits.cols()) {
    fail(ErrorCode::ShapeError, "backward: grad_logits shape differs from logits");
  }
  const std::size_t n_nodes = tape.logits.rows();
  ModelParams grads = zeros_like(params);
  std::vector<DenseMatrix> grad_hidden(n + 1);
  for (std::size_t i = 1; i <= n; ++i) grad_hidden[i] = DenseMatrix(n_nodes, spec.hidden[i - 1]);

  // Output projection.
  const bool project = spec.arch == Architecture::vanilla_gcn || spec.p == 1;
  const DenseMatrix g_out = project ? spmm_transposed(op, grad_logits) : grad_logits;

  if (spec.arch == Architecture::vanilla_gcn || spec.identity_classifier) {
    block_product_backward(tape.classifier, params.output, g_out, grads.output, grad_hidden);
  } else {
    gemm_tn_accumulate(tape.c, g_out, grads.output, 0);
    const DenseMatrix grad_c = gemm_nt(g_out, params.output);
    const DenseMatrix grad_u = hadamard(grad_c, activation_grad(tape.classifier.pre, spec.g_act));
    block_product_backward(tape.classifier, params.classifier, grad_u, grads.classifier, grad_hidden);
  }

  for (std::size_t l = n; l-- > 0;) {
    const LayerTape& lt = tape.layers[l];
    const DenseMatrix grad_pre = hadamard(grad_hidden[l + 1], activation_grad(lt.pre, spec.f_act));
    const DenseMatrix& w = params.layers[l];
    if (spec.arch == Architecture::truncated_krylov) {
      const FeatureMatrix& in = lt.inputs.front();
      const std::size_t width = in.cols();
      DenseMatrix r = grad_pre;  // (Lᵀ)^j·grad_pre
      DenseMatrix grad_in(n_nodes, width);
      for (std::size_t j = 0; j < spec.n_blocks; ++j) {
        if (j > 0) r = spmm_transposed(op, r);
        in.transpose_times_accumulate(r, grads.layers[l], j * width);
        if (l > 0) axpy(grad_in, 1.0, times_block_transpose(r, w, j * width, width));
      }
      if (l > 0) route_back(grad_hidden, lt, 0, grad_in);
    } else {
      const DenseMatrix r = spmm_transposed(op, grad_pre);
      block_product_backward(lt, w, r, grads.layers[l], grad_hidden);
    }
  }
  return grads;
}

// --------------------------------------------------------------- equivalence

CollapsedSnowball collapse_linear_snowball(const ModelParams& params, const ModelSpec& spec,
                                           const SparseMatrix& op, const DenseMatrix& x) {
  if (spec.arch != Architecture::snowball) {
    fail(ErrorCode::NotLinear, "collapse_linear_snowball: architecture is not snowball");
  }
  if (spec.f_act != Activation::identity) {
    fail(ErrorCode::NotLinear, "collapse_linear_snowball: f must be the identity");
  }
  if (!spec.identity_classifier && spec.g_act != Activation::identity) {
    fail(ErrorCode::NotLinear, "collapse_linear_snowball: g must be the identity");
  }
  check_shapes(spec, params);
  const std::size_t n = spec.depth();
  const std::size_t f0 = spec.n_features;
  const std::size_t dim = (n + 1) * f0;

  CollapsedSnowball out;
  out.krylov = block_krylov_matrix(op, x, n + 1);

  // H_i = K·M_i. Multiplying by L moves every block of K one step right, so
  // M_{l+1} = shift(Σ_i M_i·W_l^{(i)}): one block-structured factor per layer.
  std::vector<DenseMatrix> coeff;
  coeff.push_back(DenseMatrix(dim, f0));
  for (std::size_t i = 0; i < f0; ++i) coeff[0](i, i) = 1.0;
  for (std::size_t l = 0; l < n; ++l) {
    const DenseMatrix& w = params.layers[l];
    DenseMatrix mixed(dim, w.cols());
    std::size_t off = 0;
    for (std::size_t i = 0; i <= l; ++i) {
      gemm_accumulate(coeff[i], w, off, mixed);
      off += coeff[i].cols();
    }
    DenseMatrix shifted(dim, w.cols());
    std::copy(mixed.data(), mixed.data() + (dim - f0) * w.cols(), shifted.data() + f0 * w.cols());
    coeff.push_back(std::move(shifted));
  }
  out.hidden = hconcat(coeff);
  out.w_eq = spec.identity_classifier ? out.hidden : gemm(out.hidden, params.classifier);
  return out;
}

}  // namespace kgcn
