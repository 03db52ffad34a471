#include "kgcn/dataset.hpp"

#include <algorithm>
#include <random>

namespace kgcn {

DenseMatrix row_normalize(const DenseMatrix& x) {
  DenseMatrix out = x;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    double sum = 0.0;
    for (double v : row) sum += v;
    if (sum == 0.0) {
      std::fill(row.begin(), row.end(), 0.0);
      continue;
    }
    for (double& v : row) v /= sum;
  }
  return out;
}

SparseMatrix row_normalize(const SparseMatrix& x) {
  std::vector<Triplet> t;
  t.reserve(x.nnz());
  const auto ptr = x.row_ptr();
  const auto idx = x.col_idx();
  const auto val = x.values();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double sum = 0.0;
    for (std::size_t k = ptr[r]; k < ptr[r + 1]; ++k) sum += val[k];
    if (sum == 0.0) continue;
    for (std::size_t k = ptr[r]; k < ptr[r + 1]; ++k) t.push_back({r, idx[k], val[k] / sum});
  }
  return SparseMatrix::from_triplets(x.rows(), x.cols(), std::move(t));
}

GraphDataset planted_partition(const PlantedPartitionOptions& o) {
  if (o.n_classes == 0 || o.n_classes > 65535 || o.n_nodes < o.n_classes) {
    fail(ErrorCode::BadConfig, "planted_partition: bad node/class counts");
  }
  std::mt19937_64 rng(o.seed);
  GraphDataset d;
  d.name = o.name;
  d.n_classes = o.n_classes;
  d.labels.resize(o.n_nodes);
  for (std::size_t i = 0; i < o.n_nodes; ++i) d.labels[i] = static_cast<std::uint16_t>(i % o.n_classes);
  std::shuffle(d.labels.begin(), d.labels.end(), rng);

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < o.n_nodes; ++u)
    for (std::size_t v = u + 1; v < o.n_nodes; ++v)
      if (unif(rng) < (d.labels[u] == d.labels[v] ? o.p_in : o.p_out)) edges.emplace_back(u, v);
  d.graph = build_graph(edges, o.n_nodes);

  const std::size_t n_features = o.n_classes * o.words_per_class + o.noise_words;
  std::uniform_int_distribution<std::size_t> any_word(0, n_features - 1);
  std::uniform_int_distribution<std::size_t> topic_word(0, o.words_per_class - 1);
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < o.n_nodes; ++i) {
    for (std::size_t k = 0; k < o.words_per_node; ++k) {
      const std::size_t w = unif(rng) < o.topic_prob
                                ? d.labels[i] * o.words_per_class + topic_word(rng)
                                : any_word(rng);
      t.push_back({i, w, 1.0});
    }
  }
  // Repeated words are summed, then clipped back to binary indicators.
  SparseMatrix counts = SparseMatrix::from_triplets(o.n_nodes, n_features, std::move(t));
  std::vector<Triplet> binary;
  const auto ptr = counts.row_ptr();
  const auto idx = counts.col_idx();
  for (std::size_t r = 0; r < counts.rows(); ++r)
    for (std::size_t k = ptr[r]; k < ptr[r + 1]; ++k) binary.push_back({r, idx[k], 1.0});
  SparseMatrix x = SparseMatrix::from_triplets(o.n_nodes, n_features, std::move(binary));
  if (o.normalize) x = row_normalize(x);
  d.features = FeatureMatrix(std::move(x));
  d.features_normalized = o.normalize;
  d.public_split = make_split(d.labels, SplitMode::public_split, 0.0, o.seed);
  return d;
}

}  // namespace kgcn
