#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kgcn/graph.hpp"
#include "kgcn/models.hpp"

namespace kgcn {

/// Graph, features, labels and (optionally) the published split, in memory.
struct GraphDataset {
  std::string name;
  Graph graph;
  FeatureMatrix features;
  std::vector<std::uint16_t> labels;
  std::size_t n_classes = 0;
  bool features_normalized = false;
  std::optional<SplitSpec> public_split;

  std::size_t n_nodes() const noexcept { return graph.n_nodes; }
};

/// Scales every row to unit sum; rows summing to zero are left at zero.
DenseMatrix row_normalize(const DenseMatrix& x);
SparseMatrix row_normalize(const SparseMatrix& x);

/// Planted-partition graph with bag-of-words features, small enough to train
/// in seconds. Each class owns a block of `words_per_class` feature columns;
/// a node draws `words_per_node` words, each from its own class block with
/// probability `topic_prob` and uniformly otherwise.
struct PlantedPartitionOptions {
  std::string name = "toy";
  std::size_t n_nodes = 600;
  std::size_t n_classes = 3;
  std::size_t words_per_class = 40;
  std::size_t noise_words = 60;
  std::size_t words_per_node = 8;
  double topic_prob = 0.35;
  double p_in = 0.02;
  double p_out = 0.002;
  bool normalize = true;
  std::uint64_t seed = 0;
};

/// Builds the dataset and a public split (20 per class, capped val/test).
GraphDataset planted_partition(const PlantedPartitionOptions& options);

}  // namespace kgcn
