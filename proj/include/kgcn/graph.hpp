#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kgcn/linalg.hpp"

namespace kgcn {

using Edge = std::pair<std::size_t, std::size_t>;

/// Undirected, unweighted graph. Edges are stored once with u < v, sorted.
struct Graph {
  std::size_t n_nodes = 0;
  std::vector<Edge> edges;
  SparseMatrix adjacency;  // symmetric 0/1, zero diagonal

  std::size_t n_edges() const noexcept { return edges.size(); }
};

/// Symmetrizes, drops self-loops and duplicates. Throws InvalidEdge on an
/// out-of-range endpoint.
Graph build_graph(std::span<const Edge> edge_list, std::size_t n_nodes);

enum class DiffusionKind { renormalized_adjacency, laplacian, normalized_laplacian, affinity };

DiffusionKind parse_diffusion_kind(std::string_view name);
std::string_view to_string(DiffusionKind kind);

struct DiffusionOperator {
  SparseMatrix matrix;
  DiffusionKind kind = DiffusionKind::renormalized_adjacency;
};

DiffusionOperator diffusion(const Graph& graph, DiffusionKind kind);

struct Components {
  std::size_t count = 0;
  std::vector<std::size_t> labels;  // in [0, count), numbered by first appearance
};

Components connected_components(const Graph& graph);

/// G(n, p): each unordered pair independently with probability p.
Graph erdos_renyi(std::size_t n, double p, std::uint64_t seed);

enum class SplitMode { public_split, percent, percent_no_validation };

struct SplitSpec {
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  std::vector<std::size_t> test_idx;
  SplitMode mode = SplitMode::public_split;
  double percent = 0.0;  // fraction in (0, 1], used by the percent modes
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kPublicPerClass = 20;
inline constexpr std::size_t kPublicValSize = 500;
inline constexpr std::size_t kPublicTestSize = 1000;
inline constexpr std::size_t kPercentValSize = 500;

/// Random split. Public mode samples 20 per class / 500 val / 1000 test;
/// percent modes draw floor(p·N) training nodes uniformly over all nodes.
/// Validation is capped at half of the unlabeled remainder on small graphs.
/// Index sets are returned sorted.
SplitSpec make_split(std::span<const std::uint16_t> labels, SplitMode mode, double percent,
                     std::uint64_t seed);

}  // namespace kgcn
