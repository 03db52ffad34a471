#include "kgcn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

namespace kgcn {

Graph build_graph(std::span<const Edge> edge_list, std::size_t n_nodes) {
  Graph g;
  g.n_nodes = n_nodes;
  g.edges.reserve(edge_list.size());
  for (const auto& [u, v] : edge_list) {
    if (u >= n_nodes || v >= n_nodes) {
      fail(ErrorCode::InvalidEdge, "edge (" + std::to_string(u) + "," + std::to_string(v) +
                                       ") out of range for " + std::to_string(n_nodes) + " nodes");
    }
    if (u == v) continue;
    g.edges.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());

  std::vector<Triplet> triplets;
  triplets.reserve(2 * g.edges.size());
  for (const auto& [u, v] : g.edges) {
    triplets.push_back({u, v, 1.0});
    triplets.push_back({v, u, 1.0});
  }
  g.adjacency = SparseMatrix::from_triplets(n_nodes, n_nodes, std::move(triplets));
  return g;
}

DiffusionKind parse_diffusion_kind(std::string_view name) {
  if (name == "renormalized_adjacency") return DiffusionKind::renormalized_adjacency;
  if (name == "laplacian") return DiffusionKind::laplacian;
  if (name == "normalized_laplacian") return DiffusionKind::normalized_laplacian;
  if (name == "affinity") return DiffusionKind::affinity;
  fail(ErrorCode::BadConfig, "unknown diffusion kind '" + std::string(name) + "'");
}

std::string_view to_string(DiffusionKind kind) {
  switch (kind) {
    case DiffusionKind::renormalized_adjacency: return "renormalized_adjacency";
    case DiffusionKind::laplacian: return "laplacian";
    case DiffusionKind::normalized_laplacian: return "normalized_laplacian";
    case DiffusionKind::affinity: return "affinity";
  }
  return "renormalized_adjacency";
}

DiffusionOperator diffusion(const Graph& graph, DiffusionKind kind) {
  const std::size_t n = graph.n_nodes;
  std::vector<double> degree(n, 0.0);
  for (const auto& [u, v] : graph.edges) {
    degree[u] += 1.0;
    degree[v] += 1.0;
  }

  std::vector<Triplet> t;
  t.reserve(2 * graph.edges.size() + n);
  switch (kind) {
    case DiffusionKind::renormalized_adjacency:
      // D̃^{-1/2}(A+I)D̃^{-1/2}. The product d_u·d_v is commutative, so the
      // result is bitwise symmetric.
      for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.0 / (degree[i] + 1.0)});
      for (const auto& [u, v] : graph.edges) {
        const double w = 1.0 / std::sqrt((degree[u] + 1.0) * (degree[v] + 1.0));
        t.push_back({u, v, w});
        t.push_back({v, u, w});
      }
      break;
    case DiffusionKind::laplacian:
      for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, degree[i]});
      for (const auto& [u, v] : graph.edges) {
        t.push_back({u, v, -1.0});
        t.push_back({v, u, -1.0});
      }
      break;
    case DiffusionKind::normalized_laplacian:
      // Isolated nodes take D^{-1/2} = 0, leaving a unit diagonal.
      for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
      for (const auto& [u, v] : graph.edges) {
        const double w = -1.0 / std::sqrt(degree[u] * degree[v]);
        t.push_back({u, v, w});
        t.push_back({v, u, w});
      }
      break;
    case DiffusionKind::affinity:
      for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
      for (const auto& [u, v] : graph.edges) {
        t.push_back({u, v, 1.0});
        t.push_back({v, u, 1.0});
      }
      break;
  }
  return {SparseMatrix::from_triplets(n, n, std::move(t)), kind};
}

Components connected_components(const Graph& graph) {
  const std::size_t n = graph.n_nodes;
  constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
  Components out;
  out.labels.assign(n, kUnset);
  const auto ptr = graph.adjacency.row_ptr();
  const auto idx = graph.adjacency.col_idx();
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < n; ++s) {
    if (out.labels[s] != kUnset) continue;
    out.labels[s] = out.count;
    stack.push_back(s);
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t k = ptr[u]; k < ptr[u + 1]; ++k) {
        if (out.labels[idx[k]] == kUnset) {
          out.labels[idx[k]] = out.count;
          stack.push_back(idx[k]);
        }
      }
    }
    ++out.count;
  }
  return out;
}

Graph erdos_renyi(std::size_t n, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::BadConfig, "erdos_renyi: p must lie in [0, 1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      if (unif(rng) < p) edges.emplace_back(u, v);
    }
  }
  return build_graph(edges, n);
}

SplitSpec make_split(std::span<const std::uint16_t> labels, SplitMode mode, double percent,
                     std::uint64_t seed) {
  const std::size_t n = labels.size();
  SplitSpec split;
  split.mode = mode;
  split.percent = percent;
  split.seed = seed;
  std::mt19937_64 rng(seed);

  std::vector<bool> used(n, false);
  if (mode == SplitMode::public_split) {
    std::map<std::uint16_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < n; ++i) by_class[labels[i]].push_back(i);
    for (auto& [cls, nodes] : by_class) {
      if (nodes.size() < kPublicPerClass) {
        fail(ErrorCode::InsufficientLabels,
             "class " + std::to_string(cls) + " has " + std::to_string(nodes.size()) +
                 " instances; public split needs " + std::to_string(kPublicPerClass));
      }
      std::shuffle(nodes.begin(), nodes.end(), rng);
      for (std::size_t k = 0; k < kPublicPerClass; ++k) {
        split.train_idx.push_back(nodes[k]);
        used[nodes[k]] = true;
      }
    }
  } else {
    if (!(percent > 0.0 && percent <= 1.0)) {
      fail(ErrorCode::BadConfig, "make_split: percent must lie in (0, 1]");
    }
    const auto n_train = static_cast<std::size_t>(std::floor(percent * static_cast<double>(n) + 1e-9));
    if (n_train == 0) {
      fail(ErrorCode::InsufficientLabels, "make_split: floor(p*N) is zero");
    }
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    for (std::size_t k = 0; k < n_train; ++k) {
      split.train_idx.push_back(all[k]);
      used[all[k]] = true;
    }
  }

  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < n; ++i)
    if (!used[i]) rest.push_back(i);
  std::shuffle(rest.begin(), rest.end(), rng);

  // Small graphs: validation never takes more than half of what is left.
  std::size_t n_val = 0;
  if (mode == SplitMode::public_split) n_val = std::min(kPublicValSize, rest.size() / 2);
  if (mode == SplitMode::percent) n_val = std::min(kPercentValSize, rest.size() / 2);
  split.val_idx.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_val));
  const std::size_t n_test = mode == SplitMode::public_split
                                 ? std::min(kPublicTestSize, rest.size() - n_val)
                                 : rest.size() - n_val;
  split.test_idx.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_val),
                        rest.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));

  std::sort(split.train_idx.begin(), split.train_idx.end());
  std::sort(split.val_idx.begin(), split.val_idx.end());
  std::sort(split.test_idx.begin(), split.test_idx.end());
  return split;
}

}  // namespace kgcn
