#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "graphgp/errors.hpp"
#include "graphgp/matrix.hpp"
#include "graphgp/rng.hpp"

namespace graphgp {

using Edge = std::pair<int, int>;

// Simple undirected weighted graph. Edges are stored normalized (i < j),
// sorted, with unit weights unless given explicitly.
class Graph {
 public:
  Graph(std::size_t num_vertices, std::vector<Edge> edges, Vector weights = {})
      : num_vertices_(num_vertices) {
    if (!weights.empty() && weights.size() != edges.size())
      throw InputError("Graph: weights must parallel edges");
    std::set<Edge> seen;
    edges_.reserve(edges.size());
    weights_.reserve(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
      auto [i, j] = edges[e];
      if (i == j)
        throw InputError("Graph: self-loop at edge " + std::to_string(e) + " = [" +
                         std::to_string(i) + ", " + std::to_string(j) + "]");
      if (i < 0 || j < 0 || static_cast<std::size_t>(i) >= num_vertices_ ||
          static_cast<std::size_t>(j) >= num_vertices_)
        throw InputError("Graph: vertex index out of range at edge " + std::to_string(e) +
                         " = [" + std::to_string(i) + ", " + std::to_string(j) + "]");
      Edge key{std::min(i, j), std::max(i, j)};
      if (!seen.insert(key).second)
        throw InputError("Graph: duplicate edge " + std::to_string(e) + " = [" +
                         std::to_string(i) + ", " + std::to_string(j) + "]");
      const double w = weights.empty() ? 1.0 : weights[e];
      if (!(w > 0.0))
        throw InputError("Graph: non-positive weight at edge " + std::to_string(e));
      edges_.push_back(key);
      weights_.push_back(w);
    }
    // canonical order
    std::vector<std::size_t> order(edges_.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return edges_[a] < edges_[b]; });
    std::vector<Edge> se(edges_.size());
    Vector sw(weights_.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
      se[k] = edges_[order[k]];
      sw[k] = weights_[order[k]];
    }
    edges_ = std::move(se);
    weights_ = std::move(sw);
  }

  std::size_t num_vertices() const { return num_vertices_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Vector& weights() const { return weights_; }

  // Weighted degree (equals neighbor count on unit-weight graphs).
  Vector degrees() const {
    Vector d(num_vertices_, 0.0);
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      d[edges_[e].first] += weights_[e];
      d[edges_[e].second] += weights_[e];
    }
    return d;
  }

  std::vector<std::vector<int>> neighbor_lists() const {
    std::vector<std::vector<int>> nbr(num_vertices_);
    for (const auto& [i, j] : edges_) {
      nbr[i].push_back(j);
      nbr[j].push_back(i);
    }
    return nbr;
  }

  bool operator==(const Graph& o) const {
    return num_vertices_ == o.num_vertices_ && edges_ == o.edges_ && weights_ == o.weights_;
  }

 private:
  std::size_t num_vertices_;
  std::vector<Edge> edges_;
  Vector weights_;
};

// Ordered, distinct vertex list for induced-subgraph work.
struct VertexSubset {
  std::vector<int> vertices;

  explicit VertexSubset(std::vector<int> v) : vertices(std::move(v)) {
    std::set<int> seen;
    for (int x : vertices)
      if (!seen.insert(x).second)
        throw InputError("VertexSubset: duplicate vertex " + std::to_string(x));
  }

  static VertexSubset all(std::size_t m) {
    std::vector<int> v(m);
    for (std::size_t i = 0; i < m; ++i) v[i] = static_cast<int>(i);
    return VertexSubset(std::move(v));
  }

  std::size_t size() const { return vertices.size(); }

  void validate_against(std::size_t m) const {
    if (vertices.size() > m) throw InputError("VertexSubset: larger than vertex set");
    for (int v : vertices)
      if (v < 0 || static_cast<std::size_t>(v) >= m)
        throw InputError("VertexSubset: vertex " + std::to_string(v) + " out of range");
  }
};

inline Matrix adjacency(const Graph& g) {
  const std::size_t m = g.num_vertices();
  Matrix a(m, m);
  for (std::size_t e = 0; e < g.edges().size(); ++e) {
    const auto& [i, j] = g.edges()[e];
    a(i, j) = g.weights()[e];
    a(j, i) = g.weights()[e];
  }
  return a;
}

// L = D - A, or the symmetric normalization D^{-1/2} L D^{-1/2}.
// Isolated vertices get a zero row/column in the normalized form.
inline Matrix laplacian(const Graph& g, bool normalized = false) {
  const std::size_t m = g.num_vertices();
  Matrix l = adjacency(g);
  const Vector d = g.degrees();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) l(i, j) = -l(i, j);
    l(i, i) = d[i];
  }
  if (!normalized) return l;
  Vector dinv_sqrt(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    dinv_sqrt[i] = d[i] > 0.0 ? 1.0 / std::sqrt(d[i]) : 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) l(i, j) *= dinv_sqrt[i] * dinv_sqrt[j];
  return l;
}

inline Graph induced_subgraph(const Graph& g, const VertexSubset& s) {
  s.validate_against(g.num_vertices());
  std::map<int, int> reindex;
  for (std::size_t k = 0; k < s.vertices.size(); ++k)
    reindex[s.vertices[k]] = static_cast<int>(k);
  std::vector<Edge> edges;
  Vector weights;
  for (std::size_t e = 0; e < g.edges().size(); ++e) {
    const auto& [i, j] = g.edges()[e];
    auto it = reindex.find(i);
    auto jt = reindex.find(j);
    if (it != reindex.end() && jt != reindex.end()) {
      edges.emplace_back(it->second, jt->second);
      weights.push_back(g.weights()[e]);
    }
  }
  return Graph(s.vertices.size(), std::move(edges), std::move(weights));
}

// Pairing (configuration) model with rejection of self-loops and multi-edges.
// Dense degrees (k above (m-1)/2) go through the complement of a sparse
// regular graph, where the pairing model succeeds quickly.
inline Graph random_k_regular(std::size_t m, std::size_t k, std::uint64_t seed) {
  if (k >= m || (m * k) % 2 != 0)
    throw InfeasibleDegree("random_k_regular: need k < m and m*k even (m=" +
                           std::to_string(m) + ", k=" + std::to_string(k) + ")");
  if (2 * k > m - 1) {
    const Graph sparse = random_k_regular(m, m - 1 - k, seed);
    std::set<Edge> present(sparse.edges().begin(), sparse.edges().end());
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j)
        if (!present.count({static_cast<int>(i), static_cast<int>(j)}))
          edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
    return Graph(m, std::move(edges));
  }
  auto rng = make_rng(seed);
  constexpr int kMaxRestarts = 100;
  for (int attempt = 0; attempt < kMaxRestarts; ++attempt) {
    std::vector<int> stubs;
    stubs.reserve(m * k);
    for (std::size_t v = 0; v < m; ++v)
      for (std::size_t c = 0; c < k; ++c) stubs.push_back(static_cast<int>(v));
    std::set<Edge> seen;
    bool stuck = false;
    // pair stubs; self-loops and repeats go back into the pool until a full
    // pass makes no progress
    while (!stubs.empty() && !stuck) {
      std::shuffle(stubs.begin(), stubs.end(), rng);
      std::vector<int> leftover;
      for (std::size_t p = 0; p + 1 < stubs.size(); p += 2) {
        const int i = stubs[p], j = stubs[p + 1];
        if (i != j && seen.insert({std::min(i, j), std::max(i, j)}).second) continue;
        leftover.push_back(i);
        leftover.push_back(j);
      }
      stuck = leftover.size() == stubs.size();
      stubs = std::move(leftover);
    }
    if (!stuck) return Graph(m, std::vector<Edge>(seen.begin(), seen.end()));
  }
  throw GenerationFailure("random_k_regular: no simple pairing after 100 restarts");
}

// Undirected union rule: edge (i, j) iff j is among i's k nearest neighbors
// or vice versa. Distance ties break toward the lower index.
inline Graph knn_graph(const Matrix& points, std::size_t k) {
  const std::size_t m = points.rows();
  if (m <= k) throw InputError("knn_graph: need more points than neighbors");
  std::set<Edge> edges;
  std::vector<std::pair<double, int>> dist;
  for (std::size_t i = 0; i < m; ++i) {
    dist.clear();
    for (std::size_t j = 0; j < m; ++j) {
      if (j == i) continue;
      dist.emplace_back(squared_distance(points.row(i), points.row(j)),
                        static_cast<int>(j));
    }
    std::sort(dist.begin(), dist.end());
    for (std::size_t c = 0; c < k; ++c) {
      const int j = dist[c].second;
      edges.insert({std::min<int>(static_cast<int>(i), j), std::max<int>(static_cast<int>(i), j)});
    }
  }
  return Graph(m, std::vector<Edge>(edges.begin(), edges.end()));
}

}  // namespace graphgp
