/*
 * Copyright 2026 The pdc-mesh Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef PDC_GRAPH_HPP_
#define PDC_GRAPH_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "pdc/common.hpp"

namespace pdc {

struct Edge {
  int i;
  int j;
  bool operator==(const Edge& o) const { return i == o.i && j == o.j; }
  bool operator<(const Edge& o) const { return i < o.i || (i == o.i && j < o.j); }
};

// Undirected agent topology. Edges are stored with i < j and sorted, which
// fixes the row order of the incidence matrix.
class Graph {
 public:
  // Accepts pairs in any orientation and order; rejects self-loops,
  // duplicates and out-of-range agents.
  Graph(int n_agents, const std::vector<std::pair<int, int>>& pairs);

  int n_agents() const { return n_; }
  int n_edges() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<int>& neighbors(int i) const { return adj_.at(i); }
  int degree(int i) const { return static_cast<int>(adj_.at(i).size()); }
  int max_degree() const;
  bool has_edge(int i, int j) const;
  bool connected() const;

  // Index of edge (min, max) in the canonical order, or -1.
  int edge_index(int i, int j) const;

 private:
  int n_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> adj_;
};

Graph build_cycle(int n_agents);
Graph build_path(int n_agents);
Graph build_random_connected(int n_agents, double edge_prob, std::uint64_t seed);

// Edge-list text: header `agents N`, then one `i j` pair per line.
void write_edge_list(std::ostream& os, const Graph& g);
Graph read_edge_list(std::istream& is);
Graph read_edge_list_file(const std::string& path);

struct GraphMatrices {
  Mat incidence;           // Ã, |E| x N
  Mat degree;              // D̃
  Mat signed_laplacian;    // L̃⁻ = ÃᵀÃ
  Mat signless_laplacian;  // L̃⁺ = 2D̃ − L̃⁻
  int block_size = 1;

  // Kronecker expansions with I_M.
  Mat A() const { return kron_identity(incidence, block_size); }
  Mat L_minus() const { return kron_identity(signed_laplacian, block_size); }
  Mat L_plus() const { return kron_identity(signless_laplacian, block_size); }
  Mat D() const { return kron_identity(degree, block_size); }
};

GraphMatrices derive_matrices(const Graph& g, int block_size = 1);

struct SpectralSummary {
  double lambda_max_plus = 0.0;
  double sigma_min_minus = 0.0;  // smallest nonzero eigenvalue of L̃⁻
  double sigma_max_minus = 0.0;
  int zero_multiplicity = 0;
  bool connected = false;
};

// Computed on the N x N base matrices. A disconnected graph is reported
// through `connected` and `zero_multiplicity`; callers that need
// connectivity use require_connected.
SpectralSummary spectral_summary(const GraphMatrices& m);

// Throws std::invalid_argument naming the component count.
void require_connected(const Graph& g);

}  // namespace pdc

#endif  // PDC_GRAPH_HPP_
