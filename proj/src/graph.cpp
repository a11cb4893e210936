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
#include "pdc/graph.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace pdc {

Graph::Graph(int n_agents, const std::vector<std::pair<int, int>>& pairs) : n_(n_agents) {
  if (n_agents < 1) throw std::invalid_argument("graph needs at least one agent");
  edges_.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    if (a < 0 || b < 0 || a >= n_agents || b >= n_agents)
      throw std::invalid_argument("edge (" + std::to_string(a) + "," + std::to_string(b) +
                                  ") out of range");
    if (a == b) throw std::invalid_argument("self-loop at agent " + std::to_string(a));
    edges_.push_back({std::min(a, b), std::max(a, b)});
  }
  std::sort(edges_.begin(), edges_.end());
  for (std::size_t e = 1; e < edges_.size(); ++e)
    if (edges_[e] == edges_[e - 1])
      throw std::invalid_argument("duplicate edge (" + std::to_string(edges_[e].i) + "," +
                                  std::to_string(edges_[e].j) + ")");
  adj_.assign(n_agents, {});
  for (const auto& e : edges_) {
    adj_[e.i].push_back(e.j);
    adj_[e.j].push_back(e.i);
  }
  for (auto& nb : adj_) std::sort(nb.begin(), nb.end());
}

int Graph::max_degree() const {
  int d = 0;
  for (const auto& nb : adj_) d = std::max(d, static_cast<int>(nb.size()));
  return d;
}

bool Graph::has_edge(int i, int j) const { return edge_index(i, j) >= 0; }

int Graph::edge_index(int i, int j) const {
  const Edge key{std::min(i, j), std::max(i, j)};
  auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
  if (it == edges_.end() || !(*it == key)) return -1;
  return static_cast<int>(it - edges_.begin());
}

bool Graph::connected() const {
  std::vector<char> seen(n_, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v : adj_[u])
      if (!seen[v]) {
        seen[v] = 1;
        ++count;
        stack.push_back(v);
      }
  }
  return count == n_;
}

Graph build_cycle(int n_agents) {
  if (n_agents < 3) throw std::invalid_argument("cycle needs at least 3 agents");
  std::vector<std::pair<int, int>> pairs;
  for (int k = 0; k + 1 < n_agents; ++k) pairs.emplace_back(k, k + 1);
  pairs.emplace_back(0, n_agents - 1);
  return Graph(n_agents, pairs);
}

Graph build_path(int n_agents) {
  if (n_agents < 2) throw std::invalid_argument("path needs at least 2 agents");
  std::vector<std::pair<int, int>> pairs;
  for (int k = 0; k + 1 < n_agents; ++k) pairs.emplace_back(k, k + 1);
  return Graph(n_agents, pairs);
}

Graph build_random_connected(int n_agents, double edge_prob, std::uint64_t seed) {
  if (n_agents < 1) throw std::invalid_argument("graph needs at least one agent");
  if (!(edge_prob >= 0.0 && edge_prob <= 1.0))
    throw std::invalid_argument("edge_prob must lie in [0, 1]");
  Rng rng(seed);
  std::vector<std::vector<char>> on(n_agents, std::vector<char>(n_agents, 0));
  for (int i = 0; i < n_agents; ++i)
    for (int j = i + 1; j < n_agents; ++j)
      if (rng.uniform() < edge_prob) on[i][j] = 1;

  auto to_graph = [&] {
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n_agents; ++i)
      for (int j = i + 1; j < n_agents; ++j)
        if (on[i][j]) pairs.emplace_back(i, j);
    return Graph(n_agents, pairs);
  };

  Graph g = to_graph();
  if (g.connected()) return g;
  // Walk a random permutation and link consecutive entries until connected.
  const std::vector<int> perm = rng.permutation(n_agents);
  for (int k = 0; k + 1 < n_agents; ++k) {
    const int a = std::min(perm[k], perm[k + 1]);
    const int b = std::max(perm[k], perm[k + 1]);
    if (on[a][b]) continue;
    on[a][b] = 1;
    g = to_graph();
    if (g.connected()) break;
  }
  return g;
}

void write_edge_list(std::ostream& os, const Graph& g) {
  os << "agents " << g.n_agents() << '\n';
  for (const auto& e : g.edges()) os << e.i << ' ' << e.j << '\n';
}

Graph read_edge_list(std::istream& is) {
  std::string line;
  int n = -1;
  std::vector<std::pair<int, int>> pairs;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (n < 0) {
      if (first != "agents" || !(ls >> n) || n < 1)
        throw std::invalid_argument("edge list: expected header 'agents N' at line " +
                                    std::to_string(lineno));
      continue;
    }
    int a = 0, b = 0;
    std::istringstream fs(first);
    if (!(fs >> a) || !(ls >> b))
      throw std::invalid_argument("edge list: malformed line " + std::to_string(lineno));
    pairs.emplace_back(a, b);
  }
  if (n < 0) throw std::invalid_argument("edge list: missing header");
  return Graph(n, pairs);
}

Graph read_edge_list_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open graph file " + path);
  return read_edge_list(in);
}

GraphMatrices derive_matrices(const Graph& g, int block_size) {
  if (block_size < 1) throw std::invalid_argument("block size must be positive");
  const int n = g.n_agents();
  const int m = g.n_edges();
  // Integer assembly so L̃⁺ = 2D̃ − L̃⁻ holds exactly.
  Eigen::MatrixXi inc = Eigen::MatrixXi::Zero(m, n);
  for (int e = 0; e < m; ++e) {
    inc(e, g.edges()[e].i) = 1;
    inc(e, g.edges()[e].j) = -1;
  }
  Eigen::MatrixXi deg = Eigen::MatrixXi::Zero(n, n);
  for (int i = 0; i < n; ++i) deg(i, i) = g.degree(i);
  const Eigen::MatrixXi lm = inc.transpose() * inc;
  const Eigen::MatrixXi lp = 2 * deg - lm;

  GraphMatrices out;
  out.incidence = inc.cast<double>();
  out.degree = deg.cast<double>();
  out.signed_laplacian = lm.cast<double>();
  out.signless_laplacian = lp.cast<double>();
  out.block_size = block_size;
  return out;
}

SpectralSummary spectral_summary(const GraphMatrices& m) {
  SpectralSummary s;
  const Eigen::Index n = m.signed_laplacian.rows();
  Eigen::SelfAdjointEigenSolver<Mat> em(m.signed_laplacian, Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Mat> ep(m.signless_laplacian, Eigen::EigenvaluesOnly);
  const Vec& ev = em.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  const double tol = 1e-9 * scale * static_cast<double>(std::max<Eigen::Index>(n, 1));
  s.lambda_max_plus = std::max(0.0, ep.eigenvalues().maxCoeff());
  s.sigma_max_minus = std::max(0.0, ev.maxCoeff());
  s.sigma_min_minus = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (std::abs(ev[k]) <= tol) {
      ++s.zero_multiplicity;
    } else if (s.sigma_min_minus == 0.0 || ev[k] < s.sigma_min_minus) {
      s.sigma_min_minus = ev[k];
    }
  }
  s.connected = s.zero_multiplicity == 1;
  // Algebraic-connectivity convention: a split graph has a repeated zero.
  if (!s.connected) s.sigma_min_minus = 0.0;
  return s;
}

void require_connected(const Graph& g) {
  if (!g.connected())
    throw std::invalid_argument("graph with " + std::to_string(g.n_agents()) +
                                " agents is not connected");
}

}  // namespace pdc
