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
#ifndef PDC_ENGINE_HPP_
#define PDC_ENGINE_HPP_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "pdc/common.hpp"
#include "pdc/graph.hpp"
#include "pdc/problem.hpp"

namespace pdc {

enum class Mode { exact_pdc, inexact_ipdc };
enum class InitMode { uniform, zeros };

const char* to_string(Mode m);
Mode parse_mode(const std::string& s);

struct SolverConfig {
  Mode mode = Mode::exact_pdc;
  double p = 1.0;
  double alpha = 0.01;
  double beta = 0.5;
  double rho = 1.0;
  double zeta = 0.0;  // IPDC only
  double subsolver_tol = 1e-5;
  int subsolver_max_iter = 10000;
  int max_rounds = 1000;
  // Early stop when both metrics fall below these; 0 disables.
  double tol_residue = 0.0;
  double tol_infeasibility = 0.0;
  // Stop, flagging divergence, once infeasibility exceeds this; 0 disables.
  double divergence_limit = 0.0;
  std::uint64_t seed = 0;
  bool record_phi = false;
  InitMode x_init = InitMode::uniform;
  InitMode y_init = InitMode::uniform;
  int threads = 1;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

// Private iterate of one agent.
struct AgentState {
  Vec x;
  Vec y;  // local copy of the dual variable
  Vec p;  // accumulated A_iᵀμ
  Vec z;  // proximal center
};

// NaN/Inf in an iterate.
class SolverAbort : public std::runtime_error {
 public:
  SolverAbort(int agent, int round, const std::string& field)
      : std::runtime_error("non-finite " + field + " at agent " + std::to_string(agent) +
                           ", round " + std::to_string(round)),
        agent_(agent),
        round_(round) {}
  int agent() const { return agent_; }
  int round() const { return round_; }

 private:
  int agent_;
  int round_;
};

// Per-agent read counters for the locality guard. Each agent only writes its
// own slot, so no synchronization is needed.
struct AccessLog {
  std::vector<long> reads;
  std::vector<long> violations;
  explicit AccessLog(int n = 0) : reads(n, 0), violations(n, 0) {}
  long total_reads() const;
  long total_violations() const;
};

// What agent `self` may see of the previous-round dual snapshot: its own copy
// and those of its neighbors. Any other read is counted as a violation.
class NeighborView {
 public:
  NeighborView(const Graph& g, const BlockVec& snapshot, int self, AccessLog* log);
  int self() const { return self_; }
  const std::vector<int>& neighbors() const { return graph_.neighbors(self_); }
  const Vec& own() const;
  const Vec& y(int j) const;

 private:
  const Graph& graph_;
  const BlockVec& snap_;
  int self_;
  AccessLog* log_;
};

// Σ_{j∈N_i}(y_i − y_j) = row block i of L⁻y.
Vec laplacian_neighbor_sum(const NeighborView& view);
// Σ_{j∈N_i}(y_i + y_j) = row block i of L⁺y.
Vec signless_neighbor_sum(const NeighborView& view);
Vec signless_neighbor_sum(const std::vector<AgentState>& state, const Graph& g, int i);

// p_i ← p_i + α Σ_{j∈N_i}(y_i − y_j) for every agent, reading y from state.
void dual_p_update(std::vector<AgentState>& state, const Graph& g, double alpha);

// Per-agent subproblem
//   f_i(x) + (p/2)‖x − z_i‖² + (w/2)‖B_i x − t_i‖²,
//   t_i = q/N + p_i − ρ L_i⁺y,  w = 1/(2ρ|N_i|).
class LocalSubproblem {
 public:
  LocalSubproblem(const LocalObjective& f, const Mat& B, const Mat* gram, const Vec& q,
                  int n_agents, int degree, double prox, double rho, const Vec& p_i,
                  const Vec& signless_sum, const Vec& z_i);

  double value(const Vec& x) const;
  double value_and_gradient(const Vec& x, Vec& grad) const;
  Vec gradient(const Vec& x) const;
  double lipschitz() const { return lipschitz_; }
  // B_i x − t_i, the numerator of the closed-form dual step.
  Vec residual(const Vec& x) const;
  const Vec& target() const { return target_; }
  double weight() const { return weight_; }

 private:
  const LocalObjective& f_;
  const Mat& b_;
  const Mat* gram_;  // optional BᵀB
  const Vec& z_;
  double prox_;
  double weight_;
  Vec target_;
  Vec bt_target_;  // Bᵀt, only with gram
  double target_sq_ = 0.0;
  double lipschitz_;
};

struct SubsolverResult {
  Vec x;
  int iterations = 0;
  bool converged = false;  // stopping rule met within budget
  double residual = 0.0;   // normalized prox-gradient at the returned point
};

struct FistaOptions {
  double tol = 1e-5;
  int max_iter = 10000;
};

// Constant-step FISTA with function-value restart. The stopping measure is
// ‖∇F(x)‖ / (L · max(1, ‖x‖)), i.e. the normalized length of one prox step.
SubsolverResult fista_minimize(
    const std::function<double(const Vec&, Vec&)>& value_and_gradient, double lipschitz,
    const Vec& x0, const FistaOptions& opt);

SubsolverResult x_update_exact(const LocalSubproblem& sub, const Vec& x_warm,
                               const FistaOptions& opt);
Vec x_update_inexact(const LocalSubproblem& sub, const Vec& x_current, double zeta);

// y_i ← (B_i x − q/N − p_i + ρ L_i⁺y)/(2ρ|N_i|).
Vec y_update(const Mat& B, const Vec& x_new, const Vec& q, int n_agents, const Vec& p_i,
             const Vec& signless_sum, double rho, int degree);
Vec z_update(const Vec& z, const Vec& x_new, double beta);

// Dense solve of the concave inner maximization over y with x fixed,
//   Σ y_iᵀ(B_i x_i − q/N) − μᵀAy − (ρ/2)‖Ay‖² − (ρ/2)‖y − y^r‖²_{L⁺},
// where the μ-term enters through p = Aᵀμ. Test oracle only.
BlockVec brute_force_inner_max(const BlockVec& x_fixed, const BlockVec& p_blocks,
                               const BlockVec& y_snapshot, double rho, const Graph& g,
                               const CoupledProblem& problem);

struct RoundRecord {
  int round = 0;
  double grad_residue = 0.0;
  double infeasibility = 0.0;
  double consensus_gap = 0.0;
  double dx = 0.0;  // max over agents of ‖Δx_i‖
  double dy = 0.0;
  double dz = 0.0;
  long inner_iters = 0;
  double phi = std::numeric_limits<double>::quiet_NaN();
};

struct SubsolverStats {
  long solves = 0;
  long stopped_by_tol = 0;
  long budget_exhausted = 0;
  double worst_residual = 0.0;  // largest residual among budget-exhausted solves
};

struct IterationTrace {
  std::vector<RoundRecord> rounds;
  std::vector<AgentState> final_state;
  SubsolverStats subsolver;
  long neighbor_reads = 0;
  long locality_violations = 0;
  double initial_phi = std::numeric_limits<double>::quiet_NaN();
  bool stopped_early = false;
  bool diverged = false;
};

void write_trace_csv(std::ostream& os, const std::vector<RoundRecord>& rounds);
void write_state_snapshot(std::ostream& os, const std::vector<AgentState>& state);
std::vector<AgentState> read_state_snapshot(std::istream& is);

class PhiEvaluator;

// Synchronous-round simulator. Each round runs four stages (p, x, y, z) with
// a barrier between them; every cross-agent read goes through NeighborView
// on the previous round's dual snapshot.
class PdcEngine {
 public:
  PdcEngine(const CoupledProblem& problem, const Graph& graph, SolverConfig config);
  ~PdcEngine();
  PdcEngine(const PdcEngine&) = delete;
  PdcEngine& operator=(const PdcEngine&) = delete;

  // Seeded initialization: x⁰ = z⁰ and y⁰ per config, p⁰ = 0, μ⁰ = 0.
  void initialize();
  // Start from a given state; μ is reset to zero, so p must be zero too for
  // the shadow μ to stay consistent.
  void set_state(std::vector<AgentState> state);

  RoundRecord step();
  IterationTrace run();
  // Same loop, appending to trace as rounds complete. If a round throws
  // SolverAbort, trace keeps every completed round and the exception
  // propagates; final_state and the counters are filled only on success.
  void run_into(IterationTrace& trace);

  int round() const { return round_; }
  const std::vector<AgentState>& agents() const { return agents_; }
  const BlockVec& y_prev() const { return y_prev_; }
  // Shadow μ ∈ R^{M|E|}, advanced by μ ← μ + αAy each round.
  const Vec& mu() const { return mu_; }
  const AccessLog& access_log() const { return log_; }
  const SubsolverStats& subsolver_stats() const { return stats_; }
  const SolverConfig& config() const { return config_; }
  double current_phi() const;

  // Hook run after each completed round (diagnostic taps in tests).
  std::function<void(const PdcEngine&)> on_round;

 private:
  void parallel_for(const std::function<void(int)>& fn);
  RoundRecord measure(const std::vector<AgentState>& before) const;

  const CoupledProblem& problem_;
  Graph graph_;  // owned copy; the problem is referenced and must outlive the engine
  SolverConfig config_;
  GraphMatrices matrices_;
  std::vector<AgentState> agents_;
  BlockVec y_prev_;
  Vec mu_;
  std::vector<Mat> gram_;
  std::vector<char> use_gram_;
  AccessLog log_;
  SubsolverStats stats_;
  std::vector<long> inner_iters_;
  std::vector<char> hit_tol_;
  std::vector<double> last_residual_;
  int round_ = 0;
  std::unique_ptr<PhiEvaluator> phi_;
  class Pool;
  std::unique_ptr<Pool> pool_;
};

// One-call convenience wrapper.
IterationTrace run(const CoupledProblem& problem, const Graph& graph, const SolverConfig& config);

}  // namespace pdc

#endif  // PDC_ENGINE_HPP_
