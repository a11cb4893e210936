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
#ifndef PDC_PROBLEM_HPP_
#define PDC_PROBLEM_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "pdc/common.hpp"
#include "pdc/graph.hpp"
#include "pdc/objective.hpp"

namespace pdc {

struct ProblemMetadata {
  std::string kind = "custom";
  // False when some f_i is not L-smooth (the ReLU head); the reported
  // curvature is then a sampled surrogate.
  bool smooth = true;
  std::string note;
};

// Instance of min Σ f_i(x_i) s.t. Σ B_i x_i = q.
class CoupledProblem {
 public:
  CoupledProblem(std::vector<ObjectivePtr> objectives, std::vector<Mat> coupling, Vec rhs,
                 ProblemMetadata meta = {});

  int n_agents() const { return static_cast<int>(objectives_.size()); }
  int constraint_dim() const { return static_cast<int>(rhs_.size()); }
  int local_dim(int i) const { return objectives_.at(i)->dim(); }
  int total_dim() const;
  std::vector<int> local_dims() const;

  const LocalObjective& objective(int i) const { return *objectives_.at(i); }
  const std::vector<ObjectivePtr>& objectives() const { return objectives_; }
  const Mat& B(int i) const { return coupling_.at(i); }
  const std::vector<Mat>& coupling() const { return coupling_; }
  const Vec& q() const { return rhs_; }
  double b_max() const { return b_max_; }
  const ProblemMetadata& meta() const { return meta_; }

  // Global enclosure: min over agents of γ⁻, max of γ⁺.
  CurvatureBounds curvature() const;
  bool all_quadratic() const;

  // [B_1, ..., B_N] and blockdiag(B_1ᵀ, ..., B_Nᵀ)ᵀ style helpers.
  Mat assembled_B() const;
  Mat B_diag() const;  // blockdiag(B_1, ..., B_N), NM x Σn_i

  // Σ B_i x_i.
  Vec coupling_sum(const BlockVec& x) const;

  // Rechecks dimensions and b_max; throws on inconsistency.
  void validate() const;

  // New problem with agents reordered: agent k of the result is agent
  // perm[k] of this one.
  CoupledProblem permuted(const std::vector<int>& perm) const;

 private:
  std::vector<ObjectivePtr> objectives_;
  std::vector<Mat> coupling_;
  Vec rhs_;
  double b_max_ = 0.0;
  ProblemMetadata meta_;
};

// f_i = ½xᵀQ_i x + c_iᵀx with spec(Q_i) ⊂ [shift, shift + 1], random dense
// B_i and q.
CoupledProblem build_quadratic_instance(std::uint64_t seed, int n_agents, int n_local,
                                        int m_constraints, double convexity_shift);

// Same objectives as build_quadratic_instance, but B_i = scale·[P_i 0] with
// P_i a random m×m orthogonal block, and q scaled to match. Needs m ≤ n.
// The coupling is perfectly conditioned, which keeps the Hoffman constants
// near 1/scale.
CoupledProblem build_well_coupled_quadratic(std::uint64_t seed, int n_agents, int n_local,
                                            int m_constraints, double convexity_shift,
                                            double scale);

// Consensus form: B = Ã ⊗ I_n, agent i owns column block i, q = 0.
CoupledProblem build_consensus_instance(const std::vector<ObjectivePtr>& objectives,
                                        const Graph& graph);

struct ColumnRange {
  int begin = 0;  // inclusive
  int end = 0;    // exclusive
  int size() const { return end - begin; }
};

// Feature-partitioned data set: every agent sees all M samples but only its
// own column slice.
struct VerticalDataset {
  Mat features;  // M x total features
  Vec labels;    // ±1 for binary tasks, class index 0..C-1 otherwise
  int classes = 2;
  std::vector<ColumnRange> partition;

  int samples() const { return static_cast<int>(features.rows()); }
  int n_agents() const { return static_cast<int>(partition.size()); }
  // Rows are samples; columns restricted to agent i.
  Mat block(int i) const;
  Mat one_hot() const;
  void validate() const;
};

// Seeded two-class (or C-class) Gaussian mixture with class-dependent means.
// Features are scaled so that each row has expected squared norm ~ 1.
VerticalDataset synthetic_vertical_dataset(std::uint64_t seed, int samples, int n_agents,
                                           int features_per_agent, int classes,
                                           double separation);

// CSV with header `label,f0,f1,...`; partition lines `agent,col_start,col_end`
// with col_end exclusive.
void write_dataset_csv(std::ostream& os, const VerticalDataset& data);
void write_partition(std::ostream& os, const VerticalDataset& data);
VerticalDataset read_vertical_dataset(const std::string& csv_path,
                                      const std::string& partition_path, int classes);

// Logistic regression with the non-convex penalty. The aux agent owns w₀ ∈ R^M
// appended after its own weights, with coupling block −I_M.
CoupledProblem build_vertical_lr(const VerticalDataset& data, double lambda, double xi,
                                 int aux_agent = 0);
double vertical_lr_objective(const VerticalDataset& data, double lambda, double xi,
                             const BlockVec& w);
// Lift per-agent weights into the variable layout of build_vertical_lr.
BlockVec vertical_lr_lift(const VerticalDataset& data, const BlockVec& w, int aux_agent = 0);

// Two-layer network: first layer W split by feature rows across agents, head
// (ReLU, linear, softmax) on the aux agent. Agent i's variable is the
// row-major flattening of W_i (n_i x K), so its block is b_{i,k}ᵀ ⊗ I_K.
// The aux agent appends w₀ ∈ R^{MK} and θ. The seed drives the sampled
// curvature surrogate.
CoupledProblem build_vertical_nn(const VerticalDataset& data, int hidden, int aux_agent,
                                 std::uint64_t seed);
double vertical_nn_objective(const VerticalDataset& data, int hidden, const BlockVec& w,
                             const Vec& theta);
BlockVec vertical_nn_lift(const VerticalDataset& data, int hidden, const BlockVec& w,
                          const Vec& theta, int aux_agent);

struct KktSolution {
  BlockVec x;
  Vec y;
  double condition = 0.0;
};

// Solves Q_i x_i + c_i + B_iᵀy = 0, Σ B_i x_i = q by one dense factorization.
// Throws std::runtime_error with a condition estimate if singular.
KktSolution kkt_oracle_quadratic(const CoupledProblem& problem);

// (Q_i, c_i) view; throws if agent i is not quadratic.
const QuadraticObjective& as_quadratic(const CoupledProblem& problem, int i);

}  // namespace pdc

#endif  // PDC_PROBLEM_HPP_
