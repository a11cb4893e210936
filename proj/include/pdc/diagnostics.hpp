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
#ifndef PDC_DIAGNOSTICS_HPP_
#define PDC_DIAGNOSTICS_HPP_

#include <vector>

#include "pdc/common.hpp"
#include "pdc/graph.hpp"
#include "pdc/problem.hpp"

namespace pdc {

// (1/Σn_i) Σ_i ‖∇f_i(x_i) + B_iᵀy_i‖².
double gradient_residue(const CoupledProblem& problem, const BlockVec& x, const BlockVec& y);
// Same with one shared multiplier y for every agent.
double gradient_residue(const CoupledProblem& problem, const BlockVec& x, const Vec& y);
// (1/M)‖Σ_i B_i x_i − q‖².
double infeasibility(const CoupledProblem& problem, const BlockVec& x);
// Σ_{(i,j)∈E} ‖y_i − y_j‖² = ‖Ay‖².
double consensus_gap(const Graph& g, const BlockVec& y);

struct KktReport {
  // Unnormalized ε-KKT quantities.
  double stationarity = 0.0;  // Σ_i ‖∇f_i(x_i) + B_iᵀy‖² at the witness
  double feasibility = 0.0;   // ‖Σ_i B_i x_i − q‖²
  double epsilon = 0.0;       // max of the two
  // The same quantities with the trace normalization.
  double residue = 0.0;
  double infeasibility = 0.0;
  Vec best_dual;
};

// Least-squares witness y (minimum norm when the stacked Bᵀ is rank
// deficient) and the resulting ε.
KktReport eps_kkt(const CoupledProblem& problem, const BlockVec& x);

struct ProxSolution {
  BlockVec x;
  Vec y;
  int iterations = 0;     // outer iterations of the general path, 0 for quadratic
  double residual = 0.0;  // max of stationarity and feasibility norms
  bool converged = true;
};

// Minimizer of Σ_i f_i(x_i) + (p/2)‖x_i − z_i‖² subject to Σ_i B_i x_i = q and
// its multiplier. Quadratic instances use one dense KKT solve; otherwise an
// augmented Lagrangian loop runs to 1e−10.
ProxSolution prox_solution_map(const CoupledProblem& problem, const BlockVec& z, double p);

struct PhiComponents {
  double g_value = 0.0;
  double g_tilde = 0.0;
  double l_rho = 0.0;
  double dual_d = 0.0;
  double phi = 0.0;
};

// Potential-function machinery for quadratic instances. With
// H_i = Q_i + pI and h_i = c_i − p z_i the dual function is the concave
// quadratic 𝓛_ρ(y) = −½yᵀKy + b(μ,z)ᵀy + const(z), where
// K = blockdiag(B_i H_i⁻¹ B_iᵀ) + ρL⁻. K depends only on (ρ, p), so its
// pseudoinverse is factored once.
class PhiEvaluator {
 public:
  PhiEvaluator(const CoupledProblem& problem, const Graph& graph, double rho, double p, double alpha);

  double g_value(const BlockVec& x, const BlockVec& y, const Vec& mu, const BlockVec& z) const;
  double l_rho(const BlockVec& y, const Vec& mu, const BlockVec& z) const;
  // max_y 𝓛_ρ(y, μ; z). Throws std::runtime_error when b ∉ range(K), which
  // means μ is not a reachable multiplier.
  double dual_d(const Vec& mu, const BlockVec& z) const;
  // Minimum-norm element of 𝒴(μ, z).
  BlockVec maximizer(const Vec& mu, const BlockVec& z) const;
  // Euclidean projection of y onto 𝒴(μ, z).
  BlockVec project(const BlockVec& y, const Vec& mu, const BlockVec& z) const;

  // Φ at the state (x, y, μ, z) with y_prev the dual iterate one round back.
  PhiComponents evaluate(const BlockVec& x, const BlockVec& y, const BlockVec& y_prev,
                         const Vec& mu, const BlockVec& z) const;

  const Mat& K() const { return k_; }

 private:
  Vec linear_term(const Vec& mu, const BlockVec& z) const;
  double constant_term(const BlockVec& z) const;
  void check_range(const Vec& b) const;

  const CoupledProblem& problem_;
  double rho_, p_, alpha_;
  int n_, m_;
  std::vector<Eigen::LLT<Mat>> h_;
  std::vector<Mat> b_hinv_;  // B_i H_i⁻¹
  Mat a_, l_minus_, l_plus_;
  Mat k_;
  Mat k_pinv_;
};

PhiComponents phi_eval_quadratic(const CoupledProblem& problem, const Graph& graph,
                                 const BlockVec& x, const BlockVec& y, const BlockVec& y_prev,
                                 const Vec& mu, const BlockVec& z, double rho, double p,
                                 double alpha);

}  // namespace pdc

#endif  // PDC_DIAGNOSTICS_HPP_
