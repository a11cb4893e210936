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
#ifndef PDC_BOUNDS_HPP_
#define PDC_BOUNDS_HPP_

#include <string>
#include <vector>

#include "pdc/common.hpp"
#include "pdc/graph.hpp"
#include "pdc/problem.hpp"

namespace pdc {

// Perturbation constants of the proximal solution map. sigma4 is NaN unless
// zeta > 0.
struct PerturbationConstants {
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  double sigma3 = 0.0;
  double sigma4 = 0.0;
};

// Throws std::invalid_argument when p ≤ −γ⁻.
PerturbationConstants perturbation_constants(double p, double gamma_minus, double gamma_plus,
                                             double b_max, double rho, double zeta = 0.0);

struct HoffmanEstimate {
  double theta = 0.0;
  double sigma_max = 0.0;  // of the selected row submatrix
  double sigma_min = 0.0;
  int rank = 0;
  std::vector<int> rows;  // selected rows, ascending
};

// θ = σ_max(M̄)/σ_min²(M̄) with M̄ a maximal set of linearly independent rows
// picked by column-pivoted QR on Mᵀ (threshold 1e−10 relative).
HoffmanEstimate hoffman_theta(const Mat& m);

// [L⁻; B_diagᵀ] and [[Aᵀ, L⁻], [0, A], [0, B_diagᵀ]] with the M-fold
// Kronecker expansions of the graph matrices.
Mat assemble_m1(const CoupledProblem& problem, const Graph& g);
Mat assemble_m2(const CoupledProblem& problem, const Graph& g);

// Smallest singular value above 1e−10·σ_max.
double smallest_nonzero_singular(const Mat& m);

struct ThetaBounds {
  bool full_row_rank = false;  // of B = [B_1, ..., B_N]; if false the closed forms are NaN
  double sigma_min_B = 0.0;
  double sigma_max_Bdiag = 0.0;
  double sigma_min_minus = 0.0;
  double sigma_max_minus = 0.0;
  double zeta_B = 0.0;
  double theta12_bound = 0.0;  // closed form for θ₁ = θ₂
  double theta3_bound = 0.0;
  double theta1_direct = 0.0;  // hoffman_theta(M₁)
  double theta3_direct = 0.0;  // hoffman_theta(M₂)
};

ThetaBounds theta_bounds_fullrank(const CoupledProblem& problem, const Graph& g);

// Singular-value enclosures for M₁ and M₂: the measured value next to each
// bound. lower_* combine the two case bounds with max, as stated; the case
// analysis behind them only supports the min, kept in lower_*_min. The max
// form fails when B is small next to the graph, e.g. N = 2, B_i = [1/2].
struct SingularValueChecks {
  double sigma_min_m1 = 0.0, lower_m1 = 0.0, lower_m1_min = 0.0;
  double sigma_max_m1 = 0.0, upper_m1 = 0.0;
  double sigma_min_m2 = 0.0, lower_m2 = 0.0, lower_m2_min = 0.0;
  double sigma_max_m2 = 0.0, upper_m2 = 0.0;
};

SingularValueChecks singular_value_checks(const CoupledProblem& problem, const Graph& g);

struct ErrorConstants {
  double a1 = 0.0, a2 = 0.0, a3 = 0.0, a4 = 0.0;
  double a5 = 0.0, a6 = 0.0;  // NaN unless zeta > 0
};

ErrorConstants error_constants(double p, double gamma_minus, double gamma_plus, double b_max,
                               double rho, double theta1, double theta2, double theta3,
                               double zeta = 0.0);

// max{2(p² + γ⁺²), N·B_max²}.
double kappa(double p, double gamma_plus, int n_agents, double b_max);

struct Condition {
  std::string name;
  bool satisfied = false;
  double value = 0.0;
  double limit = 0.0;
};

struct StepBounds {
  double alpha_max = 0.0;  // PDC: α ≤ alpha_max
  double beta_max = 0.0;   // PDC: β < beta_max
  // Inexact variant, as stated for that algorithm.
  double p_min = 0.0;  // p > p_min
  double zeta_min = 0.0, zeta_max = 0.0;
  double alpha_max_ipdc = 0.0;  // needs zeta; NaN otherwise
  bool zeta_interval_empty = false;
};

struct ConstantSheet {
  // Inputs.
  double p = 0.0, rho = 0.0, alpha = 0.0, beta = 0.0, zeta = 0.0;
  double gamma_minus = 0.0, gamma_plus = 0.0, b_max = 0.0, lambda_max = 0.0;
  int n_agents = 0;
  std::string theta_source;  // "direct" or "closed_form"
  PerturbationConstants sigma;
  ThetaBounds theta;
  double theta1 = 0.0, theta2 = 0.0, theta3 = 0.0;
  ErrorConstants a;
  double kappa = 0.0;
  StepBounds steps;
  // Descent constants, informational.
  double delta = 0.0;
  double c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0;
};

struct SheetRequest {
  double p = 1.0;
  double rho = 1.0;
  double alpha = 0.0;
  double beta = 0.0;
  double zeta = 0.0;  // > 0 requests the inexact-variant quantities
  bool closed_form_theta = false;
};

ConstantSheet constant_sheet(const CoupledProblem& problem, const Graph& g, const SheetRequest& req);

// PDC α and β tests plus, when zeta > 0, every inexact-variant condition by name.
std::vector<Condition> regime_conditions(const ConstantSheet& sheet);
bool inside_regime(const std::vector<Condition>& conditions);

std::string format_sheet(const ConstantSheet& sheet);

}  // namespace pdc

#endif  // PDC_BOUNDS_HPP_
