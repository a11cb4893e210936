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
#include "pdc/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace pdc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

void require_convex_prox(double p, double gamma_minus) {
  if (!(p + gamma_minus > 0.0))
    throw std::invalid_argument("bounds: p must exceed -gamma_minus");
}

Vec singular_values(const Mat& m) { return Eigen::JacobiSVD<Mat>(m).singularValues(); }

}  // namespace

PerturbationConstants perturbation_constants(double p, double gamma_minus, double gamma_plus,
                                             double b_max, double rho, double zeta) {
  require_convex_prox(p, gamma_minus);
  if (!(rho > 0.0)) throw std::invalid_argument("bounds: rho must be positive");
  const double pg = p + gamma_minus;
  PerturbationConstants s;
  s.sigma1 = p * (p + gamma_plus + 1.0) / pg;
  s.sigma2 = b_max * (p + gamma_plus + 1.0) / pg;
  s.sigma3 = p / pg;
  s.sigma4 = zeta > 0.0 ? 1.0 + 3.0 / (zeta * pg) : kNaN;
  return s;
}

HoffmanEstimate hoffman_theta(const Mat& m) {
  if (m.size() == 0 || m.cwiseAbs().maxCoeff() == 0.0)
    throw std::invalid_argument("hoffman_theta: zero matrix");
  Eigen::ColPivHouseholderQR<Mat> qr(m.transpose());
  qr.setThreshold(1e-10);
  HoffmanEstimate h;
  h.rank = static_cast<int>(qr.rank());
  const auto& perm = qr.colsPermutation().indices();
  for (int k = 0; k < h.rank; ++k) h.rows.push_back(perm[k]);
  std::sort(h.rows.begin(), h.rows.end());
  Mat sub(h.rank, m.cols());
  for (int k = 0; k < h.rank; ++k) sub.row(k) = m.row(h.rows[k]);
  const Vec sv = singular_values(sub);
  h.sigma_max = sv[0];
  h.sigma_min = sv[h.rank - 1];
  h.theta = h.sigma_max / (h.sigma_min * h.sigma_min);
  return h;
}

double smallest_nonzero_singular(const Mat& m) {
  const Vec sv = singular_values(m);
  if (sv.size() == 0 || sv[0] == 0.0) return 0.0;
  double s = sv[0];
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv[k] > 1e-10 * sv[0]) s = sv[k];
  return s;
}

Mat assemble_m1(const CoupledProblem& problem, const Graph& g) {
  const GraphMatrices gm = derive_matrices(g, problem.constraint_dim());
  const Mat lm = gm.L_minus();
  const Mat bdt = problem.B_diag().transpose();
  Mat m(lm.rows() + bdt.rows(), lm.cols());
  m << lm, bdt;
  return m;
}

Mat assemble_m2(const CoupledProblem& problem, const Graph& g) {
  const GraphMatrices gm = derive_matrices(g, problem.constraint_dim());
  const Mat a = gm.A();
  const Mat lm = gm.L_minus();
  const Mat bdt = problem.B_diag().transpose();
  const Eigen::Index em = a.rows(), nm = a.cols();
  Mat m = Mat::Zero(nm + em + bdt.rows(), em + nm);
  m.block(0, 0, nm, em) = a.transpose();
  m.block(0, em, nm, nm) = lm;
  m.block(nm, em, em, nm) = a;
  m.block(nm + em, em, bdt.rows(), nm) = bdt;
  return m;
}

ThetaBounds theta_bounds_fullrank(const CoupledProblem& problem, const Graph& g) {
  ThetaBounds t;
  const Mat b = problem.assembled_B();
  const Vec sb = singular_values(b);
  t.full_row_rank = sb.size() == b.rows() && sb[sb.size() - 1] > 1e-10 * std::max(1.0, sb[0]);
  t.sigma_min_B = sb.size() ? sb[sb.size() - 1] : 0.0;
  t.sigma_max_Bdiag = spectral_norm(problem.B_diag());
  const SpectralSummary sp = spectral_summary(derive_matrices(g));
  t.sigma_min_minus = sp.sigma_min_minus;
  t.sigma_max_minus = sp.sigma_max_minus;
  t.theta1_direct = hoffman_theta(assemble_m1(problem, g)).theta;
  t.theta3_direct = hoffman_theta(assemble_m2(problem, g)).theta;
  if (!t.full_row_rank) {
    t.zeta_B = t.theta12_bound = t.theta3_bound = kNaN;
    return t;
  }
  const int n = problem.n_agents();
  t.zeta_B = 2.0 * std::sqrt(static_cast<double>(n)) * t.sigma_max_Bdiag / t.sigma_min_B;
  const double z2 = (1.0 + t.zeta_B) * (1.0 + t.zeta_B);
  const double smax = t.sigma_max_minus, smin = t.sigma_min_minus;
  const double rs = std::sqrt(smax);
  t.theta12_bound = z2 * smax / (smin * smin) + 4.0 * z2 / t.sigma_max_Bdiag;
  t.theta3_bound = (2.0 * rs + smax) * (3.0 + rs) * (3.0 + rs) * z2 / smin +
                   4.0 * z2 / t.sigma_max_Bdiag * (3.0 + rs) * (3.0 + rs);
  return t;
}

SingularValueChecks singular_value_checks(const CoupledProblem& problem, const Graph& g) {
  const ThetaBounds t = theta_bounds_fullrank(problem, g);
  if (!t.full_row_rank)
    throw std::invalid_argument("singular_value_checks: B must have full row rank");
  const Mat m1 = assemble_m1(problem, g);
  const Mat m2 = assemble_m2(problem, g);
  SingularValueChecks c;
  const double zb = 1.0 + t.zeta_B;
  const double smin = t.sigma_min_minus, smax = t.sigma_max_minus, bd = t.sigma_max_Bdiag;
  c.sigma_min_m1 = smallest_nonzero_singular(m1);
  c.lower_m1 = std::max(smin / zb, bd / (2.0 * zb));
  c.lower_m1_min = std::min(smin / zb, bd / (2.0 * zb));
  c.sigma_max_m1 = spectral_norm(m1);
  c.upper_m1 = smax + bd;
  c.sigma_min_m2 = smallest_nonzero_singular(m2);
  c.lower_m2 = std::max(std::sqrt(smin) / zb, bd / (2.0 * zb)) / (3.0 + std::sqrt(smax));
  c.lower_m2_min = std::min(std::sqrt(smin) / zb, bd / (2.0 * zb)) / (3.0 + std::sqrt(smax));
  c.sigma_max_m2 = spectral_norm(m2);
  c.upper_m2 = 2.0 * std::sqrt(smax) + smax + bd;
  return c;
}

ErrorConstants error_constants(double p, double gamma_minus, double gamma_plus, double b_max,
                               double rho, double theta1, double theta2, double theta3, double zeta) {
  require_convex_prox(p, gamma_minus);
  if (!(rho > 0.0)) throw std::invalid_argument("bounds: rho must be positive");
  if (gamma_plus < gamma_minus) throw std::invalid_argument("bounds: gamma_plus < gamma_minus");
  const double pg = p + gamma_minus, pgp = p + gamma_plus;
  const double k = 1.0 / pg + rho * rho * pgp;
  const PerturbationConstants s = perturbation_constants(p, gamma_minus, gamma_plus, b_max, rho, zeta);
  ErrorConstants a;
  a.a1 = (theta1 * theta1 / (2.0 * rho) * k * k + rho) / k;
  a.a2 = std::pow(theta1, 4) / (rho * rho) * k * k + 2.0 * theta1 * theta1;
  a.a3 = theta2 * theta2 * (pgp * pgp * s.sigma3 * s.sigma3 + b_max * b_max * s.sigma3 * s.sigma3 / (rho * rho));
  const double t3 = theta3 * theta3;
  const double inner = t3 / pg + rho * rho * t3 * pgp;
  a.a4 = 0.5 * inner * inner + t3 / (rho * rho);
  if (zeta > 0.0) {
    a.a5 = b_max * b_max * s.sigma4 * s.sigma4 / (k * rho);
    a.a6 = 2.0 * theta1 * theta1 * b_max * b_max * s.sigma4 * s.sigma4 / (rho * rho);
  } else {
    a.a5 = a.a6 = kNaN;
  }
  return a;
}

double kappa(double p, double gamma_plus, int n_agents, double b_max) {
  return std::max(2.0 * (p * p + gamma_plus * gamma_plus), n_agents * b_max * b_max);
}

ConstantSheet constant_sheet(const CoupledProblem& problem, const Graph& g, const SheetRequest& req) {
  ConstantSheet s;
  s.p = req.p;
  s.rho = req.rho;
  s.alpha = req.alpha;
  s.beta = req.beta;
  s.zeta = req.zeta;
  const CurvatureBounds cb = problem.curvature();
  s.gamma_minus = cb.gamma_minus;
  s.gamma_plus = cb.gamma_plus;
  s.b_max = problem.b_max();
  s.n_agents = problem.n_agents();
  s.lambda_max = spectral_summary(derive_matrices(g)).lambda_max_plus;
  s.sigma = perturbation_constants(s.p, s.gamma_minus, s.gamma_plus, s.b_max, s.rho, s.zeta);
  s.theta = theta_bounds_fullrank(problem, g);
  if (req.closed_form_theta) {
    if (!s.theta.full_row_rank)
      throw std::invalid_argument("bounds: closed-form theta needs B with full row rank");
    s.theta_source = "closed_form";
    s.theta1 = s.theta2 = s.theta.theta12_bound;
    s.theta3 = s.theta.theta3_bound;
  } else {
    s.theta_source = "direct";
    s.theta1 = s.theta2 = s.theta.theta1_direct;
    s.theta3 = s.theta.theta3_direct;
  }
  s.a = error_constants(s.p, s.gamma_minus, s.gamma_plus, s.b_max, s.rho, s.theta1, s.theta2,
                        s.theta3, s.zeta);
  s.kappa = kappa(s.p, s.gamma_plus, s.n_agents, s.b_max);

  const double l2 = s.lambda_max * s.lambda_max;
  const double s1 = s.sigma.sigma1, s2 = s.sigma.sigma2;
  StepBounds& b = s.steps;
  b.alpha_max = std::min(s.rho / 5.0, s.rho / (8.0 * s.a.a1 * l2));
  const double tail = s.rho * (s1 * s1 + 2.0 * s2 * s2 * s.a.a3) / (10.0 * s.p * s2 * s2 * s.a.a2 * l2);
  b.beta_max = 1.0 / (0.5 + 20.0 * s.p * s2 * s2 * s.a.a2 * l2 / s.rho + tail);

  const double gm = s.gamma_minus, gp = s.gamma_plus, bm2 = s.b_max * s.b_max, rho = s.rho;
  b.p_min = std::max({gp - 2.0 * gm, 32.0 * (2.0 * rho - 1.0) * bm2 / (5.0 * l2 * rho * rho) - gm,
                      32.0 * bm2 - gm, (2.0 * gp - 7.0 * gm) / 5.0});
  const double pg = s.p + gm, pgp = s.p + gp;
  b.zeta_min = 1.0 / pg;
  b.zeta_max = std::min({gp > gm ? 5.0 / (2.0 * (gp - gm)) : kInf, 2.0 / pgp,
                         bm2 > 0.0 ? 1.0 / (32.0 * bm2) : kInf,
                         5.0 * s.a.a2 * l2 * rho * rho /
                             (64.0 * (2.0 * rho - 1.0) * s.theta1 * s.theta1 * bm2)});
  b.zeta_interval_empty = !(b.zeta_min < b.zeta_max);
  if (s.zeta > 0.0) {
    const double zp = s.zeta * pg;
    b.alpha_max_ipdc = std::min({rho / 5.0, (2.0 * rho - 1.0) / (16.0 * s.a.a1 * l2),
                                 rho * zp * (1.0 + rho * rho * pgp) / (8.0 * bm2 * (zp + 3.0) * (zp + 3.0))});
  } else {
    b.alpha_max_ipdc = kNaN;
  }

  s.delta = 20.0 * s.p * s2 * s2 * s.a.a2 * l2 / s.rho;
  s.c1 = (s.rho - 5.0 * s.alpha) / 2.0;
  s.c2 = s.rho - (2.0 * s.alpha * s.a.a1 + 4.0 * s.p * s2 * s2 * s.a.a2 / s.delta) * l2;
  s.c3 = s.beta > 0.0 ? s.p * (-0.5 + 1.0 / s.beta - s.delta - 2.0 * s1 * s1 / s.delta -
                               4.0 * s2 * s2 * s.a.a3 / s.delta)
                      : kNaN;
  if (s.zeta > 0.0) {
    s.c4 = 1.0 / s.zeta - (gp - gm) / 2.0 - 2.0 * s.alpha * s.a.a5 -
           4.0 * s.p * s2 * s2 * s.a.a6 / s.delta - bm2 * s.sigma.sigma4 * s.sigma.sigma4 / 2.0;
  } else {
    s.c4 = kNaN;
  }
  return s;
}

std::vector<Condition> regime_conditions(const ConstantSheet& s) {
  std::vector<Condition> out;
  auto add = [&](const char* name, bool ok, double value, double limit) {
    out.push_back({name, ok, value, limit});
  };
  const StepBounds& b = s.steps;
  add("p_above_neg_gamma_minus", s.p > -s.gamma_minus, s.p, -s.gamma_minus);
  add("alpha_pdc", s.alpha <= b.alpha_max, s.alpha, b.alpha_max);
  add("beta", s.beta < b.beta_max, s.beta, b.beta_max);
  if (!(s.zeta > 0.0)) return out;

  const double gm = s.gamma_minus, gp = s.gamma_plus, bm2 = s.b_max * s.b_max;
  const double l2 = s.lambda_max * s.lambda_max, rho = s.rho;
  const double pg = s.p + gm, pgp = s.p + gp;
  add("rho_above_half", rho > 0.5, rho, 0.5);
  add("p_curvature_gap", s.p > gp - 2.0 * gm, s.p, gp - 2.0 * gm);
  const double pc = 32.0 * (2.0 * rho - 1.0) * bm2 / (5.0 * l2 * rho * rho) - gm;
  add("p_coupling_ratio", s.p > pc, s.p, pc);
  add("p_coupling_norm", s.p > 32.0 * bm2 - gm, s.p, 32.0 * bm2 - gm);
  add("p_mixed_curvature", s.p > (2.0 * gp - 7.0 * gm) / 5.0, s.p, (2.0 * gp - 7.0 * gm) / 5.0);
  add("zeta_lower", s.zeta > 1.0 / pg, s.zeta, 1.0 / pg);
  const double zc = gp > gm ? 5.0 / (2.0 * (gp - gm)) : kInf;
  add("zeta_curvature_gap", s.zeta < zc, s.zeta, zc);
  add("zeta_smoothness", s.zeta < 2.0 / pgp, s.zeta, 2.0 / pgp);
  const double zb = bm2 > 0.0 ? 1.0 / (32.0 * bm2) : kInf;
  add("zeta_coupling_norm", s.zeta < zb, s.zeta, zb);
  const double zh = 5.0 * s.a.a2 * l2 * rho * rho / (64.0 * (2.0 * rho - 1.0) * s.theta1 * s.theta1 * bm2);
  add("zeta_error_bound", s.zeta < zh, s.zeta, zh);
  add("alpha_ipdc_rho", s.alpha < rho / 5.0, s.alpha, rho / 5.0);
  const double aa = (2.0 * rho - 1.0) / (16.0 * s.a.a1 * l2);
  add("alpha_ipdc_a1", s.alpha < aa, s.alpha, aa);
  const double zp = s.zeta * pg;
  const double az = rho * zp * (1.0 + rho * rho * pgp) / (8.0 * bm2 * (zp + 3.0) * (zp + 3.0));
  add("alpha_ipdc_zeta", s.alpha < az, s.alpha, az);
  return out;
}

bool inside_regime(const std::vector<Condition>& conditions) {
  return std::all_of(conditions.begin(), conditions.end(), [](const Condition& c) { return c.satisfied; });
}

std::string format_sheet(const ConstantSheet& s) {
  std::ostringstream os;
  auto kv = [&](const char* k, double v) { os << k << " = " << format_double(v) << '\n'; };
  kv("p", s.p);
  kv("rho", s.rho);
  kv("alpha", s.alpha);
  kv("beta", s.beta);
  kv("zeta", s.zeta);
  kv("gamma_minus", s.gamma_minus);
  kv("gamma_plus", s.gamma_plus);
  kv("b_max", s.b_max);
  kv("lambda_max", s.lambda_max);
  os << "n_agents = " << s.n_agents << '\n';
  kv("sigma1", s.sigma.sigma1);
  kv("sigma2", s.sigma.sigma2);
  kv("sigma3", s.sigma.sigma3);
  kv("sigma4", s.sigma.sigma4);
  os << "theta_source = " << s.theta_source << '\n';
  os << "b_full_row_rank = " << (s.theta.full_row_rank ? "true" : "false") << '\n';
  kv("zeta_B", s.theta.zeta_B);
  kv("theta12_closed_form", s.theta.theta12_bound);
  kv("theta3_closed_form", s.theta.theta3_bound);
  kv("theta1_direct", s.theta.theta1_direct);
  kv("theta3_direct", s.theta.theta3_direct);
  kv("theta1", s.theta1);
  kv("theta2", s.theta2);
  kv("theta3", s.theta3);
  kv("a1", s.a.a1);
  kv("a2", s.a.a2);
  kv("a3", s.a.a3);
  kv("a4", s.a.a4);
  kv("a5", s.a.a5);
  kv("a6", s.a.a6);
  kv("kappa", s.kappa);
  kv("alpha_max_pdc", s.steps.alpha_max);
  kv("beta_max", s.steps.beta_max);
  kv("p_min_ipdc", s.steps.p_min);
  kv("zeta_min_ipdc", s.steps.zeta_min);
  kv("zeta_max_ipdc", s.steps.zeta_max);
  kv("alpha_max_ipdc", s.steps.alpha_max_ipdc);
  kv("delta", s.delta);
  kv("C1", s.c1);
  kv("C2", s.c2);
  kv("C3", s.c3);
  kv("C4", s.c4);
  return os.str();
}

}  // namespace pdc
