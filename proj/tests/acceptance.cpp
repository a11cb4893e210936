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
// Acceptance battery: one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,4,7] [--expect-fail 9]
//
// Exit status is 0 when the set of failing criteria equals the expected set.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pdc/bounds.hpp"
#include "pdc/diagnostics.hpp"
#include "pdc/engine.hpp"
#include "pdc/graph.hpp"
#include "pdc/harness.hpp"
#include "pdc/problem.hpp"

using namespace pdc;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

BlockVec z_of(const std::vector<AgentState>& s) {
  BlockVec z;
  for (const AgentState& a : s) z.push_back(a.z);
  return z;
}

Vec mean_y(const std::vector<AgentState>& s) {
  Vec m = Vec::Zero(s.front().y.size());
  for (const AgentState& a : s) m += a.y / static_cast<double>(s.size());
  return m;
}

// The strongly convex quadratic family shared by criteria 1 and 3 to 6:
// well-conditioned coupling at scale 100, cycles for even seeds and dense
// random graphs for odd ones, (α, β) certified by the constant sheet.
struct QuadCase {
  int seed;
  CoupledProblem problem;
  Graph graph;
  ConstantSheet sheet;
  SolverConfig config;
};

QuadCase quad_case(int s) {
  const int n_agents = 3 + s % 6, n = 2 + s % 4, m = 1 + (s * 7) % n;
  CoupledProblem prob = build_well_coupled_quadratic(100 + s, n_agents, n, m, 2.0, 100.0);
  Graph g = s % 2 ? build_random_connected(n_agents, 0.9, s) : build_cycle(n_agents);
  SheetRequest req;
  req.p = 1e-4;
  req.rho = 300.0;
  ConstantSheet sh = constant_sheet(prob, g, req);
  SolverConfig c;
  c.p = req.p;
  c.rho = req.rho;
  c.alpha = sh.steps.alpha_max;
  c.beta = std::min(0.5, 0.99 * sh.steps.beta_max);
  c.subsolver_tol = 1e-11;
  c.max_rounds = 5000;
  c.seed = static_cast<std::uint64_t>(s);
  req.alpha = c.alpha;
  req.beta = c.beta;
  sh = constant_sheet(prob, g, req);
  return {s, std::move(prob), std::move(g), std::move(sh), c};
}

bool certified(const QuadCase& q) { return inside_regime(regime_conditions(q.sheet)); }

// 1 --------------------------------------------------------------------------
Verdict kkt_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_x = 0.0, worst_eps = 0.0;
  int ok = 0, uncertified = 0, over_budget = 0;
  for (int s = 0; s < 20; ++s) {
    const QuadCase q = quad_case(s);
    if (!certified(q)) ++uncertified;
    const IterationTrace tr = run(q.problem, q.graph, q.config);
    if (static_cast<int>(tr.rounds.size()) > 5000) ++over_budget;
    const KktSolution kk = kkt_oracle_quadratic(q.problem);
    double ex = 0.0;
    BlockVec x;
    for (int i = 0; i < q.problem.n_agents(); ++i) {
      x.push_back(tr.final_state[i].x);
      ex = std::max(ex, (x[i] - kk.x[i]).lpNorm<Eigen::Infinity>());
    }
    const double eps = eps_kkt(q.problem, x).epsilon;
    worst_x = std::max(worst_x, ex);
    worst_eps = std::max(worst_eps, eps);
    ok += ex <= 1e-6 && eps <= 1e-8;
  }
  const double secs = seconds_since(t0);
  return {ok == 20 && uncertified == 0 && over_budget == 0 && secs < 120.0,
          "instances=20 converged=" + std::to_string(ok) + " worst_x_err=" + sci(worst_x) +
              " worst_eps=" + sci(worst_eps) + " uncertified=" + std::to_string(uncertified) +
              " runtime=" + sci(secs) + "s"};
}

// 2 --------------------------------------------------------------------------
Verdict y_update_oracle() {
  Rng rng(2024);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const int n_agents = 2 + t % 4, n = 1 + t % 3, m = 1 + (t / 3) % 3;
    const CoupledProblem prob = build_quadratic_instance(700 + t, n_agents, n, m, 0.5);
    const Graph g = t % 3 == 0 ? build_path(n_agents) : build_random_connected(n_agents, 0.5, t);
    const double rho = 0.1 + 2.0 * rng.uniform();
    BlockVec x, ys;
    for (int i = 0; i < n_agents; ++i) {
      x.push_back(rng.normal_vec(n));
      ys.push_back(rng.normal_vec(m));
    }
    // p lives in the range of Aᵀ, as it does along every run.
    const Vec pv = derive_matrices(g, m).A().transpose() * rng.normal_vec(g.n_edges() * m);
    const BlockVec pb = split(pv, std::vector<int>(n_agents, m));
    const BlockVec dense = brute_force_inner_max(x, pb, ys, rho, g, prob);
    for (int i = 0; i < n_agents; ++i) {
      const Vec s = signless_neighbor_sum(NeighborView(g, ys, i, nullptr));
      const Vec yi = y_update(prob.B(i), x[i], prob.q(), n_agents, pb[i], s, rho, g.degree(i));
      worst = std::max(worst, (yi - dense[i]).lpNorm<Eigen::Infinity>());
    }
  }
  return {worst <= 1e-10, "instances=50 worst_abs_err=" + sci(worst)};
}

// 3 --------------------------------------------------------------------------
Verdict subsolver() {
  Rng rng(33);
  double worst = 0.0, worst_loose = 0.0;
  for (int t = 0; t < 50; ++t) {
    const CoupledProblem prob = build_quadratic_instance(900 + t, 3, 1 + t % 5, 1 + t % 4, 0.1 + t % 3);
    const QuadraticObjective& f = as_quadratic(prob, 0);
    const Mat& b = prob.B(0);
    const int n = f.dim(), m = prob.constraint_dim(), deg = 1 + t % 3;
    const Vec pi = rng.normal_vec(m), si = rng.normal_vec(m), z = rng.normal_vec(n);
    const double rho = 0.2 + rng.uniform(), p = 0.1 + rng.uniform();
    const LocalSubproblem sub(f, b, nullptr, prob.q(), 3, deg, p, rho, pi, si, z);
    // Normal equations of the subproblem, solved densely.
    const double w = 1.0 / (2.0 * rho * deg);
    const Mat h = f.Q() + p * Mat::Identity(n, n) + w * b.transpose() * b;
    const Vec t_i = prob.q() / 3.0 + pi - rho * si;
    const Vec x = h.ldlt().solve(-f.c() + p * z + w * b.transpose() * t_i);
    worst = std::max(worst, (x_update_exact(sub, Vec::Zero(n), {1e-10, 10000}).x - x).lpNorm<Eigen::Infinity>());
    worst_loose = std::max(worst_loose, (x_update_exact(sub, Vec::Zero(n), {1e-5, 10000}).x - x).lpNorm<Eigen::Infinity>());
  }
  // Rule activity: runs at the experiment tolerance 1e−5.
  long solves = 0, by_tol = 0;
  for (int s = 0; s < 20; s += 3) {
    QuadCase q = quad_case(s);
    q.config.subsolver_tol = 1e-5;
    q.config.max_rounds = 500;
    const IterationTrace tr = run(q.problem, q.graph, q.config);
    solves += tr.subsolver.solves;
    by_tol += tr.subsolver.stopped_by_tol;
  }
  {
    const VerticalDataset d = synthetic_vertical_dataset(1, 100, 25, 20, 2, 1.0);
    const CoupledProblem lr = build_vertical_lr(d, 0.01, 0.5, 0);
    SolverConfig c;
    c.alpha = c.rho = c.p = 0.01;
    c.beta = 0.1;
    c.max_rounds = 300;
    const IterationTrace tr = run(lr, build_random_connected(25, 0.2, 1), c);
    solves += tr.subsolver.solves;
    by_tol += tr.subsolver.stopped_by_tol;
  }
  const double frac = static_cast<double>(by_tol) / static_cast<double>(solves);
  return {worst <= 1e-6 && frac >= 0.95,
          "subproblems=50 worst_abs_err=" + sci(worst) + " (at rule tol 1e-5: " + sci(worst_loose) +
              ") rule_active=" + std::to_string(by_tol) + "/" + std::to_string(solves) + "=" + sci(frac)};
}

// 4 --------------------------------------------------------------------------
Verdict phi_descent_check() {
  int bad = 0, uncertified = 0;
  double worst = 0.0;
  for (int s = 0; s < 20; ++s) {
    QuadCase q = quad_case(s);
    if (!certified(q)) ++uncertified;
    q.config.max_rounds = 500;
    q.config.record_phi = true;
    const IterationTrace tr = run(q.problem, q.graph, q.config);
    const DescentStats d = phi_descent(tr, 1e-9);
    if (!d.finite || d.violations > 0 || d.rounds != 500) ++bad;
    worst = std::max(worst, d.worst);
  }
  return {bad == 0 && uncertified == 0,
          "instances=20 rounds=500 failing=" + std::to_string(bad) + " worst_rel_rise=" + sci(worst) +
              " uncertified=" + std::to_string(uncertified)};
}

// 5 --------------------------------------------------------------------------
Verdict rate() {
  double steepest = -std::numeric_limits<double>::infinity(), flattest = steepest;
  steepest = std::numeric_limits<double>::infinity();
  for (int s = 0; s < 20; ++s) {
    QuadCase q = quad_case(s);
    q.config.max_rounds = 1000;
    const IterationTrace tr = run(q.problem, q.graph, q.config);
    const SlopeFit fit = best_iterate_slope(tr.rounds, 10, 1000);
    steepest = std::min(steepest, fit.slope);
    flattest = std::max(flattest, fit.slope);
  }
  return {flattest <= -0.9 + 0.15,
          "instances=20 slope_range=[" + sci(steepest) + ", " + sci(flattest) + "] limit=-0.75"};
}

// 6 --------------------------------------------------------------------------
Verdict ipdc_parity() {
  double worst_eps = 0.0, worst_dz = 0.0, worst_dy = 0.0;
  int out_of_regime = 0;
  for (int s = 0; s < 20; ++s) {
    const QuadCase q = quad_case(s);
    int dmin = q.graph.degree(0);
    for (int i = 0; i < q.graph.n_agents(); ++i) dmin = std::min(dmin, q.graph.degree(i));
    const double lip = q.sheet.gamma_plus + q.config.p +
                       q.sheet.b_max * q.sheet.b_max / (2.0 * q.config.rho * dmin);
    SolverConfig ci = q.config;
    ci.mode = Mode::inexact_ipdc;
    ci.zeta = 0.5 / lip;
    ci.max_rounds = 20000;
    SheetRequest req;
    req.p = ci.p;
    req.rho = ci.rho;
    req.alpha = ci.alpha;
    req.beta = ci.beta;
    req.zeta = ci.zeta;
    if (!inside_regime(regime_conditions(constant_sheet(q.problem, q.graph, req)))) ++out_of_regime;
    const IterationTrace ti = run(q.problem, q.graph, ci);
    const IterationTrace tp = run(q.problem, q.graph, q.config);
    const BlockVec zi = z_of(ti.final_state), zp = z_of(tp.final_state);
    worst_eps = std::max(worst_eps, eps_kkt(q.problem, zi).epsilon);
    for (std::size_t i = 0; i < zi.size(); ++i)
      worst_dz = std::max(worst_dz, (zi[i] - zp[i]).lpNorm<Eigen::Infinity>());
    worst_dy = std::max(worst_dy, (mean_y(ti.final_state) - mean_y(tp.final_state)).lpNorm<Eigen::Infinity>());
  }
  return {worst_eps <= 1e-6 && worst_dz <= 1e-5 && worst_dy <= 1e-5,
          "instances=20 worst_eps=" + sci(worst_eps) + " worst_dz=" + sci(worst_dz) +
              " worst_dmean_y=" + sci(worst_dy) + " ipdc_out_of_regime=" + std::to_string(out_of_regime)};
}

// 7 --------------------------------------------------------------------------
struct LrTerminal {
  double infeasibility = 0.0;
  double residue = 0.0;
  int diverged = 0;
};

// Mean over seeds of each run's last recorded row.
LrTerminal lr_terminal(const CoupledProblem& prob, const Graph& g, double alpha, double rho, double p) {
  ExperimentConfig cfg;
  cfg.solver.alpha = alpha;
  cfg.solver.rho = rho;
  cfg.solver.p = p;
  cfg.solver.beta = 0.1;
  cfg.solver.max_rounds = 2000;
  cfg.solver.divergence_limit = 1e3;
  cfg.repeat = 10;
  const ExperimentResult r = run_experiment(prob, g, cfg);
  LrTerminal t;
  for (const RunOutcome& o : r.runs) {
    if (o.aborted || o.trace.rounds.empty()) {
      t.infeasibility = t.residue = std::numeric_limits<double>::infinity();
      ++t.diverged;
      continue;
    }
    t.infeasibility += o.trace.rounds.back().infeasibility / 10.0;
    t.residue += o.trace.rounds.back().grad_residue / 10.0;
    t.diverged += o.trace.diverged;
  }
  return t;
}

Verdict lr_effects() {
  const auto t0 = std::chrono::steady_clock::now();
  const VerticalDataset d = synthetic_vertical_dataset(1, 100, 25, 20, 2, 1.0);
  const CoupledProblem prob = build_vertical_lr(d, 0.01, 0.5, 0);
  const Graph g = build_random_connected(25, 0.2, 1);
  const double base = 0.01;

  const LrTerminal hi = lr_terminal(prob, g, 10.0 * base, base, base);
  const LrTerminal lo = lr_terminal(prob, g, base / 10.0, base, base);
  const bool a = hi.infeasibility >= 10.0 * lo.infeasibility;

  std::vector<double> inf;
  for (double rho : {1e-2, 1e-1, 1.0, 10.0}) inf.push_back(lr_terminal(prob, g, base, rho, base).infeasibility);
  const bool b = std::is_sorted(inf.begin(), inf.end());

  std::vector<double> res;
  for (double p : {1e-2, 1.0, 1e2}) res.push_back(lr_terminal(prob, g, base, base, p).residue);
  const bool c = std::is_sorted(res.begin(), res.end());

  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << "(a)" << (a ? "ok" : "no") << " inf(alpha=10rho)=" << sci(hi.infeasibility)
     << " [diverged " << hi.diverged << "/10] inf(alpha=rho/10)=" << sci(lo.infeasibility) << " (b)"
     << (b ? "ok" : "no") << " inf(rho)=";
  for (double v : inf) os << sci(v) << ',';
  os << " (c)" << (c ? "ok" : "no") << " residue(p)=";
  for (double v : res) os << sci(v) << ',';
  os << " runtime=" << sci(secs) << "s";
  return {a && b && c && secs < 900.0, os.str()};
}

// 8 --------------------------------------------------------------------------
Verdict cycle_spectra() {
  double worst = 0.0, lmax = 0.0;
  for (int n = 3; n <= 64; ++n) {
    const SpectralSummary s = spectral_summary(derive_matrices(build_cycle(n)));
    worst = std::max(worst, std::fabs(s.sigma_min_minus - (2.0 - 2.0 * std::cos(2.0 * std::numbers::pi / n))));
    lmax = std::max(lmax, s.lambda_max_plus);
  }
  // Fixed blocks B_i = [1] and B_i = diag(1, 1/2).
  int decreases = 0;
  for (int kind = 0; kind < 2; ++kind) {
    const int m = kind + 1;
    Mat blk = Mat::Identity(m, m);
    if (kind) blk(1, 1) = 0.5;
    double prev12 = 0.0, prev3 = 0.0;
    for (int n = 4; n <= 40; ++n) {
      std::vector<ObjectivePtr> objs(n, std::make_shared<QuadraticObjective>(Mat::Identity(m, m), Vec::Zero(m)));
      const CoupledProblem prob(objs, std::vector<Mat>(n, blk), Vec::Zero(m), {"cycle", true, ""});
      const ThetaBounds t = theta_bounds_fullrank(prob, build_cycle(n));
      decreases += t.theta12_bound < prev12;
      decreases += t.theta3_bound < prev3;
      prev12 = t.theta12_bound;
      prev3 = t.theta3_bound;
    }
  }
  return {worst <= 1e-12 && lmax <= 4.0 + 1e-12 && decreases == 0,
          "cycles=3..64 worst_sigma_err=" + sci(worst) + " max_lambda_plus=" + sci(lmax) +
              " theta_decreases=" + std::to_string(decreases)};
}

// 9 --------------------------------------------------------------------------
struct BoundInstance {
  CoupledProblem problem;
  Graph graph;
};

BoundInstance bound_instance(int s) {
  const int n_agents = 3 + s % 5, n = 1 + s % 3, m = 1 + (s * 5) % 4;
  CoupledProblem prob = build_quadratic_instance(500 + s, n_agents, n, m, 0.5 + s % 3);
  Graph g = s % 2 ? build_random_connected(n_agents, 0.6, s) : build_cycle(n_agents);
  return {std::move(prob), std::move(g)};
}

BlockVec random_blocks(Rng& rng, const std::vector<int>& dims) {
  BlockVec b;
  for (int d : dims) b.push_back(rng.normal_vec(d));
  return b;
}

Verdict error_bound_suite() {
  int instances = 0;
  long sigma3_bad = 0, a2_bad = 0, kappa_bad = 0, sv_bad = 0, sv_min_bad = 0;
  long sigma3_n = 0, a2_n = 0, kappa_n = 0;
  for (int s = 0; s < 80 && instances < 50; ++s) {
    const BoundInstance in = bound_instance(s);
    if (!theta_bounds_fullrank(in.problem, in.graph).full_row_rank) continue;
    ++instances;
    const CoupledProblem& prob = in.problem;
    const CurvatureBounds cb = prob.curvature();
    const double p = 1.0;
    Rng rng(static_cast<std::uint64_t>(s) + 1000);

    const double s3 = perturbation_constants(p, cb.gamma_minus, cb.gamma_plus, prob.b_max(), 1.0).sigma3;
    const double kap = kappa(p, cb.gamma_plus, prob.n_agents(), prob.b_max());
    for (int k = 0; k < 10; ++k) {
      const BlockVec z1 = random_blocks(rng, prob.local_dims()), z2 = random_blocks(rng, prob.local_dims());
      const ProxSolution x1 = prox_solution_map(prob, z1, p), x2 = prox_solution_map(prob, z2, p);
      sigma3_bad += (stack(x1.x) - stack(x2.x)).norm() > s3 * (stack(z1) - stack(z2)).norm() * (1 + 1e-10);
      ++sigma3_n;
      const double gap = (stack(z1) - stack(x1.x)).squaredNorm();
      kappa_bad += eps_kkt(prob, z1).epsilon > kap * gap * (1 + 1e-9);
      ++kappa_n;
    }

    SheetRequest req;
    req.p = p;
    req.rho = 1.0;
    const ConstantSheet sh = constant_sheet(prob, in.graph, req);
    SolverConfig cfg;
    cfg.p = p;
    cfg.rho = 1.0;
    cfg.alpha = 0.05;
    cfg.beta = 0.5;
    cfg.subsolver_tol = 1e-12;
    cfg.seed = static_cast<std::uint64_t>(s);
    PdcEngine engine(prob, in.graph, cfg);
    engine.initialize();
    const PhiEvaluator ev(prob, in.graph, cfg.rho, cfg.p, cfg.alpha);
    const Mat lp = derive_matrices(in.graph, prob.constraint_dim()).L_plus();
    for (int r = 0; r < 30; ++r) {
      const BlockVec z = z_of(engine.agents());
      engine.step();
      BlockVec y;
      for (const AgentState& a : engine.agents()) y.push_back(a.y);
      const Vec dist = stack(y) - stack(ev.project(y, engine.mu(), z));
      const Vec step = lp * (stack(y) - stack(engine.y_prev()));
      a2_bad += dist.squaredNorm() > sh.a.a2 * step.squaredNorm() * (1 + 1e-9) + 1e-20;
      ++a2_n;
    }

    const SingularValueChecks c = singular_value_checks(prob, in.graph);
    const double lo = 1 - 1e-12, hi = 1 + 1e-12;
    sv_bad += c.sigma_min_m1 < c.lower_m1 * lo || c.sigma_min_m2 < c.lower_m2 * lo ||
              c.sigma_max_m1 > c.upper_m1 * hi || c.sigma_max_m2 > c.upper_m2 * hi;
    sv_min_bad += c.sigma_min_m1 < c.lower_m1_min * lo || c.sigma_min_m2 < c.lower_m2_min * lo ||
                  c.sigma_max_m1 > c.upper_m1 * hi || c.sigma_max_m2 > c.upper_m2 * hi;
  }
  std::ostringstream os;
  os << "instances=" << instances << " sigma3 " << sigma3_bad << "/" << sigma3_n << " a2 " << a2_bad
     << "/" << a2_n << " kappa " << kappa_bad << "/" << kappa_n << " sv_enclosures(max-combined) "
     << sv_bad << "/" << instances << " [min-combined " << sv_min_bad << "/" << instances << "]";
  return {instances >= 50 && sigma3_bad == 0 && a2_bad == 0 && kappa_bad == 0 && sv_bad == 0, os.str()};
}

// 10 -------------------------------------------------------------------------
// Moves every coordinate to |v| ≥ 0.1, which keeps ReLU pre-activations far
// from their kink at the difference step used below.
Vec off_kinks(Vec v) {
  for (Eigen::Index k = 0; k < v.size(); ++k)
    if (std::fabs(v[k]) < 0.1) v[k] = v[k] < 0 ? -0.1 : 0.1;
  return v;
}

Verdict gradients() {
  Rng rng(10);
  double worst_quad = 0.0, worst_other = 0.0;
  int checked = 0;
  for (int s = 0; s < 20; ++s) {
    const CoupledProblem prob = build_quadratic_instance(40 + s, 3, 1 + s % 5, 2, s % 2 ? 0.5 : -0.5);
    for (int i = 0; i < prob.n_agents(); ++i, ++checked)
      worst_quad = std::max(worst_quad, finite_diff_check(prob.objective(i), rng.normal_vec(prob.local_dim(i)), 1e-5));
  }
  const VerticalDataset d = synthetic_vertical_dataset(4, 30, 4, 3, 2, 1.0);
  std::vector<ObjectivePtr> objs = build_vertical_lr(d, 0.01, 0.5, 0).objectives();
  objs.push_back(std::make_shared<LogisticLoss>(d.labels));
  objs.push_back(std::make_shared<NonconvexPenalty>(5, 0.3, 2.0));
  const VerticalDataset dm = synthetic_vertical_dataset(5, 12, 3, 2, 3, 1.0);
  const CoupledProblem nn = build_vertical_nn(dm, 4, 0, 5);
  objs.insert(objs.end(), nn.objectives().begin(), nn.objectives().end());
  for (const ObjectivePtr& o : objs) {
    for (int k = 0; k < 5; ++k, ++checked)
      worst_other = std::max(worst_other, finite_diff_check(*o, off_kinks(rng.normal_vec(o->dim())), 1e-6));
  }
  return {worst_quad <= 1e-7 && worst_other <= 1e-5,
          "objectives_checked=" + std::to_string(checked) + " worst_quadratic=" + sci(worst_quad) +
              " worst_lr_nn=" + sci(worst_other)};
}

// 11 -------------------------------------------------------------------------
std::string trace_bytes(const IterationTrace& t) {
  std::ostringstream os;
  write_trace_csv(os, t.rounds);
  write_state_snapshot(os, t.final_state);
  return os.str();
}

Verdict locality() {
  QuadCase q = quad_case(7);  // N = 4 on a random graph
  q.config.max_rounds = 1000;
  q.config.record_phi = true;
  const IterationTrace one = run(q.problem, q.graph, q.config);
  q.config.threads = 4;
  const IterationTrace four = run(q.problem, q.graph, q.config);

  const VerticalDataset d = synthetic_vertical_dataset(1, 60, 12, 5, 2, 1.0);
  const CoupledProblem lr = build_vertical_lr(d, 0.01, 0.5, 0);
  const Graph g = build_random_connected(12, 0.2, 3);
  SolverConfig c;
  c.alpha = c.rho = c.p = 0.01;
  c.beta = 0.1;
  c.max_rounds = 1000;
  const IterationTrace lr1 = run(lr, g, c);
  c.threads = 3;
  const IterationTrace lr3 = run(lr, g, c);

  const long violations = one.locality_violations + four.locality_violations + lr1.locality_violations +
                          lr3.locality_violations;
  const bool same = trace_bytes(one) == trace_bytes(four) && trace_bytes(lr1) == trace_bytes(lr3);
  return {violations == 0 && one.neighbor_reads > 0 && lr1.neighbor_reads > 0 && same &&
              one.rounds.size() == 1000 && lr1.rounds.size() == 1000,
          "rounds=1000 neighbor_reads=" + std::to_string(one.neighbor_reads + lr1.neighbor_reads) +
              " non_neighbor_reads=" + std::to_string(violations) +
              " threads_1_vs_n_identical=" + (same ? "yes" : "no")};
}

std::set<int> parse_list(const std::string& s) {
  std::set<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.insert(std::stoi(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string only, expect;
  app.add_option("--only", only, "comma-separated criteria to run");
  app.add_option("--expect-fail", expect, "comma-separated criteria known to fail");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<int, std::function<Verdict()>>> all = {
      {1, kkt_oracle},  {2, y_update_oracle}, {3, subsolver},      {4, phi_descent_check},
      {5, rate},        {6, ipdc_parity},     {7, lr_effects},     {8, cycle_spectra},
      {9, error_bound_suite}, {10, gradients},      {11, locality},
  };
  const std::set<int> selected = parse_list(only), expected = parse_list(expect);
  std::set<int> failed, ran;
  for (const auto& [id, fn] : all) {
    if (!selected.empty() && !selected.count(id)) continue;
    ran.insert(id);
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) failed.insert(id);
    std::cout << "criterion " << id << ' ' << (v.pass ? "PASS" : "FAIL") << ' ' << v.detail << " ("
              << sci(seconds_since(t0)) << "s)" << std::endl;
  }
  std::set<int> expected_ran;
  for (int id : expected)
    if (ran.count(id)) expected_ran.insert(id);
  const bool as_expected = failed == expected_ran;
  std::cout << "summary passed=" << ran.size() - failed.size() << "/" << ran.size()
            << (as_expected ? " failures match the expected set" : " UNEXPECTED outcome") << std::endl;
  return as_expected ? 0 : 1;
}
