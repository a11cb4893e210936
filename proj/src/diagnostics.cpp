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
#include "pdc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "pdc/engine.hpp"

namespace pdc {

namespace {

void check_blocks(const CoupledProblem& problem, const BlockVec& x, const char* who) {
  if (static_cast<int>(x.size()) != problem.n_agents())
    throw std::invalid_argument(std::string(who) + ": wrong number of blocks");
  for (int i = 0; i < problem.n_agents(); ++i)
    if (x[i].size() != problem.local_dim(i))
      throw std::invalid_argument(std::string(who) + ": block size mismatch at agent " + std::to_string(i));
}

void check_duals(const CoupledProblem& problem, const BlockVec& y, const char* who) {
  if (static_cast<int>(y.size()) != problem.n_agents())
    throw std::invalid_argument(std::string(who) + ": wrong number of dual blocks");
  for (const auto& yi : y)
    if (yi.size() != problem.constraint_dim())
      throw std::invalid_argument(std::string(who) + ": dual block size mismatch");
}

}  // namespace

double gradient_residue(const CoupledProblem& problem, const BlockVec& x, const BlockVec& y) {
  check_blocks(problem, x, "gradient_residue");
  check_duals(problem, y, "gradient_residue");
  double s = 0.0;
  for (int i = 0; i < problem.n_agents(); ++i)
    s += (problem.objective(i).gradient(x[i]) + problem.B(i).transpose() * y[i]).squaredNorm();
  return s / problem.total_dim();
}

double gradient_residue(const CoupledProblem& problem, const BlockVec& x, const Vec& y) {
  return gradient_residue(problem, x, BlockVec(problem.n_agents(), y));
}

double infeasibility(const CoupledProblem& problem, const BlockVec& x) {
  check_blocks(problem, x, "infeasibility");
  return (problem.coupling_sum(x) - problem.q()).squaredNorm() / problem.constraint_dim();
}

double consensus_gap(const Graph& g, const BlockVec& y) {
  if (static_cast<int>(y.size()) != g.n_agents())
    throw std::invalid_argument("consensus_gap: wrong number of blocks");
  double s = 0.0;
  for (const Edge& e : g.edges()) s += (y[e.i] - y[e.j]).squaredNorm();
  return s;
}

KktReport eps_kkt(const CoupledProblem& problem, const BlockVec& x) {
  check_blocks(problem, x, "eps_kkt");
  const Mat bt = problem.assembled_B().transpose();  // Σn_i x M
  Vec g(problem.total_dim());
  int off = 0;
  for (int i = 0; i < problem.n_agents(); ++i) {
    g.segment(off, problem.local_dim(i)) = problem.objective(i).gradient(x[i]);
    off += problem.local_dim(i);
  }
  KktReport r;
  r.best_dual = bt.completeOrthogonalDecomposition().solve(-g);
  r.stationarity = (g + bt * r.best_dual).squaredNorm();
  r.feasibility = (problem.coupling_sum(x) - problem.q()).squaredNorm();
  r.epsilon = std::max(r.stationarity, r.feasibility);
  r.residue = r.stationarity / problem.total_dim();
  r.infeasibility = r.feasibility / problem.constraint_dim();
  return r;
}

// ---------------------------------------------------------------------------

namespace {

ProxSolution prox_quadratic(const CoupledProblem& problem, const BlockVec& z, double p) {
  const int nt = problem.total_dim();
  const int m = problem.constraint_dim();
  Mat kkt = Mat::Zero(nt + m, nt + m);
  Vec rhs(nt + m);
  int off = 0;
  for (int i = 0; i < problem.n_agents(); ++i) {
    const auto& f = as_quadratic(problem, i);
    const int ni = problem.local_dim(i);
    kkt.block(off, off, ni, ni) = f.Q() + p * Mat::Identity(ni, ni);
    kkt.block(off, nt, ni, m) = problem.B(i).transpose();
    kkt.block(nt, off, m, ni) = problem.B(i);
    rhs.segment(off, ni) = p * z[i] - f.c();
    off += ni;
  }
  rhs.tail(m) = problem.q();
  // The multiplier is unique only when the stacked B has full row rank;
  // the orthogonal decomposition returns the minimum-norm pair otherwise.
  const auto dec = kkt.completeOrthogonalDecomposition();
  Vec sol = dec.solve(rhs);
  for (int k = 0; k < 2; ++k) sol += dec.solve(rhs - kkt * sol);
  ProxSolution out;
  out.x = split(sol.head(nt), problem.local_dims());
  out.y = sol.tail(m);
  out.residual = (kkt * sol - rhs).lpNorm<Eigen::Infinity>();
  return out;
}

ProxSolution prox_general(const CoupledProblem& problem, const BlockVec& z, double p) {
  const int n = problem.n_agents();
  const Mat b = problem.assembled_B();
  const Vec zs = stack(z);
  const std::vector<int> dims = problem.local_dims();
  const double c = 10.0;
  const double bn = spectral_norm(b);
  const double lip = std::max(problem.curvature().gamma_plus, 0.0) + p + c * bn * bn;
  Vec x = zs;
  Vec y = Vec::Zero(problem.constraint_dim());
  ProxSolution out;
  out.converged = false;
  auto lagrangian_grad = [&](const Vec& xs, const Vec& mult) {
    const BlockVec xb = split(xs, dims);
    Vec g(xs.size());
    int off = 0;
    for (int i = 0; i < n; ++i) {
      g.segment(off, dims[i]) = problem.objective(i).gradient(xb[i]);
      off += dims[i];
    }
    return Vec(g + p * (xs - zs) + b.transpose() * mult);
  };
  for (int outer = 1; outer <= 500; ++outer) {
    auto vg = [&](const Vec& xs, Vec& grad) {
      const BlockVec xb = split(xs, dims);
      double v = 0.0;
      grad.resize(xs.size());
      int off = 0;
      for (int i = 0; i < n; ++i) {
        Vec gi;
        v += problem.objective(i).value_and_gradient(xb[i], gi);
        grad.segment(off, dims[i]) = gi;
        off += dims[i];
      }
      const Vec r = b * xs - problem.q();
      v += 0.5 * p * (xs - zs).squaredNorm() + y.dot(r) + 0.5 * c * r.squaredNorm();
      grad += p * (xs - zs) + b.transpose() * (y + c * r);
      return v;
    };
    const SubsolverResult inner = fista_minimize(vg, lip, x, {1e-13, 50000});
    x = inner.x;
    const Vec r = b * x - problem.q();
    y += c * r;
    out.iterations = outer;
    out.residual = std::max(r.norm(), lagrangian_grad(x, y).norm());
    if (out.residual <= 1e-10) {
      out.converged = true;
      break;
    }
  }
  out.x = split(x, dims);
  out.y = y;
  return out;
}

}  // namespace

ProxSolution prox_solution_map(const CoupledProblem& problem, const BlockVec& z, double p) {
  check_blocks(problem, z, "prox_solution_map");
  if (!(p + problem.curvature().gamma_minus > 0.0))
    throw std::invalid_argument("prox_solution_map: p must exceed -gamma_minus");
  return problem.all_quadratic() ? prox_quadratic(problem, z, p) : prox_general(problem, z, p);
}

// ---------------------------------------------------------------------------

PhiEvaluator::PhiEvaluator(const CoupledProblem& problem, const Graph& graph, double rho,
                           double p, double alpha)
    : problem_(problem), rho_(rho), p_(p), alpha_(alpha), n_(problem.n_agents()),
      m_(problem.constraint_dim()) {
  if (!problem.all_quadratic())
    throw std::invalid_argument("PhiEvaluator: every local objective must be quadratic");
  if (graph.n_agents() != n_) throw std::invalid_argument("PhiEvaluator: graph size mismatch");
  const GraphMatrices gm = derive_matrices(graph, m_);
  a_ = gm.A();
  l_minus_ = gm.L_minus();
  l_plus_ = gm.L_plus();
  k_ = rho_ * l_minus_;
  for (int i = 0; i < n_; ++i) {
    const auto& f = as_quadratic(problem, i);
    const int ni = f.dim();
    h_.emplace_back(f.Q() + p_ * Mat::Identity(ni, ni));
    if (h_.back().info() != Eigen::Success)
      throw std::invalid_argument("PhiEvaluator: Q_i + pI is not positive definite");
    b_hinv_.push_back(h_.back().solve(problem.B(i).transpose()).transpose());
    k_.block(i * m_, i * m_, m_, m_) += b_hinv_.back() * problem.B(i).transpose();
  }
  k_ = 0.5 * (k_ + k_.transpose());
  const Eigen::SelfAdjointEigenSolver<Mat> es(k_);
  const Vec& ev = es.eigenvalues();
  const double tol = 1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  Vec inv = Vec::Zero(ev.size());
  for (Eigen::Index k = 0; k < ev.size(); ++k)
    if (ev[k] > tol) inv[k] = 1.0 / ev[k];
  k_pinv_ = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

Vec PhiEvaluator::linear_term(const Vec& mu, const BlockVec& z) const {
  const Vec atmu = a_.transpose() * mu;
  Vec b(n_ * m_);
  for (int i = 0; i < n_; ++i) {
    const Vec h = as_quadratic(problem_, i).c() - p_ * z[i];
    b.segment(i * m_, m_) = -b_hinv_[i] * h - problem_.q() / static_cast<double>(n_) -
                            atmu.segment(i * m_, m_);
  }
  return b;
}

double PhiEvaluator::constant_term(const BlockVec& z) const {
  double c = 0.0;
  for (int i = 0; i < n_; ++i) {
    const auto& f = as_quadratic(problem_, i);
    const Vec h = f.c() - p_ * z[i];
    c += f.value(Vec::Zero(f.dim())) + 0.5 * p_ * z[i].squaredNorm() - 0.5 * h.dot(h_[i].solve(h));
  }
  return c;
}

void PhiEvaluator::check_range(const Vec& b) const {
  const double miss = (k_ * (k_pinv_ * b) - b).norm();
  if (miss > 1e-8 * (1.0 + b.norm()))
    throw std::runtime_error("PhiEvaluator: the dual function is unbounded at this multiplier");
}

double PhiEvaluator::g_value(const BlockVec& x, const BlockVec& y, const Vec& mu,
                             const BlockVec& z) const {
  double s = 0.0;
  for (int i = 0; i < n_; ++i) {
    s += problem_.objective(i).value(x[i]) + 0.5 * p_ * (x[i] - z[i]).squaredNorm() +
         y[i].dot(problem_.B(i) * x[i]) - y[i].dot(problem_.q()) / n_;
  }
  const Vec ay = a_ * stack(y);
  return s - mu.dot(ay) - 0.5 * rho_ * ay.squaredNorm();
}

double PhiEvaluator::l_rho(const BlockVec& y, const Vec& mu, const BlockVec& z) const {
  const Vec ys = stack(y);
  return -0.5 * ys.dot(k_ * ys) + linear_term(mu, z).dot(ys) + constant_term(z);
}

double PhiEvaluator::dual_d(const Vec& mu, const BlockVec& z) const {
  const Vec b = linear_term(mu, z);
  check_range(b);
  return constant_term(z) + 0.5 * b.dot(k_pinv_ * b);
}

BlockVec PhiEvaluator::maximizer(const Vec& mu, const BlockVec& z) const {
  const Vec b = linear_term(mu, z);
  check_range(b);
  return split(k_pinv_ * b, std::vector<int>(n_, m_));
}

BlockVec PhiEvaluator::project(const BlockVec& y, const Vec& mu, const BlockVec& z) const {
  const Vec b = linear_term(mu, z);
  check_range(b);
  const Vec ys = stack(y);
  return split(ys - k_pinv_ * (k_ * ys - b), std::vector<int>(n_, m_));
}

PhiComponents PhiEvaluator::evaluate(const BlockVec& x, const BlockVec& y, const BlockVec& y_prev,
                                     const Vec& mu, const BlockVec& z) const {
  PhiComponents c;
  const Vec ys = stack(y);
  const Vec dy = ys - stack(y_prev);
  c.g_value = g_value(x, y, mu, z);
  c.g_tilde = c.g_value + 0.5 * alpha_ * ys.dot(l_minus_ * ys) + 0.5 * rho_ * dy.dot(l_plus_ * dy);
  c.l_rho = l_rho(y, mu, z);
  c.dual_d = dual_d(mu, z);
  c.phi = c.g_tilde - 2.0 * c.l_rho + 2.0 * c.dual_d;
  return c;
}

PhiComponents phi_eval_quadratic(const CoupledProblem& problem, const Graph& graph,
                                 const BlockVec& x, const BlockVec& y, const BlockVec& y_prev,
                                 const Vec& mu, const BlockVec& z, double rho, double p,
                                 double alpha) {
  return PhiEvaluator(problem, graph, rho, p, alpha).evaluate(x, y, y_prev, mu, z);
}

}  // namespace pdc
