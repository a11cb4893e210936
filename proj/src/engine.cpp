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
#include "pdc/engine.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <exception>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "pdc/diagnostics.hpp"

namespace pdc {

const char* to_string(Mode m) { return m == Mode::exact_pdc ? "exact" : "inexact"; }

Mode parse_mode(const std::string& s) {
  if (s == "exact" || s == "pdc" || s == "exact_pdc") return Mode::exact_pdc;
  if (s == "inexact" || s == "ipdc" || s == "inexact_ipdc") return Mode::inexact_ipdc;
  throw std::invalid_argument("unknown solver mode '" + s + "'");
}

void SolverConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::invalid_argument(std::string("solver: ") + name + " must be positive");
  };
  positive(p, "p");
  positive(alpha, "alpha");
  positive(beta, "beta");
  positive(rho, "rho");
  positive(subsolver_tol, "subsolver_tol");
  if (beta > 1.0) throw std::invalid_argument("solver: beta must not exceed 1");
  if (mode == Mode::inexact_ipdc) positive(zeta, "zeta");
  if (mode == Mode::exact_pdc && zeta != 0.0)
    throw std::invalid_argument("solver: zeta is only used by the inexact mode");
  if (subsolver_max_iter < 1) throw std::invalid_argument("solver: subsolver_max_iter must be >= 1");
  if (max_rounds < 1) throw std::invalid_argument("solver: max_rounds must be >= 1");
  if (divergence_limit < 0.0) throw std::invalid_argument("solver: divergence_limit must be >= 0");
  if (tol_residue < 0.0 || tol_infeasibility < 0.0)
    throw std::invalid_argument("solver: stopping tolerances must be nonnegative");
  if (threads < 1) throw std::invalid_argument("solver: threads must be >= 1");
}

long AccessLog::total_reads() const {
  long s = 0;
  for (long r : reads) s += r;
  return s;
}

long AccessLog::total_violations() const {
  long s = 0;
  for (long v : violations) s += v;
  return s;
}

NeighborView::NeighborView(const Graph& g, const BlockVec& snapshot, int self, AccessLog* log)
    : graph_(g), snap_(snapshot), self_(self), log_(log) {}

const Vec& NeighborView::own() const {
  if (log_) ++log_->reads[self_];
  return snap_[self_];
}

const Vec& NeighborView::y(int j) const {
  if (log_) {
    ++log_->reads[self_];
    if (j != self_ && !graph_.has_edge(self_, j)) ++log_->violations[self_];
  }
  return snap_.at(j);
}

Vec laplacian_neighbor_sum(const NeighborView& view) {
  const Vec& yi = view.own();
  Vec s = Vec::Zero(yi.size());
  for (int j : view.neighbors()) s += yi - view.y(j);
  return s;
}

Vec signless_neighbor_sum(const NeighborView& view) {
  const Vec& yi = view.own();
  Vec s = Vec::Zero(yi.size());
  for (int j : view.neighbors()) s += yi + view.y(j);
  return s;
}

namespace {

BlockVec collect_y(const std::vector<AgentState>& state) {
  BlockVec y;
  y.reserve(state.size());
  for (const auto& a : state) y.push_back(a.y);
  return y;
}

bool finite(const Vec& v) { return v.allFinite(); }

}  // namespace

Vec signless_neighbor_sum(const std::vector<AgentState>& state, const Graph& g, int i) {
  const BlockVec y = collect_y(state);
  return signless_neighbor_sum(NeighborView(g, y, i, nullptr));
}

void dual_p_update(std::vector<AgentState>& state, const Graph& g, double alpha) {
  const BlockVec y = collect_y(state);
  for (int i = 0; i < g.n_agents(); ++i)
    state[i].p += alpha * laplacian_neighbor_sum(NeighborView(g, y, i, nullptr));
}

// ---------------------------------------------------------------------------
// Local subproblem

LocalSubproblem::LocalSubproblem(const LocalObjective& f, const Mat& B, const Mat* gram,
                                 const Vec& q, int n_agents, int degree, double prox,
                                 double rho, const Vec& p_i, const Vec& signless_sum,
                                 const Vec& z_i)
    : f_(f), b_(B), gram_(gram), z_(z_i), prox_(prox) {
  if (degree < 1) throw std::invalid_argument("subproblem: agent has no neighbors");
  weight_ = 1.0 / (2.0 * rho * degree);
  target_ = q / static_cast<double>(n_agents) + p_i - rho * signless_sum;
  if (gram_) {
    bt_target_ = b_.transpose() * target_;
    target_sq_ = target_.squaredNorm();
  }
  const double bn = spectral_norm(b_);
  lipschitz_ = std::max(f_.curvature().gamma_plus, 0.0) + prox_ + weight_ * bn * bn;
}

Vec LocalSubproblem::residual(const Vec& x) const { return b_ * x - target_; }

double LocalSubproblem::value(const Vec& x) const {
  double coupling;
  if (gram_) {
    coupling = x.dot(*gram_ * x) - 2.0 * x.dot(bt_target_) + target_sq_;
  } else {
    coupling = (b_ * x - target_).squaredNorm();
  }
  return f_.value(x) + 0.5 * prox_ * (x - z_).squaredNorm() + 0.5 * weight_ * coupling;
}

double LocalSubproblem::value_and_gradient(const Vec& x, Vec& grad) const {
  const double fv = f_.value_and_gradient(x, grad);
  grad += prox_ * (x - z_);
  double coupling;
  if (gram_) {
    const Vec gx = *gram_ * x;
    coupling = x.dot(gx) - 2.0 * x.dot(bt_target_) + target_sq_;
    grad += weight_ * (gx - bt_target_);
  } else {
    const Vec r = b_ * x - target_;
    coupling = r.squaredNorm();
    grad.noalias() += weight_ * (b_.transpose() * r);
  }
  return fv + 0.5 * prox_ * (x - z_).squaredNorm() + 0.5 * weight_ * coupling;
}

Vec LocalSubproblem::gradient(const Vec& x) const {
  Vec g = f_.gradient(x);
  g += prox_ * (x - z_);
  if (gram_) {
    g.noalias() += weight_ * (*gram_ * x - bt_target_);
  } else {
    g.noalias() += weight_ * (b_.transpose() * (b_ * x - target_));
  }
  return g;
}

namespace {

SubsolverResult fista_core(const std::function<double(const Vec&, Vec&)>& vg,
                           const std::function<Vec(const Vec&)>& grad, double lipschitz,
                           const Vec& x0, const FistaOptions& opt) {
  if (!(lipschitz > 0.0)) throw std::invalid_argument("fista: Lipschitz constant must be positive");
  auto measure = [&](const Vec& x, const Vec& g) {
    return g.norm() / (lipschitz * std::max(1.0, x.norm()));
  };
  SubsolverResult res;
  Vec x = x0, g;
  double fx = vg(x, g);
  res.residual = measure(x, g);
  if (res.residual <= opt.tol) {
    res.x = x;
    res.converged = true;
    return res;
  }
  Vec y = x, gy = g, x_new, g_new;
  double t = 1.0;
  bool momentum = false;
  for (int k = 1; k <= opt.max_iter; ++k) {
    x_new = y - gy / lipschitz;
    const double f_new = vg(x_new, g_new);
    res.iterations = k;
    if (f_new > fx && momentum) {
      // Function-value restart: drop momentum and retry from x.
      y = x;
      gy = g;
      t = 1.0;
      momentum = false;
      continue;
    }
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double w = (t - 1.0) / t_new;
    y = x_new + w * (x_new - x);
    momentum = w != 0.0;
    x.swap(x_new);
    g.swap(g_new);
    fx = f_new;
    t = t_new;
    res.residual = measure(x, g);
    if (res.residual <= opt.tol) {
      res.converged = true;
      break;
    }
    gy = momentum ? grad(y) : g;
  }
  res.x = x;
  return res;
}

}  // namespace

SubsolverResult fista_minimize(const std::function<double(const Vec&, Vec&)>& value_and_gradient,
                               double lipschitz, const Vec& x0, const FistaOptions& opt) {
  auto grad = [&](const Vec& x) {
    Vec g;
    value_and_gradient(x, g);
    return g;
  };
  return fista_core(value_and_gradient, grad, lipschitz, x0, opt);
}

SubsolverResult x_update_exact(const LocalSubproblem& sub, const Vec& x_warm, const FistaOptions& opt) {
  return fista_core([&](const Vec& x, Vec& g) { return sub.value_and_gradient(x, g); },
                    [&](const Vec& x) { return sub.gradient(x); }, sub.lipschitz(), x_warm, opt);
}

Vec x_update_inexact(const LocalSubproblem& sub, const Vec& x_current, double zeta) {
  return x_current - zeta * sub.gradient(x_current);
}

Vec y_update(const Mat& B, const Vec& x_new, const Vec& q, int n_agents, const Vec& p_i,
             const Vec& signless_sum, double rho, int degree) {
  if (degree < 1) throw std::invalid_argument("y_update: agent has no neighbors");
  return (B * x_new - q / static_cast<double>(n_agents) - p_i + rho * signless_sum) /
         (2.0 * rho * degree);
}

Vec z_update(const Vec& z, const Vec& x_new, double beta) { return z + beta * (x_new - z); }

BlockVec brute_force_inner_max(const BlockVec& x_fixed, const BlockVec& p_blocks,
                               const BlockVec& y_snapshot, double rho, const Graph& g,
                               const CoupledProblem& problem) {
  const int n = g.n_agents();
  const int m = problem.constraint_dim();
  if (n * m > 200) throw std::invalid_argument("brute_force_inner_max: instance too large");
  const GraphMatrices gm = derive_matrices(g, m);
  const Mat lm = gm.L_minus();
  const Mat lp = gm.L_plus();
  // Maximize −½yᵀHy + lᵀy with H = ρ(L⁻ + L⁺).
  const Mat h = rho * (lm + lp);
  Vec lin(n * m);
  for (int i = 0; i < n; ++i)
    lin.segment(i * m, m) = problem.B(i) * x_fixed[i] - problem.q() / static_cast<double>(n) - p_blocks[i];
  lin += rho * lp * stack(y_snapshot);
  const Eigen::LLT<Mat> llt(h);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("brute_force_inner_max: Hessian is not negative definite");
  return split(llt.solve(lin), std::vector<int>(n, m));
}

// ---------------------------------------------------------------------------
// Trace IO

void write_trace_csv(std::ostream& os, const std::vector<RoundRecord>& rounds) {
  os << "round,grad_residue,infeasibility,consensus_gap,dx,dy,dz,inner_iters,phi\n";
  for (const auto& r : rounds) {
    os << r.round << ',' << format_double(r.grad_residue) << ',' << format_double(r.infeasibility)
       << ',' << format_double(r.consensus_gap) << ',' << format_double(r.dx) << ','
       << format_double(r.dy) << ',' << format_double(r.dz) << ',' << r.inner_iters << ','
       << format_double(r.phi) << '\n';
  }
}

void write_state_snapshot(std::ostream& os, const std::vector<AgentState>& state) {
  auto line = [&](int i, const char* field, const Vec& v) {
    os << "agent " << i << ' ' << field;
    for (Eigen::Index k = 0; k < v.size(); ++k) os << ' ' << format_double(v[k]);
    os << '\n';
  };
  for (std::size_t i = 0; i < state.size(); ++i) {
    line(static_cast<int>(i), "x", state[i].x);
    line(static_cast<int>(i), "y", state[i].y);
    line(static_cast<int>(i), "p", state[i].p);
    line(static_cast<int>(i), "z", state[i].z);
  }
}

std::vector<AgentState> read_state_snapshot(std::istream& is) {
  std::vector<AgentState> out;
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string tag, field;
    int i = -1;
    if (!(ls >> tag)) continue;
    if (tag != "agent" || !(ls >> i >> field) || i < 0)
      throw std::invalid_argument("state snapshot: malformed line '" + line + "'");
    std::vector<double> vals;
    std::string tok;
    while (ls >> tok) vals.push_back(std::stod(tok));
    if (static_cast<int>(out.size()) <= i) out.resize(i + 1);
    const Vec v = Eigen::Map<const Vec>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    if (field == "x") out[i].x = v;
    else if (field == "y") out[i].y = v;
    else if (field == "p") out[i].p = v;
    else if (field == "z") out[i].z = v;
    else throw std::invalid_argument("state snapshot: unknown field '" + field + "'");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Worker pool. Agent k always runs on worker k % T, and every agent writes
// only its own slots, so results do not depend on the thread count.

class PdcEngine::Pool {
 public:
  explicit Pool(int threads) : threads_(threads) {
    for (int w = 1; w < threads_; ++w) workers_.emplace_back([this, w] { loop(w); });
  }
  ~Pool() {
    {
      std::lock_guard<std::mutex> lk(m_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : workers_) t.join();
  }

  void run(int n, const std::function<void(int)>& fn) {
    errors_.assign(n, nullptr);
    {
      std::lock_guard<std::mutex> lk(m_);
      job_ = &fn;
      n_ = n;
      pending_ = threads_ - 1;
      ++generation_;
    }
    cv_.notify_all();
    work(0);
    std::unique_lock<std::mutex> lk(m_);
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    job_ = nullptr;
    lk.unlock();
    // Rethrow the lowest-index failure so aborts are reported identically
    // whatever the thread count.
    for (auto& e : errors_)
      if (e) std::rethrow_exception(e);
  }

 private:
  void work(int w) {
    for (int k = w; k < n_; k += threads_) {
      try {
        (*job_)(k);
      } catch (...) {
        errors_[k] = std::current_exception();
      }
    }
  }

  void loop(int w) {
    long seen = 0;
    for (;;) {
      {
        std::unique_lock<std::mutex> lk(m_);
        cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
      }
      work(w);
      {
        std::lock_guard<std::mutex> lk(m_);
        --pending_;
      }
      done_cv_.notify_one();
    }
  }

  int threads_;
  std::vector<std::thread> workers_;
  std::mutex m_;
  std::condition_variable cv_, done_cv_;
  const std::function<void(int)>* job_ = nullptr;
  int n_ = 0;
  int pending_ = 0;
  long generation_ = 0;
  bool stop_ = false;
  std::vector<std::exception_ptr> errors_;
};

// ---------------------------------------------------------------------------
// Engine

PdcEngine::PdcEngine(const CoupledProblem& problem, const Graph& graph, SolverConfig config)
    : problem_(problem), graph_(graph), config_(config), log_(graph.n_agents()) {
  config_.validate();
  problem_.validate();
  if (problem_.n_agents() != graph_.n_agents())
    throw std::invalid_argument("engine: problem and graph disagree on the agent count");
  if (graph_.n_agents() < 2) throw std::invalid_argument("engine: need at least two agents");
  require_connected(graph_);
  for (int i = 0; i < graph_.n_agents(); ++i)
    if (graph_.degree(i) < 1) throw std::invalid_argument("engine: isolated agent");
  matrices_ = derive_matrices(graph_, problem_.constraint_dim());
  const int n = problem_.n_agents();
  gram_.resize(n);
  use_gram_.assign(n, 0);
  for (int i = 0; i < n; ++i) {
    const Mat& b = problem_.B(i);
    if (b.cols() <= b.rows()) {
      gram_[i] = b.transpose() * b;
      use_gram_[i] = 1;
    }
  }
  inner_iters_.assign(n, 0);
  hit_tol_.assign(n, 0);
  last_residual_.assign(n, 0.0);
  if (config_.record_phi) {
    if (!problem_.all_quadratic())
      throw std::invalid_argument("engine: the potential is only available for quadratic instances");
    phi_ = std::make_unique<PhiEvaluator>(problem_, graph_, config_.rho, config_.p, config_.alpha);
  }
  if (config_.threads > 1) pool_ = std::make_unique<Pool>(config_.threads);
  initialize();
}

PdcEngine::~PdcEngine() = default;

void PdcEngine::initialize() {
  Rng rng(config_.seed);
  const int m = problem_.constraint_dim();
  std::vector<AgentState> st(problem_.n_agents());
  for (int i = 0; i < problem_.n_agents(); ++i) {
    const int ni = problem_.local_dim(i);
    st[i].x = config_.x_init == InitMode::uniform ? rng.uniform_vec(ni, -1.0, 1.0) : Vec::Zero(ni);
    st[i].y = config_.y_init == InitMode::uniform ? rng.uniform_vec(m, -1.0, 1.0) : Vec::Zero(m);
    st[i].z = st[i].x;
    st[i].p = Vec::Zero(m);
  }
  set_state(std::move(st));
}

void PdcEngine::set_state(std::vector<AgentState> state) {
  if (static_cast<int>(state.size()) != problem_.n_agents())
    throw std::invalid_argument("engine: state has the wrong number of agents");
  const int m = problem_.constraint_dim();
  for (int i = 0; i < problem_.n_agents(); ++i) {
    const auto& a = state[i];
    if (a.x.size() != problem_.local_dim(i) || a.z.size() != problem_.local_dim(i) ||
        a.y.size() != m || a.p.size() != m)
      throw std::invalid_argument("engine: state block sizes do not match agent " + std::to_string(i));
  }
  agents_ = std::move(state);
  y_prev_ = collect_y(agents_);
  mu_ = Vec::Zero(static_cast<Eigen::Index>(graph_.n_edges()) * m);
  round_ = 0;
  stats_ = {};
  log_ = AccessLog(graph_.n_agents());
}

void PdcEngine::parallel_for(const std::function<void(int)>& fn) {
  const int n = problem_.n_agents();
  if (pool_) {
    pool_->run(n, fn);
    return;
  }
  for (int i = 0; i < n; ++i) fn(i);
}

double PdcEngine::current_phi() const {
  if (!phi_) return std::numeric_limits<double>::quiet_NaN();
  BlockVec x, y, z;
  for (const auto& a : agents_) {
    x.push_back(a.x);
    y.push_back(a.y);
    z.push_back(a.z);
  }
  return phi_->evaluate(x, y, y_prev_, mu_, z).phi;
}

RoundRecord PdcEngine::step() {
  const int n = problem_.n_agents();
  const int m = problem_.constraint_dim();
  const int r = round_ + 1;
  const std::vector<AgentState> before = agents_;
  const BlockVec snapshot = collect_y(agents_);  // y^r, read-only this round
  std::vector<Vec> signless(n);

  // Stage 1: dual accumulation p_i += α L_i⁻ y^r; keep L_i⁺ y^r for later.
  parallel_for([&](int i) {
    const NeighborView view(graph_, snapshot, i, &log_);
    agents_[i].p += config_.alpha * laplacian_neighbor_sum(view);
    signless[i] = signless_neighbor_sum(view);
    if (!finite(agents_[i].p)) throw SolverAbort(i, r, "p");
  });
  // Shadow μ_e += α(y_i − y_j); diagnostics only.
  for (int e = 0; e < graph_.n_edges(); ++e) {
    const Edge& ed = graph_.edges()[e];
    mu_.segment(static_cast<Eigen::Index>(e) * m, m) += config_.alpha * (snapshot[ed.i] - snapshot[ed.j]);
  }

  // Stage 2: primal step, local data only.
  const FistaOptions opt{config_.subsolver_tol, config_.subsolver_max_iter};
  parallel_for([&](int i) {
    AgentState& a = agents_[i];
    const LocalSubproblem sub(problem_.objective(i), problem_.B(i), use_gram_[i] ? &gram_[i] : nullptr,
                              problem_.q(), n, graph_.degree(i), config_.p, config_.rho, a.p,
                              signless[i], a.z);
    if (config_.mode == Mode::exact_pdc) {
      SubsolverResult res = x_update_exact(sub, a.x, opt);
      a.x = std::move(res.x);
      inner_iters_[i] = res.iterations;
      hit_tol_[i] = res.converged ? 1 : 0;
      last_residual_[i] = res.residual;
    } else {
      a.x = x_update_inexact(sub, a.x, config_.zeta);
      inner_iters_[i] = 1;
      hit_tol_[i] = 1;
      last_residual_[i] = 0.0;
    }
    if (!finite(a.x)) throw SolverAbort(i, r, "x");
  });

  // Stage 3: closed-form dual step.
  parallel_for([&](int i) {
    AgentState& a = agents_[i];
    a.y = y_update(problem_.B(i), a.x, problem_.q(), n, a.p, signless[i], config_.rho, graph_.degree(i));
    if (!finite(a.y)) throw SolverAbort(i, r, "y");
  });

  // Stage 4: proximal center.
  parallel_for([&](int i) {
    AgentState& a = agents_[i];
    a.z = z_update(a.z, a.x, config_.beta);
    if (!finite(a.z)) throw SolverAbort(i, r, "z");
  });

  y_prev_ = snapshot;
  round_ = r;
  if (config_.mode == Mode::exact_pdc) {
    for (int i = 0; i < n; ++i) {
      ++stats_.solves;
      if (hit_tol_[i]) {
        ++stats_.stopped_by_tol;
      } else {
        ++stats_.budget_exhausted;
        stats_.worst_residual = std::max(stats_.worst_residual, last_residual_[i]);
      }
    }
  }
  RoundRecord rec = measure(before);
  if (on_round) on_round(*this);
  return rec;
}

RoundRecord PdcEngine::measure(const std::vector<AgentState>& before) const {
  RoundRecord rec;
  rec.round = round_;
  BlockVec x, y, z;
  for (const auto& a : agents_) {
    x.push_back(a.x);
    y.push_back(a.y);
    z.push_back(a.z);
  }
  rec.grad_residue = gradient_residue(problem_, x, y);
  rec.infeasibility = infeasibility(problem_, x);
  rec.consensus_gap = consensus_gap(graph_, y);
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    rec.dx = std::max(rec.dx, (agents_[i].x - before[i].x).norm());
    rec.dy = std::max(rec.dy, (agents_[i].y - before[i].y).norm());
    rec.dz = std::max(rec.dz, (agents_[i].z - before[i].z).norm());
    rec.inner_iters += inner_iters_[i];
  }
  if (phi_) rec.phi = phi_->evaluate(x, y, y_prev_, mu_, z).phi;
  return rec;
}

IterationTrace PdcEngine::run() {
  IterationTrace trace;
  run_into(trace);
  return trace;
}

void PdcEngine::run_into(IterationTrace& trace) {
  trace.initial_phi = current_phi();
  const bool use_r = config_.tol_residue > 0.0;
  const bool use_f = config_.tol_infeasibility > 0.0;
  while (round_ < config_.max_rounds) {
    const RoundRecord rec = step();
    trace.rounds.push_back(rec);
    if ((use_r || use_f) && (!use_r || rec.grad_residue <= config_.tol_residue) &&
        (!use_f || rec.infeasibility <= config_.tol_infeasibility)) {
      trace.stopped_early = round_ < config_.max_rounds;
      break;
    }
    if (config_.divergence_limit > 0.0 && !(rec.infeasibility <= config_.divergence_limit)) {
      trace.diverged = true;
      break;
    }
  }
  trace.final_state = agents_;
  trace.subsolver = stats_;
  trace.neighbor_reads = log_.total_reads();
  trace.locality_violations = log_.total_violations();
}

IterationTrace run(const CoupledProblem& problem, const Graph& graph, const SolverConfig& config) {
  PdcEngine engine(problem, graph, config);
  return engine.run();
}

}  // namespace pdc
