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
#include "pdc/problem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace pdc {

CoupledProblem::CoupledProblem(std::vector<ObjectivePtr> objectives, std::vector<Mat> coupling,
                               Vec rhs, ProblemMetadata meta)
    : objectives_(std::move(objectives)),
      coupling_(std::move(coupling)),
      rhs_(std::move(rhs)),
      meta_(std::move(meta)) {
  if (objectives_.empty()) throw std::invalid_argument("problem needs at least one agent");
  if (objectives_.size() != coupling_.size())
    throw std::invalid_argument("problem: objective and coupling counts differ");
  for (std::size_t i = 0; i < objectives_.size(); ++i) {
    if (!objectives_[i]) throw std::invalid_argument("problem: null objective");
    b_max_ = std::max(b_max_, spectral_norm(coupling_[i]));
  }
  validate();
}

void CoupledProblem::validate() const {
  double bm = 0.0;
  for (std::size_t i = 0; i < objectives_.size(); ++i) {
    const Mat& b = coupling_[i];
    if (b.rows() != rhs_.size())
      throw std::invalid_argument("problem: B_" + std::to_string(i) + " has " +
                                  std::to_string(b.rows()) + " rows, expected " +
                                  std::to_string(rhs_.size()));
    if (b.cols() != objectives_[i]->dim())
      throw std::invalid_argument("problem: B_" + std::to_string(i) +
                                  " column count differs from objective dimension");
    bm = std::max(bm, spectral_norm(b));
  }
  if (std::abs(bm - b_max_) > 1e-12 * std::max(1.0, bm))
    throw std::invalid_argument("problem: stored b_max is stale");
}

int CoupledProblem::total_dim() const {
  int s = 0;
  for (const auto& o : objectives_) s += o->dim();
  return s;
}

std::vector<int> CoupledProblem::local_dims() const {
  std::vector<int> d;
  for (const auto& o : objectives_) d.push_back(o->dim());
  return d;
}

CurvatureBounds CoupledProblem::curvature() const {
  CurvatureBounds c{std::numeric_limits<double>::infinity(), 0.0};
  for (const auto& o : objectives_) {
    const CurvatureBounds ci = o->curvature();
    c.gamma_minus = std::min(c.gamma_minus, ci.gamma_minus);
    c.gamma_plus = std::max(c.gamma_plus, ci.gamma_plus);
  }
  return c;
}

bool CoupledProblem::all_quadratic() const {
  return std::all_of(objectives_.begin(), objectives_.end(),
                     [](const ObjectivePtr& o) { return o->is_quadratic(); });
}

Mat CoupledProblem::assembled_B() const {
  Mat out(constraint_dim(), total_dim());
  int off = 0;
  for (const auto& b : coupling_) {
    out.middleCols(off, b.cols()) = b;
    off += static_cast<int>(b.cols());
  }
  return out;
}

Mat CoupledProblem::B_diag() const {
  const int m = constraint_dim();
  Mat out = Mat::Zero(static_cast<Eigen::Index>(n_agents()) * m, total_dim());
  int off = 0;
  for (int i = 0; i < n_agents(); ++i) {
    out.block(static_cast<Eigen::Index>(i) * m, off, m, coupling_[i].cols()) = coupling_[i];
    off += static_cast<int>(coupling_[i].cols());
  }
  return out;
}

Vec CoupledProblem::coupling_sum(const BlockVec& x) const {
  if (static_cast<int>(x.size()) != n_agents())
    throw std::invalid_argument("coupling_sum: block count mismatch");
  Vec s = Vec::Zero(constraint_dim());
  for (int i = 0; i < n_agents(); ++i) s.noalias() += coupling_[i] * x[i];
  return s;
}

CoupledProblem CoupledProblem::permuted(const std::vector<int>& perm) const {
  if (static_cast<int>(perm.size()) != n_agents())
    throw std::invalid_argument("permuted: wrong permutation length");
  std::vector<ObjectivePtr> objs;
  std::vector<Mat> bs;
  for (int k : perm) {
    objs.push_back(objectives_.at(k));
    bs.push_back(coupling_.at(k));
  }
  return CoupledProblem(objs, bs, rhs_, meta_);
}

const QuadraticObjective& as_quadratic(const CoupledProblem& problem, int i) {
  const auto* q = dynamic_cast<const QuadraticObjective*>(&problem.objective(i));
  if (!q) throw std::invalid_argument("agent " + std::to_string(i) + " objective is not quadratic");
  return *q;
}

CoupledProblem build_quadratic_instance(std::uint64_t seed, int n_agents, int n_local,
                                        int m_constraints, double convexity_shift) {
  if (n_agents < 1 || n_local < 1 || m_constraints < 1)
    throw std::invalid_argument("quadratic instance: dimensions must be positive");
  Rng rng(seed);
  std::vector<ObjectivePtr> objs;
  std::vector<Mat> bs;
  for (int i = 0; i < n_agents; ++i) {
    // Random orthogonal basis with eigenvalues spread over [shift, shift+1];
    // the first two are pinned to the interval ends so the bounds are exact.
    const Mat g = rng.normal_mat(n_local, n_local);
    const Eigen::HouseholderQR<Mat> qr(g);
    const Mat u = qr.householderQ() * Mat::Identity(n_local, n_local);
    Vec ev(n_local);
    for (int k = 0; k < n_local; ++k) ev[k] = convexity_shift + rng.uniform();
    ev[0] = convexity_shift;
    if (n_local > 1) ev[1] = convexity_shift + 1.0;
    const Mat q = u * ev.asDiagonal() * u.transpose();
    const Vec c = rng.normal_vec(n_local);
    objs.push_back(std::make_shared<QuadraticObjective>(0.5 * (q + q.transpose()), c));
    bs.push_back(rng.normal_mat(m_constraints, n_local) / std::sqrt(static_cast<double>(n_local)));
  }
  const Vec q = rng.normal_vec(m_constraints);
  ProblemMetadata meta{"quadratic", true, ""};
  return CoupledProblem(objs, bs, q, meta);
}

CoupledProblem build_well_coupled_quadratic(std::uint64_t seed, int n_agents, int n_local,
                                            int m_constraints, double convexity_shift,
                                            double scale) {
  if (m_constraints > n_local)
    throw std::invalid_argument("well-coupled instance: needs m_constraints <= n_local");
  if (!(scale > 0.0)) throw std::invalid_argument("well-coupled instance: scale must be positive");
  const CoupledProblem base =
      build_quadratic_instance(seed, n_agents, n_local, m_constraints, convexity_shift);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Mat> bs;
  for (int i = 0; i < n_agents; ++i) {
    const Eigen::HouseholderQR<Mat> qr(rng.normal_mat(m_constraints, m_constraints));
    Mat b = Mat::Zero(m_constraints, n_local);
    b.leftCols(m_constraints) = scale * Mat(qr.householderQ());
    bs.push_back(std::move(b));
  }
  ProblemMetadata meta{"quadratic", true, ""};
  return CoupledProblem(base.objectives(), bs, scale * base.q(), meta);
}

CoupledProblem build_consensus_instance(const std::vector<ObjectivePtr>& objectives,
                                        const Graph& graph) {
  if (static_cast<int>(objectives.size()) != graph.n_agents())
    throw std::invalid_argument("consensus instance: one objective per agent required");
  if (!graph.connected()) throw std::invalid_argument("consensus instance: graph is disconnected");
  const int n = objectives.front()->dim();
  for (const auto& o : objectives)
    if (o->dim() != n) throw std::invalid_argument("consensus instance: objectives differ in dimension");
  const Mat a = kron_identity(derive_matrices(graph).incidence, n);
  std::vector<Mat> bs;
  for (int i = 0; i < graph.n_agents(); ++i) bs.push_back(a.middleCols(i * n, n));
  ProblemMetadata meta{"consensus", true, ""};
  return CoupledProblem(objectives, bs, Vec::Zero(a.rows()), meta);
}

// ---------------------------------------------------------------------------
// Vertical data

Mat VerticalDataset::block(int i) const {
  const ColumnRange& r = partition.at(i);
  return features.middleCols(r.begin, r.size());
}

Mat VerticalDataset::one_hot() const {
  Mat out = Mat::Zero(samples(), classes);
  for (int k = 0; k < samples(); ++k) {
    const int c = static_cast<int>(labels[k]);
    if (c < 0 || c >= classes || labels[k] != c)
      throw std::invalid_argument("dataset: label " + format_double(labels[k]) +
                                  " is not a class index");
    out(k, c) = 1.0;
  }
  return out;
}

void VerticalDataset::validate() const {
  if (labels.size() != features.rows())
    throw std::invalid_argument("dataset: label count differs from sample count");
  if (partition.empty()) throw std::invalid_argument("dataset: empty partition");
  int expect = 0;
  for (const auto& r : partition) {
    if (r.begin != expect || r.end <= r.begin)
      throw std::invalid_argument("dataset: partition ranges must be contiguous, disjoint and non-empty");
    expect = r.end;
  }
  if (expect != features.cols())
    throw std::invalid_argument("dataset: partition does not cover every feature column");
}

VerticalDataset synthetic_vertical_dataset(std::uint64_t seed, int samples, int n_agents,
                                           int features_per_agent, int classes,
                                           double separation) {
  if (samples < 1 || n_agents < 1 || features_per_agent < 1 || classes < 2)
    throw std::invalid_argument("synthetic dataset: bad dimensions");
  Rng rng(seed);
  const int d = n_agents * features_per_agent;
  Mat means(classes, d);
  for (int c = 0; c < classes; ++c) means.row(c) = rng.normal_vec(d).transpose();
  VerticalDataset out;
  out.classes = classes;
  out.features.resize(samples, d);
  out.labels.resize(samples);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d) * (1.0 + separation * separation));
  for (int k = 0; k < samples; ++k) {
    const int c = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
    out.labels[k] = classes == 2 ? (c == 0 ? -1.0 : 1.0) : static_cast<double>(c);
    out.features.row(k) = scale * (separation * means.row(c) + rng.normal_vec(d).transpose());
  }
  for (int i = 0; i < n_agents; ++i)
    out.partition.push_back({i * features_per_agent, (i + 1) * features_per_agent});
  return out;
}

void write_dataset_csv(std::ostream& os, const VerticalDataset& data) {
  os << "label";
  for (Eigen::Index j = 0; j < data.features.cols(); ++j) os << ",f" << j;
  os << '\n';
  for (int k = 0; k < data.samples(); ++k) {
    os << format_double(data.labels[k]);
    for (Eigen::Index j = 0; j < data.features.cols(); ++j)
      os << ',' << format_double(data.features(k, j));
    os << '\n';
  }
}

void write_partition(std::ostream& os, const VerticalDataset& data) {
  for (int i = 0; i < data.n_agents(); ++i)
    os << i << ',' << data.partition[i].begin << ',' << data.partition[i].end << '\n';
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto a = cell.find_first_not_of(" \t\r");
    const auto b = cell.find_last_not_of(" \t\r");
    out.push_back(a == std::string::npos ? "" : cell.substr(a, b - a + 1));
  }
  return out;
}

double parse_number(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(where + ": not a number: '" + s + "'");
  }
}

}  // namespace

VerticalDataset read_vertical_dataset(const std::string& csv_path,
                                      const std::string& partition_path, int classes) {
  std::ifstream in(csv_path);
  if (!in) throw std::invalid_argument("cannot open dataset " + csv_path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("dataset: empty file");
  const auto header = split_csv(line);
  if (header.empty() || header[0] != "label")
    throw std::invalid_argument("dataset: header must start with 'label'");
  const int d = static_cast<int>(header.size()) - 1;
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv(line);
    if (static_cast<int>(cells.size()) != d + 1)
      throw std::invalid_argument("dataset: wrong column count at line " + std::to_string(lineno));
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(parse_number(c, "dataset line " + std::to_string(lineno)));
    rows.push_back(std::move(row));
  }
  VerticalDataset out;
  out.classes = classes;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), d);
  out.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.labels[k] = rows[k][0];
    for (int j = 0; j < d; ++j) out.features(k, j) = rows[k][j + 1];
  }
  std::ifstream pin(partition_path);
  if (!pin) throw std::invalid_argument("cannot open partition " + partition_path);
  std::vector<std::pair<int, ColumnRange>> parts;
  while (std::getline(pin, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 3) throw std::invalid_argument("partition: expected agent,col_start,col_end");
    parts.push_back({static_cast<int>(parse_number(cells[0], "partition")),
                     {static_cast<int>(parse_number(cells[1], "partition")),
                      static_cast<int>(parse_number(cells[2], "partition"))}});
  }
  std::sort(parts.begin(), parts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (parts[k].first != static_cast<int>(k))
      throw std::invalid_argument("partition: agent ids must be 0..N-1 without gaps");
    out.partition.push_back(parts[k].second);
  }
  out.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Vertical logistic regression

CoupledProblem build_vertical_lr(const VerticalDataset& data, double lambda, double xi,
                                 int aux_agent) {
  data.validate();
  const int n = data.n_agents();
  const int m = data.samples();
  if (aux_agent < 0 || aux_agent >= n) throw std::invalid_argument("vertical LR: aux agent out of range");
  for (int k = 0; k < m; ++k)
    if (data.labels[k] != 1.0 && data.labels[k] != -1.0)
      throw std::invalid_argument("vertical LR: labels must be +1 or -1");
  std::vector<ObjectivePtr> objs;
  std::vector<Mat> bs;
  for (int i = 0; i < n; ++i) {
    const Mat bi = data.block(i);
    auto pen = std::make_shared<NonconvexPenalty>(static_cast<int>(bi.cols()), lambda, xi);
    if (i != aux_agent) {
      objs.push_back(pen);
      bs.push_back(bi);
      continue;
    }
    objs.push_back(std::make_shared<StackedObjective>(
        std::vector<ObjectivePtr>{pen, std::make_shared<LogisticLoss>(data.labels)}));
    Mat b(m, bi.cols() + m);
    b << bi, -Mat::Identity(m, m);
    bs.push_back(b);
  }
  ProblemMetadata meta{"vertical_lr", true, ""};
  return CoupledProblem(objs, bs, Vec::Zero(m), meta);
}

double vertical_lr_objective(const VerticalDataset& data, double lambda, double xi,
                             const BlockVec& w) {
  Vec u = Vec::Zero(data.samples());
  double reg = 0.0;
  for (int i = 0; i < data.n_agents(); ++i) {
    u.noalias() += data.block(i) * w.at(i);
    reg += NonconvexPenalty(static_cast<int>(w[i].size()), lambda, xi).value(w[i]);
  }
  return LogisticLoss(data.labels).value(u) + reg;
}

BlockVec vertical_lr_lift(const VerticalDataset& data, const BlockVec& w, int aux_agent) {
  Vec u = Vec::Zero(data.samples());
  for (int i = 0; i < data.n_agents(); ++i) u.noalias() += data.block(i) * w.at(i);
  BlockVec x = w;
  Vec ext(w[aux_agent].size() + u.size());
  ext << w[aux_agent], u;
  x[aux_agent] = ext;
  return x;
}

// ---------------------------------------------------------------------------
// Vertical two-layer network

namespace {

// Rows (b_{i,k}ᵀ ⊗ I_K) stacked over samples k.
Mat nn_block(const Mat& bi, int hidden) {
  const Eigen::Index m = bi.rows();
  const Eigen::Index ni = bi.cols();
  Mat out = Mat::Zero(m * hidden, ni * hidden);
  for (Eigen::Index k = 0; k < m; ++k)
    for (Eigen::Index s = 0; s < ni; ++s)
      for (int h = 0; h < hidden; ++h) out(k * hidden + h, s * hidden + h) = bi(k, s);
  return out;
}

// Hidden pre-activations Σ_i W_iᵀ b_{i,k}, sample-major.
Vec nn_hidden(const VerticalDataset& data, int hidden, const BlockVec& w) {
  Vec u = Vec::Zero(static_cast<Eigen::Index>(data.samples()) * hidden);
  for (int i = 0; i < data.n_agents(); ++i) {
    const Mat bi = data.block(i);
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        wi(w.at(i).data(), bi.cols(), hidden);
    const Mat prod = bi * wi;  // M x K
    for (int k = 0; k < data.samples(); ++k) u.segment(k * hidden, hidden) += prod.row(k).transpose();
  }
  return u;
}

}  // namespace

CoupledProblem build_vertical_nn(const VerticalDataset& data, int hidden, int aux_agent,
                                 std::uint64_t seed) {
  if (hidden < 1) throw std::invalid_argument("vertical NN: hidden width must be >= 1");
  data.validate();
  const int n = data.n_agents();
  if (aux_agent < 0 || aux_agent >= n) throw std::invalid_argument("vertical NN: aux agent out of range");
  const Mat y = data.one_hot();
  const int mk = data.samples() * hidden;

  // Sampled curvature surrogate for the non-smooth head: extreme secant
  // slopes over random pairs, inflated by a factor of two.
  auto head = std::make_shared<SoftmaxHead>(y, hidden, CurvatureBounds{0.0, 1.0});
  {
    Rng rng(seed);
    double lo = 0.0, hi = 0.0;
    for (int t = 0; t < 1000; ++t) {
      const Vec a = rng.uniform_vec(head->dim(), -1.0, 1.0);
      const Vec b = rng.uniform_vec(head->dim(), -1.0, 1.0);
      const Vec dx = a - b;
      const Vec dg = head->gradient(a) - head->gradient(b);
      hi = std::max(hi, dg.norm() / dx.norm());
      lo = std::min(lo, dg.dot(dx) / dx.squaredNorm());
    }
    head->set_curvature({2.0 * lo, 2.0 * hi});
  }

  std::vector<ObjectivePtr> objs;
  std::vector<Mat> bs;
  for (int i = 0; i < n; ++i) {
    const Mat bi = nn_block(data.block(i), hidden);
    const int wdim = static_cast<int>(bi.cols());
    if (i != aux_agent) {
      objs.push_back(std::make_shared<ZeroObjective>(wdim));
      bs.push_back(bi);
      continue;
    }
    objs.push_back(std::make_shared<StackedObjective>(
        std::vector<ObjectivePtr>{std::make_shared<ZeroObjective>(wdim), head}));
    Mat b = Mat::Zero(mk, wdim + head->dim());
    b.leftCols(wdim) = bi;
    b.middleCols(wdim, mk) = -Mat::Identity(mk, mk);
    bs.push_back(b);
  }
  ProblemMetadata meta{"vertical_nn", false,
                       "ReLU head is not L-smooth; curvature is a sampled surrogate"};
  return CoupledProblem(objs, bs, Vec::Zero(mk), meta);
}

double vertical_nn_objective(const VerticalDataset& data, int hidden, const BlockVec& w,
                             const Vec& theta) {
  const Vec u = nn_hidden(data, hidden, w);
  SoftmaxHead head(data.one_hot(), hidden, {});
  Vec x(u.size() + theta.size());
  x << u, theta;
  return head.value(x);
}

BlockVec vertical_nn_lift(const VerticalDataset& data, int hidden, const BlockVec& w,
                          const Vec& theta, int aux_agent) {
  const Vec u = nn_hidden(data, hidden, w);
  BlockVec x = w;
  Vec ext(w[aux_agent].size() + u.size() + theta.size());
  ext << w[aux_agent], u, theta;
  x[aux_agent] = ext;
  return x;
}

// ---------------------------------------------------------------------------

KktSolution kkt_oracle_quadratic(const CoupledProblem& problem) {
  const int n = problem.total_dim();
  const int m = problem.constraint_dim();
  Mat k = Mat::Zero(n + m, n + m);
  Vec rhs(n + m);
  int off = 0;
  for (int i = 0; i < problem.n_agents(); ++i) {
    const QuadraticObjective& f = as_quadratic(problem, i);
    const int ni = f.dim();
    k.block(off, off, ni, ni) = f.Q();
    k.block(off, n, ni, m) = problem.B(i).transpose();
    k.block(n, off, m, ni) = problem.B(i);
    rhs.segment(off, ni) = -f.c();
    off += ni;
  }
  rhs.tail(m) = problem.q();
  const Eigen::JacobiSVD<Mat> svd(k);
  const Vec& sv = svd.singularValues();
  const double cond = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1)
                                            : std::numeric_limits<double>::infinity();
  if (!(cond < 1e13))
    throw std::runtime_error("KKT matrix is singular (condition estimate " + format_double(cond) + ")");
  const Eigen::PartialPivLU<Mat> lu(k);
  Vec sol = lu.solve(rhs);
  for (int it = 0; it < 2; ++it) sol += lu.solve(rhs - k * sol);  // iterative refinement
  KktSolution out;
  out.x = split(sol.head(n), problem.local_dims());
  out.y = sol.tail(m);
  out.condition = cond;
  return out;
}

}  // namespace pdc
