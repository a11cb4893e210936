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
#include "pdc/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pdc {

QuadraticObjective::QuadraticObjective(Mat q, Vec c, double offset)
    : q_(std::move(q)), c_(std::move(c)), offset_(offset) {
  if (q_.rows() != q_.cols() || q_.rows() != c_.size())
    throw std::invalid_argument("quadratic objective: Q must be square and match c");
  if (q_.size() > 0 && (q_ - q_.transpose()).cwiseAbs().maxCoeff() >
                           1e-12 * std::max(1.0, q_.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("quadratic objective: Q must be symmetric");
  q_ = 0.5 * (q_ + q_.transpose());
  if (q_.size() == 0) return;
  Eigen::SelfAdjointEigenSolver<Mat> es(q_, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  curv_.gamma_minus = lo;
  curv_.gamma_plus = std::max(hi, std::abs(lo));
}

double QuadraticObjective::value(const Vec& x) const {
  return 0.5 * x.dot(q_ * x) + c_.dot(x) + offset_;
}

Vec QuadraticObjective::gradient(const Vec& x) const { return q_ * x + c_; }

double QuadraticObjective::value_and_gradient(const Vec& x, Vec& grad) const {
  grad.noalias() = q_ * x;
  const double v = 0.5 * x.dot(grad) + c_.dot(x) + offset_;
  grad += c_;
  return v;
}

NonconvexPenalty::NonconvexPenalty(int dim, double lambda, double xi)
    : dim_(dim), lambda_(lambda), xi_(xi) {
  if (dim < 0) throw std::invalid_argument("penalty: negative dimension");
  if (!(lambda > 0.0) || !(xi > 0.0))
    throw std::invalid_argument("penalty: lambda and xi must be positive");
}

double NonconvexPenalty::value(const Vec& x) const {
  double s = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double u = xi_ * x[k] * x[k];
    s += u / (1.0 + u);
  }
  return lambda_ * s;
}

Vec NonconvexPenalty::gradient(const Vec& x) const {
  Vec g(x.size());
  value_and_gradient(x, g);
  return g;
}

double NonconvexPenalty::value_and_gradient(const Vec& x, Vec& grad) const {
  grad.resize(x.size());
  double s = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double u = xi_ * x[k] * x[k];
    const double d = 1.0 + u;
    s += u / d;
    grad[k] = 2.0 * lambda_ * xi_ * x[k] / (d * d);
  }
  return lambda_ * s;
}

LogisticLoss::LogisticLoss(Vec labels) : labels_(std::move(labels)) {
  for (Eigen::Index k = 0; k < labels_.size(); ++k)
    if (labels_[k] != 1.0 && labels_[k] != -1.0)
      throw std::invalid_argument("logistic loss: labels must be +1 or -1");
}

namespace {

// log(1 + e^t) without overflow.
double softplus(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

// 1 / (1 + e^t), stable for large |t|.
double inv_one_plus_exp(double t) {
  if (t >= 0) {
    const double e = std::exp(-t);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(t));
}

}  // namespace

double LogisticLoss::value(const Vec& x) const {
  double s = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) s += softplus(-labels_[k] * x[k]);
  return s;
}

Vec LogisticLoss::gradient(const Vec& x) const {
  Vec g(x.size());
  value_and_gradient(x, g);
  return g;
}

double LogisticLoss::value_and_gradient(const Vec& x, Vec& grad) const {
  grad.resize(x.size());
  double s = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double v = labels_[k];
    s += softplus(-v * x[k]);
    grad[k] = -v * inv_one_plus_exp(v * x[k]);
  }
  return s;
}

SoftmaxHead::SoftmaxHead(Eigen::MatrixXd one_hot, int hidden, CurvatureBounds surrogate)
    : one_hot_(std::move(one_hot)),
      samples_(static_cast<int>(one_hot_.rows())),
      hidden_(hidden),
      classes_(static_cast<int>(one_hot_.cols())),
      curv_(surrogate) {
  if (hidden < 1) throw std::invalid_argument("softmax head: hidden width must be >= 1");
  if (classes_ < 2) throw std::invalid_argument("softmax head: need at least two classes");
}

double SoftmaxHead::evaluate(const Vec& x, Vec* grad) const {
  const int uk = samples_ * hidden_;
  const Eigen::Map<const Mat> w(x.data() + uk, hidden_, classes_);
  const Eigen::Map<const Vec> b(x.data() + uk + hidden_ * classes_, classes_);
  if (grad) grad->setZero(dim());
  double loss = 0.0;
  Vec h(hidden_), logits(classes_), prob(classes_);
  for (int k = 0; k < samples_; ++k) {
    const auto u = x.segment(k * hidden_, hidden_);
    h = u.cwiseMax(0.0);
    logits.noalias() = w.transpose() * h;
    logits += b;
    const double mx = logits.maxCoeff();
    prob = (logits.array() - mx).exp();
    const double z = prob.sum();
    prob /= z;
    const double lse = mx + std::log(z);
    loss += lse - one_hot_.row(k).dot(logits);
    if (!grad) continue;
    const Vec delta = prob - one_hot_.row(k).transpose();  // dL/dlogits
    Eigen::Map<Mat> gw(grad->data() + uk, hidden_, classes_);
    gw.noalias() += h * delta.transpose();
    grad->segment(uk + hidden_ * classes_, classes_) += delta;
    const Vec dh = w * delta;
    for (int j = 0; j < hidden_; ++j) (*grad)[k * hidden_ + j] = u[j] > 0.0 ? dh[j] : 0.0;
  }
  return loss;
}

double SoftmaxHead::value(const Vec& x) const { return evaluate(x, nullptr); }

Vec SoftmaxHead::gradient(const Vec& x) const {
  Vec g;
  evaluate(x, &g);
  return g;
}

double SoftmaxHead::value_and_gradient(const Vec& x, Vec& grad) const {
  return evaluate(x, &grad);
}

StackedObjective::StackedObjective(std::vector<ObjectivePtr> parts) : parts_(std::move(parts)) {
  if (parts_.empty()) throw std::invalid_argument("stacked objective: no parts");
  for (const auto& p : parts_) {
    if (!p) throw std::invalid_argument("stacked objective: null part");
    dim_ += p->dim();
  }
}

double StackedObjective::value(const Vec& x) const {
  double s = 0.0;
  int off = 0;
  for (const auto& p : parts_) {
    s += p->value(x.segment(off, p->dim()));
    off += p->dim();
  }
  return s;
}

Vec StackedObjective::gradient(const Vec& x) const {
  Vec g(dim_);
  value_and_gradient(x, g);
  return g;
}

double StackedObjective::value_and_gradient(const Vec& x, Vec& grad) const {
  grad.resize(dim_);
  double s = 0.0;
  int off = 0;
  Vec part;
  for (const auto& p : parts_) {
    s += p->value_and_gradient(x.segment(off, p->dim()), part);
    grad.segment(off, p->dim()) = part;
    off += p->dim();
  }
  return s;
}

CurvatureBounds StackedObjective::curvature() const {
  CurvatureBounds c = parts_.front()->curvature();
  for (const auto& p : parts_) {
    c.gamma_minus = std::min(c.gamma_minus, p->curvature().gamma_minus);
    c.gamma_plus = std::max(c.gamma_plus, p->curvature().gamma_plus);
  }
  return c;
}

std::string StackedObjective::name() const {
  std::string s = "stacked(";
  for (std::size_t k = 0; k < parts_.size(); ++k) s += (k ? "," : "") + parts_[k]->name();
  return s + ")";
}

double finite_diff_check(const LocalObjective& obj, const Vec& point, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_check: step must be positive");
  if (point.size() != obj.dim()) throw std::invalid_argument("finite_diff_check: dimension mismatch");
  const Vec g = obj.gradient(point);
  double worst = 0.0;
  Vec xp = point, xm = point;
  for (Eigen::Index k = 0; k < point.size(); ++k) {
    xp[k] = point[k] + step;
    xm[k] = point[k] - step;
    const double fd = (obj.value(xp) - obj.value(xm)) / (2.0 * step);
    xp[k] = xm[k] = point[k];
    const double scale = std::max({1.0, std::abs(g[k]), std::abs(fd)});
    worst = std::max(worst, std::abs(g[k] - fd) / scale);
  }
  return worst;
}

CurvatureAudit audit_curvature(const LocalObjective& obj, int pairs, double radius,
                               std::uint64_t seed, bool local_pairs) {
  Rng rng(seed);
  const CurvatureBounds c = obj.curvature();
  CurvatureAudit audit;
  audit.pairs = pairs;
  audit.worst_lipschitz_excess = -std::numeric_limits<double>::infinity();
  audit.worst_convexity_excess = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < pairs; ++t) {
    const Vec a = rng.uniform_vec(obj.dim(), -radius, radius);
    // Every other pair is a small perturbation, probing local curvature.
    const Vec b = (!local_pairs || t % 2 == 0) ? rng.uniform_vec(obj.dim(), -radius, radius)
                               : Vec(a + rng.uniform_vec(obj.dim(), -1e-3, 1e-3) * radius);
    const Vec dg = obj.gradient(a) - obj.gradient(b);
    const Vec dx = a - b;
    audit.worst_lipschitz_excess =
        std::max(audit.worst_lipschitz_excess, dg.norm() - c.gamma_plus * dx.norm());
    audit.worst_convexity_excess =
        std::max(audit.worst_convexity_excess, c.gamma_minus * dx.squaredNorm() - dg.dot(dx));
  }
  return audit;
}

}  // namespace pdc
