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
#ifndef PDC_OBJECTIVE_HPP_
#define PDC_OBJECTIVE_HPP_

#include <memory>
#include <string>
#include <vector>

#include "pdc/common.hpp"

namespace pdc {

// gamma_plus is the gradient Lipschitz constant, gamma_minus the (possibly
// negative) weak-convexity modulus.
struct CurvatureBounds {
  double gamma_minus = 0.0;
  double gamma_plus = 0.0;
};

// Smooth local objective f_i. Implementations must be reentrant: agents
// evaluate concurrently.
class LocalObjective {
 public:
  virtual ~LocalObjective() = default;
  virtual int dim() const = 0;
  virtual double value(const Vec& x) const = 0;
  virtual Vec gradient(const Vec& x) const = 0;
  virtual CurvatureBounds curvature() const = 0;
  virtual std::string name() const = 0;

  // Fused evaluation. Writes the gradient into grad and returns f(x).
  virtual double value_and_gradient(const Vec& x, Vec& grad) const {
    grad = gradient(x);
    return value(x);
  }

  // Quadratic objectives expose (Q, c) so oracles can solve exactly.
  virtual bool is_quadratic() const { return false; }
};

using ObjectivePtr = std::shared_ptr<const LocalObjective>;

// f(x) = ½xᵀQx + cᵀx + offset.
class QuadraticObjective final : public LocalObjective {
 public:
  QuadraticObjective(Mat q, Vec c, double offset = 0.0);

  int dim() const override { return static_cast<int>(c_.size()); }
  double value(const Vec& x) const override;
  Vec gradient(const Vec& x) const override;
  double value_and_gradient(const Vec& x, Vec& grad) const override;
  CurvatureBounds curvature() const override { return curv_; }
  std::string name() const override { return "quadratic"; }
  bool is_quadratic() const override { return true; }

  const Mat& Q() const { return q_; }
  const Vec& c() const { return c_; }

 private:
  Mat q_;
  Vec c_;
  double offset_;
  CurvatureBounds curv_;
};

// R(w) = λ Σ_s ξw_s²/(1+ξw_s²), the smooth non-convex sparsity penalty.
class NonconvexPenalty final : public LocalObjective {
 public:
  NonconvexPenalty(int dim, double lambda, double xi);

  int dim() const override { return dim_; }
  double value(const Vec& x) const override;
  Vec gradient(const Vec& x) const override;
  double value_and_gradient(const Vec& x, Vec& grad) const override;
  // Safe enclosure |R''| ≤ 2λξ.
  CurvatureBounds curvature() const override { return {-2.0 * lambda_ * xi_, 2.0 * lambda_ * xi_}; }
  std::string name() const override { return "nonconvex_penalty"; }

 private:
  int dim_;
  double lambda_;
  double xi_;
};

// Ψ(u) = Σ_k log(1 + exp(−v_k u_k)) with labels v_k ∈ {±1}.
class LogisticLoss final : public LocalObjective {
 public:
  explicit LogisticLoss(Vec labels);

  int dim() const override { return static_cast<int>(labels_.size()); }
  double value(const Vec& x) const override;
  Vec gradient(const Vec& x) const override;
  double value_and_gradient(const Vec& x, Vec& grad) const override;
  CurvatureBounds curvature() const override { return {0.0, 0.25}; }
  std::string name() const override { return "logistic_loss"; }

 private:
  Vec labels_;
};

// Cross-entropy of a ReLU + softmax head. The variable is (u, θ) with
// u ∈ R^{M·K} the hidden pre-activations (sample-major, K per sample) and
// θ = (W, b) with W ∈ R^{K×C} column-major followed by b ∈ R^C.
class SoftmaxHead final : public LocalObjective {
 public:
  SoftmaxHead(Eigen::MatrixXd one_hot, int hidden, CurvatureBounds surrogate);

  int dim() const override { return samples_ * hidden_ + theta_dim(); }
  double value(const Vec& x) const override;
  Vec gradient(const Vec& x) const override;
  double value_and_gradient(const Vec& x, Vec& grad) const override;
  CurvatureBounds curvature() const override { return curv_; }
  std::string name() const override { return "softmax_head"; }

  int theta_dim() const { return hidden_ * classes_ + classes_; }
  int samples() const { return samples_; }
  int hidden() const { return hidden_; }
  int classes() const { return classes_; }
  void set_curvature(CurvatureBounds c) { curv_ = c; }

 private:
  double evaluate(const Vec& x, Vec* grad) const;

  Mat one_hot_;  // M x C
  int samples_;
  int hidden_;
  int classes_;
  CurvatureBounds curv_;
};

// f ≡ 0 on R^n. Curvature reported as (0, 0); callers needing a positive
// Lipschitz constant take max with their own floor.
class ZeroObjective final : public LocalObjective {
 public:
  explicit ZeroObjective(int dim) : dim_(dim) {}
  int dim() const override { return dim_; }
  double value(const Vec&) const override { return 0.0; }
  Vec gradient(const Vec&) const override { return Vec::Zero(dim_); }
  CurvatureBounds curvature() const override { return {0.0, 0.0}; }
  std::string name() const override { return "zero"; }

 private:
  int dim_;
};

// Separable sum over consecutive segments of the variable.
class StackedObjective final : public LocalObjective {
 public:
  explicit StackedObjective(std::vector<ObjectivePtr> parts);

  int dim() const override { return dim_; }
  double value(const Vec& x) const override;
  Vec gradient(const Vec& x) const override;
  double value_and_gradient(const Vec& x, Vec& grad) const override;
  CurvatureBounds curvature() const override;
  std::string name() const override;
  const std::vector<ObjectivePtr>& parts() const { return parts_; }

 private:
  std::vector<ObjectivePtr> parts_;
  int dim_ = 0;
};

// Worst coordinate-wise error of central differences against the analytic
// gradient, scaled as |g − g_fd| / max(1, |g|, |g_fd|).
double finite_diff_check(const LocalObjective& obj, const Vec& point, double step);

struct CurvatureAudit {
  int pairs = 0;
  double worst_lipschitz_excess = 0.0;  // max(‖Δ∇f‖ − γ⁺‖Δx‖), ≤ 0 when certified
  double worst_convexity_excess = 0.0;  // max(γ⁻‖Δx‖² − ⟨Δ∇f, Δx⟩)
};

// Samples pairs uniformly on the box [-radius, radius]^n and measures how far
// the declared curvature bounds are from being violated. With local_pairs set,
// every other pair is a small perturbation of its partner; leave it off for
// non-smooth objectives, whose secant slopes blow up across kinks.
CurvatureAudit audit_curvature(const LocalObjective& obj, int pairs, double radius,
                               std::uint64_t seed, bool local_pairs = true);

}  // namespace pdc

#endif  // PDC_OBJECTIVE_HPP_
