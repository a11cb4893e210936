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
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include "doctest.h"
#include "pdc/problem.hpp"

using namespace pdc;

namespace {

ObjectivePtr scalar_quadratic(double q, double c) {
  return std::make_shared<QuadraticObjective>(Mat::Constant(1, 1, q), Vec::Constant(1, c));
}

}  // namespace

TEST_CASE("quadratic instances place eigenvalues as requested") {
  const CoupledProblem sc = build_quadratic_instance(5, 4, 3, 2, 1.0);
  CHECK(sc.curvature().gamma_minus >= 1.0 - 1e-12);
  CHECK(sc.curvature().gamma_plus <= 2.0 + 1e-12);
  for (int i = 0; i < 4; ++i) {
    Eigen::SelfAdjointEigenSolver<Mat> es(as_quadratic(sc, i).Q());
    CHECK(es.eigenvalues().minCoeff() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(es.eigenvalues().maxCoeff() == doctest::Approx(2.0).epsilon(1e-12));
  }

  const CoupledProblem nc = build_quadratic_instance(5, 4, 3, 2, -0.5);
  CHECK(nc.curvature().gamma_minus < 0.0);

  const CoupledProblem a = build_quadratic_instance(9, 3, 2, 2, 0.0);
  const CoupledProblem b = build_quadratic_instance(9, 3, 2, 2, 0.0);
  for (int i = 0; i < 3; ++i) {
    CHECK(as_quadratic(a, i).Q() == as_quadratic(b, i).Q());
    CHECK(as_quadratic(a, i).c() == as_quadratic(b, i).c());
    CHECK(a.B(i) == b.B(i));
  }
}

TEST_CASE("problem validation") {
  std::vector<ObjectivePtr> objs{scalar_quadratic(1, 0), scalar_quadratic(1, 0)};
  CHECK_THROWS_AS(CoupledProblem(objs, {Mat::Ones(1, 1), Mat::Ones(2, 1)}, Vec::Zero(1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(CoupledProblem(objs, {Mat::Ones(1, 1), Mat::Ones(1, 2)}, Vec::Zero(1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(CoupledProblem(objs, {Mat::Ones(1, 1)}, Vec::Zero(1)), std::invalid_argument);
  const CoupledProblem p(objs, {2.0 * Mat::Ones(1, 1), Mat::Ones(1, 1)}, Vec::Zero(1));
  CHECK(p.b_max() == doctest::Approx(2.0));
  CHECK_NOTHROW(p.validate());
}

TEST_CASE("consensus instance structure") {
  const Graph path = build_path(2);
  const CoupledProblem p2 =
      build_consensus_instance({scalar_quadratic(1, 0), scalar_quadratic(1, 0)}, path);
  CHECK(p2.B(0)(0, 0) == 1.0);
  CHECK(p2.B(1)(0, 0) == -1.0);
  CHECK(p2.q().isZero());

  // Hand product of the incidence matrix of the triangle with x = (1, 2, 3):
  // rows (0,1), (0,2), (1,2) give x0−x1, x0−x2, x1−x2.
  const Graph tri = build_cycle(3);
  std::vector<ObjectivePtr> objs(3, scalar_quadratic(1, 0));
  const CoupledProblem p3 = build_consensus_instance(objs, tri);
  const BlockVec x{Vec::Constant(1, 1.0), Vec::Constant(1, 2.0), Vec::Constant(1, 3.0)};
  const Vec s = p3.coupling_sum(x);
  CHECK(s[0] == -1.0);
  CHECK(s[1] == -2.0);
  CHECK(s[2] == -1.0);

  // Zero constraint violation exactly when all blocks agree.
  Rng rng(1);
  const Graph g = build_random_connected(6, 0.3, 4);
  std::vector<ObjectivePtr> o2(6, std::make_shared<QuadraticObjective>(Mat::Identity(2, 2), Vec::Zero(2)));
  const CoupledProblem pc = build_consensus_instance(o2, g);
  const Vec common = rng.normal_vec(2);
  BlockVec eq(6, common);
  CHECK(pc.coupling_sum(eq).norm() < 1e-15);
  BlockVec ne = eq;
  ne[3][1] += 1e-3;
  CHECK(pc.coupling_sum(ne).norm() > 1e-4);

  CHECK_THROWS_AS(build_consensus_instance(std::vector<ObjectivePtr>(4, scalar_quadratic(1, 0)),
                                           Graph(4, {{0, 1}, {2, 3}})),
                  std::invalid_argument);
}

TEST_CASE("logistic regression pieces") {
  const LogisticLoss psi(Vec::Constant(1, 1.0));
  CHECK(psi.gradient(Vec::Zero(1))[0] == doctest::Approx(-0.5));
  const NonconvexPenalty r(1, 0.01, 0.5);
  CHECK(r.gradient(Vec::Zero(1))[0] == 0.0);
  CHECK(r.gradient(Vec::Constant(1, 1.0))[0] == doctest::Approx(0.01 / 2.25).epsilon(1e-14));
  CHECK_THROWS_AS(LogisticLoss(Vec::Constant(2, 0.5)), std::invalid_argument);
}

TEST_CASE("vertical LR builder") {
  VerticalDataset d = synthetic_vertical_dataset(3, 30, 4, 5, 2, 1.0);
  const CoupledProblem p = build_vertical_lr(d, 0.01, 0.5, 1);
  CHECK(p.n_agents() == 4);
  CHECK(p.constraint_dim() == 30);
  CHECK(p.local_dim(0) == 5);
  CHECK(p.local_dim(1) == 35);
  CHECK(p.B(1).rightCols(30) == -Mat::Identity(30, 30));
  CHECK(p.q().isZero());

  // Reformulated objective at the lifted point equals the original one.
  Rng rng(8);
  for (int t = 0; t < 10; ++t) {
    BlockVec w;
    for (int i = 0; i < 4; ++i) w.push_back(rng.normal_vec(5));
    const BlockVec x = vertical_lr_lift(d, w, 1);
    double lifted = 0.0;
    for (int i = 0; i < 4; ++i) lifted += p.objective(i).value(x[i]);
    const double orig = vertical_lr_objective(d, 0.01, 0.5, w);
    CHECK(std::abs(lifted - orig) <= 1e-10 * std::abs(orig));
    CHECK(p.coupling_sum(x).norm() < 1e-12);
  }

  d.labels[0] = 0.5;
  CHECK_THROWS_AS(build_vertical_lr(d, 0.01, 0.5, 0), std::invalid_argument);
}

TEST_CASE("vertical NN builder") {
  const VerticalDataset d = synthetic_vertical_dataset(4, 12, 3, 2, 3, 2.0);
  const int k = 4;
  const CoupledProblem p = build_vertical_nn(d, k, 0, 1);
  CHECK_FALSE(p.meta().smooth);
  for (int i = 1; i < 3; ++i) {
    CHECK(p.B(i).rows() == 12 * k);
    CHECK(p.B(i).cols() == 2 * k);
  }
  const int theta_dim = k * 3 + 3;
  CHECK(p.local_dim(0) == 2 * k + 12 * k + theta_dim);

  // Zero first-layer weights give zero hidden activations.
  BlockVec zero(3, Vec::Zero(2 * k));
  const Vec theta = Vec::Constant(theta_dim, 0.1);
  const BlockVec x0 = vertical_nn_lift(d, k, zero, theta, 0);
  CHECK(x0[0].segment(2 * k, 12 * k).isZero());

  Rng rng(2);
  for (int t = 0; t < 5; ++t) {
    BlockVec w;
    for (int i = 0; i < 3; ++i) w.push_back(rng.normal_vec(2 * k));
    const Vec th = rng.normal_vec(theta_dim);
    const BlockVec x = vertical_nn_lift(d, k, w, th, 0);
    double lifted = 0.0;
    for (int i = 0; i < 3; ++i) lifted += p.objective(i).value(x[i]);
    const double orig = vertical_nn_objective(d, k, w, th);
    CHECK(std::abs(lifted - orig) <= 1e-10 * std::abs(orig));
    CHECK(p.coupling_sum(x).norm() < 1e-12);
  }
  CHECK_THROWS_AS(build_vertical_nn(d, 0, 0, 1), std::invalid_argument);
}

TEST_CASE("finite differences") {
  Rng rng(5);
  const CoupledProblem qp = build_quadratic_instance(1, 3, 4, 2, -0.3);
  for (int i = 0; i < 3; ++i)
    CHECK(finite_diff_check(qp.objective(i), rng.normal_vec(4), 1e-5) <= 1e-7);

  const LogisticLoss psi(Vec::Constant(6, 1.0));
  CHECK(finite_diff_check(psi, rng.normal_vec(6), 1e-5) <= 1e-5);
  const NonconvexPenalty r(6, 0.01, 0.5);
  CHECK(finite_diff_check(r, rng.normal_vec(6), 1e-5) <= 1e-5);

  const QuadraticObjective constant(Mat::Zero(3, 3), Vec::Zero(3), 4.0);
  CHECK(finite_diff_check(constant, rng.normal_vec(3), 1e-5) == 0.0);
  CHECK_THROWS_AS(finite_diff_check(constant, rng.normal_vec(3), 0.0), std::invalid_argument);
}

TEST_CASE("sampled curvature certification for every builder") {
  const CoupledProblem qp = build_quadratic_instance(2, 3, 4, 2, -0.4);
  for (int i = 0; i < 3; ++i) {
    const CurvatureAudit a = audit_curvature(qp.objective(i), 1000, 3.0, 10 + i);
    CHECK(a.worst_lipschitz_excess <= 1e-9);
    CHECK(a.worst_convexity_excess <= 1e-9);
  }
  const VerticalDataset d = synthetic_vertical_dataset(3, 20, 3, 4, 2, 1.0);
  const CoupledProblem lr = build_vertical_lr(d, 0.01, 0.5, 0);
  for (int i = 0; i < 3; ++i) {
    const CurvatureAudit a = audit_curvature(lr.objective(i), 1000, 4.0, 20 + i);
    CHECK(a.worst_lipschitz_excess <= 1e-9);
    CHECK(a.worst_convexity_excess <= 1e-9);
  }
  const VerticalDataset dn = synthetic_vertical_dataset(3, 10, 2, 2, 3, 1.0);
  const CoupledProblem nn = build_vertical_nn(dn, 3, 0, 7);
  for (int i = 0; i < 2; ++i) {
    // The ReLU head is non-smooth; its surrogate is certified on the same
    // far-pair distribution it was fitted on.
    const CurvatureAudit a = audit_curvature(nn.objective(i), 1000, 1.0, 30 + i, false);
    CHECK(a.worst_lipschitz_excess <= 1e-9);
    CHECK(a.worst_convexity_excess <= 1e-9);
  }
}

TEST_CASE("KKT oracle") {
  std::vector<ObjectivePtr> objs{scalar_quadratic(1, 0), scalar_quadratic(1, 0)};
  const CoupledProblem p(objs, {Mat::Ones(1, 1), Mat::Ones(1, 1)}, Vec::Constant(1, 2.0));
  const KktSolution s = kkt_oracle_quadratic(p);
  CHECK(s.x[0][0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(s.x[1][0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(s.y[0] == doctest::Approx(-1.0).epsilon(1e-14));

  const CoupledProblem z(objs, {Mat::Ones(1, 1), Mat::Ones(1, 1)}, Vec::Zero(1));
  const KktSolution sz = kkt_oracle_quadratic(z);
  CHECK(sz.x[0].norm() == 0.0);
  CHECK(sz.y.norm() == 0.0);

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const CoupledProblem r = build_quadratic_instance(seed, 4, 3, 3, 1.0);
    const KktSolution k = kkt_oracle_quadratic(r);
    double stat = 0.0;
    for (int i = 0; i < 4; ++i)
      stat += (r.objective(i).gradient(k.x[i]) + r.B(i).transpose() * k.y).squaredNorm();
    CHECK(stat / 12.0 <= 1e-16);
    CHECK((r.coupling_sum(k.x) - r.q()).squaredNorm() / 3.0 <= 1e-16);

    // Agent order does not change the solution.
    const std::vector<int> perm{2, 0, 3, 1};
    const KktSolution kp = kkt_oracle_quadratic(r.permuted(perm));
    for (int t = 0; t < 4; ++t) CHECK((kp.x[t] - k.x[perm[t]]).norm() <= 1e-10);
    CHECK((kp.y - k.y).norm() <= 1e-10);
  }

  const CoupledProblem sing({std::make_shared<QuadraticObjective>(Mat::Zero(1, 1), Vec::Zero(1))},
                            {Mat::Zero(1, 1)}, Vec::Zero(1));
  CHECK_THROWS_AS(kkt_oracle_quadratic(sing), std::runtime_error);
}

TEST_CASE("dataset files round trip") {
  const VerticalDataset d = synthetic_vertical_dataset(6, 7, 3, 2, 2, 1.0);
  const std::string csv = "pdc_test_data.csv", part = "pdc_test_part.csv";
  {
    std::ofstream a(csv), b(part);
    write_dataset_csv(a, d);
    write_partition(b, d);
  }
  const VerticalDataset r = read_vertical_dataset(csv, part, 2);
  CHECK(r.features == d.features);
  CHECK(r.labels == d.labels);
  CHECK(r.n_agents() == 3);
  CHECK(r.partition[2].begin == 4);
  CHECK(r.partition[2].end == 6);
  {
    std::ofstream b(part);
    b << "0,0,2\n1,3,6\n";
  }
  CHECK_THROWS_AS(read_vertical_dataset(csv, part, 2), std::invalid_argument);
  std::remove(csv.c_str());
  std::remove(part.c_str());
}
