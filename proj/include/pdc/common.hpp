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
#ifndef PDC_COMMON_HPP_
#define PDC_COMMON_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pdc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// One vector per agent. Used for x, y, p and z blocks alike.
using BlockVec = std::vector<Vec>;

// Seeded generator shared by every randomized builder. mt19937_64 output is
// fixed by the standard, so edge lists and data are reproducible everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller, so streams do not depend on the library's
  // distribution implementation.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  Vec uniform_vec(int n, double lo, double hi) {
    Vec v(n);
    for (int k = 0; k < n; ++k) v[k] = uniform(lo, hi);
    return v;
  }
  Vec normal_vec(int n) {
    Vec v(n);
    for (int k = 0; k < n; ++k) v[k] = normal();
    return v;
  }
  Mat normal_mat(int r, int c) {
    Mat m(r, c);
    for (int j = 0; j < c; ++j)
      for (int i = 0; i < r; ++i) m(i, j) = normal();
    return m;
  }

  // Fisher-Yates permutation of 0..n-1.
  std::vector<int> permutation(int n) {
    std::vector<int> perm(n);
    for (int k = 0; k < n; ++k) perm[k] = k;
    for (int k = n - 1; k > 0; --k) {
      const int j = static_cast<int>(below(static_cast<std::uint64_t>(k) + 1));
      std::swap(perm[k], perm[j]);
    }
    return perm;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

// Concatenate blocks into one long vector, and the inverse.
Vec stack(const BlockVec& blocks);
BlockVec split(const Vec& v, const std::vector<int>& sizes);

// Mean of equally sized blocks.
Vec block_mean(const BlockVec& blocks);

// Spectral norm (largest singular value).
double spectral_norm(const Mat& m);

// A ⊗ I_m.
Mat kron_identity(const Mat& a, int m);

}  // namespace pdc

#endif  // PDC_COMMON_HPP_
