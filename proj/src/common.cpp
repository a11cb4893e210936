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
#include "pdc/common.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace pdc {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Vec stack(const BlockVec& blocks) {
  Eigen::Index total = 0;
  for (const auto& b : blocks) total += b.size();
  Vec out(total);
  Eigen::Index off = 0;
  for (const auto& b : blocks) {
    out.segment(off, b.size()) = b;
    off += b.size();
  }
  return out;
}

BlockVec split(const Vec& v, const std::vector<int>& sizes) {
  BlockVec out;
  out.reserve(sizes.size());
  Eigen::Index off = 0;
  for (int s : sizes) {
    if (off + s > v.size()) throw std::invalid_argument("split: vector too short");
    out.push_back(v.segment(off, s));
    off += s;
  }
  if (off != v.size()) throw std::invalid_argument("split: size mismatch");
  return out;
}

Vec block_mean(const BlockVec& blocks) {
  if (blocks.empty()) return Vec();
  Vec acc = Vec::Zero(blocks.front().size());
  for (const auto& b : blocks) acc += b;
  return acc / static_cast<double>(blocks.size());
}

double spectral_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  // Eigenvalues of the smaller Gram matrix; cheaper than an SVD of tall blocks.
  const Mat gram = m.rows() >= m.cols() ? Mat(m.transpose() * m) : Mat(m * m.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

Mat kron_identity(const Mat& a, int m) {
  Mat out = Mat::Zero(a.rows() * m, a.cols() * m);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (a(i, j) != 0.0)
        out.block(i * m, j * m, m, m).diagonal().setConstant(a(i, j));
  return out;
}

}  // namespace pdc
