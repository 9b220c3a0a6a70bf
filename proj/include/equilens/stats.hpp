// Copyright 2026 The Equilens Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EQUILENS_STATS_HPP_
#define EQUILENS_STATS_HPP_

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "equilens/types.hpp"

namespace equilens {

class StatsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Sample Pearson correlation coefficient.
template <typename DX, typename DY>
typename DX::Scalar pearson(const Eigen::MatrixBase<DX>& xs,
                            const Eigen::MatrixBase<DY>& ys) {
  using Scalar = typename DX::Scalar;
  if (xs.size() != ys.size()) throw StatsError("pearson: length mismatch");
  if (xs.size() < 2) throw StatsError("pearson: need at least two points");
  const Vec<Scalar> dx = xs.array() - xs.mean();
  const Vec<Scalar> dy = ys.array() - ys.mean();
  const Scalar sxx = dx.squaredNorm();
  const Scalar syy = dy.squaredNorm();
  if (!(sxx > 0) || !(syy > 0)) throw StatsError("pearson: zero variance");
  const Scalar r = dx.dot(dy) / std::sqrt(sxx * syy);
  return std::clamp(r, Scalar(-1), Scalar(1));
}

inline double pearson(const std::vector<double>& xs,
                      const std::vector<double>& ys) {
  using Map = Eigen::Map<const VectorXd>;
  return pearson(Map(xs.data(), static_cast<Eigen::Index>(xs.size())),
                 Map(ys.data(), static_cast<Eigen::Index>(ys.size())));
}

// Fractional ranks (1-based), ties share their average rank.
template <typename Derived>
Vec<typename Derived::Scalar> average_ranks(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = v.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return v(a) < v(b); });
  Vec<Scalar> ranks(n);
  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i;
    while (j + 1 < n && v(order[j + 1]) == v(order[i])) ++j;
    const Scalar r = Scalar(i + j) / Scalar(2) + Scalar(1);
    for (Eigen::Index k = i; k <= j; ++k) ranks(order[k]) = r;
    i = j + 1;
  }
  return ranks;
}

// Spearman rank correlation (Pearson over average ranks).
template <typename DX, typename DY>
typename DX::Scalar spearman(const Eigen::MatrixBase<DX>& xs,
                             const Eigen::MatrixBase<DY>& ys) {
  return pearson(average_ranks(xs), average_ranks(ys));
}

inline double spearman(const std::vector<double>& xs,
                       const std::vector<double>& ys) {
  using Map = Eigen::Map<const VectorXd>;
  return spearman(Map(xs.data(), static_cast<Eigen::Index>(xs.size())),
                  Map(ys.data(), static_cast<Eigen::Index>(ys.size())));
}

}  // namespace equilens

#endif  // EQUILENS_STATS_HPP_
