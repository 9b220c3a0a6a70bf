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

#ifndef EQUILENS_TYPES_HPP_
#define EQUILENS_TYPES_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace equilens {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowMat =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using VectorXd = Vec<double>;
using MatrixXd = Mat<double>;

// Numerically stable softmax of a dense vector.
template <typename Derived>
Vec<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  Vec<Scalar> out = (x.array() - x.maxCoeff()).exp().matrix();
  out /= out.sum();
  return out;
}

// Row-wise softmax; rows are independent distributions.
template <typename Derived>
Mat<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  Mat<Scalar> out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    out.row(r) = softmax(x.row(r).transpose()).transpose();
  }
  return out;
}

// Softmax with temperature; temperature 0 is a one-hot argmax with the
// lowest index winning ties.
template <typename Derived>
Vec<typename Derived::Scalar> tempered_softmax(
    const Eigen::MatrixBase<Derived>& logits, double temperature) {
  using Scalar = typename Derived::Scalar;
  if (temperature < 0.0) throw std::invalid_argument("temperature < 0");
  if (temperature == 0.0) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < logits.size(); ++i) {
      if (logits(i) > logits(best)) best = i;
    }
    Vec<Scalar> out = Vec<Scalar>::Zero(logits.size());
    out(best) = Scalar(1);
    return out;
  }
  return softmax((logits / Scalar(temperature)).eval());
}

// x / rms(x). The result has unit root-mean-square.
template <typename Derived>
Vec<typename Derived::Scalar> rms_normalize(const Eigen::MatrixBase<Derived>& x,
                                            double eps = 1e-12) {
  using Scalar = typename Derived::Scalar;
  const Scalar ms = x.squaredNorm() / Scalar(x.size());
  return x / std::sqrt(ms + Scalar(eps));
}

template <typename DA, typename DB>
typename DA::Scalar cosine(const Eigen::MatrixBase<DA>& a,
                           const Eigen::MatrixBase<DB>& b) {
  return a.dot(b) / (a.norm() * b.norm());
}

}  // namespace equilens

#endif  // EQUILENS_TYPES_HPP_
