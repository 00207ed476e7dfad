// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// -------------------------------------------------------------------------

#ifndef IGSOLVE_LINALG_HPP
#define IGSOLVE_LINALG_HPP

#include <cmath>
#include <limits>
#include <optional>

#include "igsolve/types.hpp"

namespace igsolve {

template <typename Derived>
Matrix<typename Derived::Scalar> symmetrize(const Eigen::MatrixBase<Derived>& m) {
  return (m + m.transpose()) / typename Derived::Scalar(2);
}

template <typename Derived>
bool is_symmetric_within(const Eigen::MatrixBase<Derived>& m,
                         typename Derived::Scalar tol) {
  if (m.rows() != m.cols()) return false;
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol;
}

// log(det(m)) of a symmetric positive definite matrix via Cholesky; the
// factorization doubles as the definiteness test.
template <typename Scalar>
std::optional<Scalar> try_log_det_pd(const Matrix<Scalar>& m) {
  Eigen::LLT<Matrix<Scalar>> llt(m);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const auto diag = llt.matrixLLT().diagonal();
  if ((diag.array() <= Scalar(0)).any()) return std::nullopt;
  const Scalar value = Scalar(2) * diag.array().log().sum();
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

template <typename Scalar>
Scalar log_det_pd(const Matrix<Scalar>& m) {
  const auto value = try_log_det_pd<Scalar>(m);
  if (!value) throw std::domain_error("log_det_pd: matrix is not positive definite");
  return *value;
}

template <typename Scalar>
Scalar min_eigenvalue(const Matrix<Scalar>& m) {
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// Count of eigenvalues above rel_tol times the largest one (zero when the
// matrix has no positive eigenvalue at all).
template <typename Scalar>
int numerical_rank(const Matrix<Scalar>& m, Scalar rel_tol = Scalar(1e-8)) {
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(m, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const Scalar top = ev.maxCoeff();
  if (!(top > Scalar(0))) return 0;
  return static_cast<int>((ev.array() > rel_tol * top).count());
}

}  // namespace igsolve

#endif  // IGSOLVE_LINALG_HPP
