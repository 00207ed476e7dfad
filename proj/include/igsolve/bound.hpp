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
//
// Concave per-user rate lower bound.
//
// Concavity of log det gives, for positive definite B and any positive
// definite anchor Gamma of the same size n,
//
//   log2 det B <= log2 det Gamma + (tr(Gamma^{-1} B) - n) / ln 2,
//
// with equality at Gamma = B.  Substituting this upper bound for the
// interference term of the rate turns the rate into a concave function of the
// transmit covariances; the anchors are refreshed between outer iterations.

#ifndef IGSOLVE_BOUND_HPP
#define IGSOLVE_BOUND_HPP

#include "igsolve/rates.hpp"

namespace igsolve {

// One anchor matrix per user, same shape as the interference covariance.
template <typename Scalar>
struct GammaSet {
  PerUser<Matrix<Scalar>> gamma;
};

// Linearized upper bound on log2 det B around the anchor.  Gamma must be
// positive definite; B positive semidefinite of the same size.
template <typename Scalar>
Scalar fenchel_upper(const Matrix<Scalar>& b, const Matrix<Scalar>& gamma) {
  if (b.rows() != b.cols() || gamma.rows() != gamma.cols() || b.rows() != gamma.rows())
    throw std::invalid_argument("fenchel_upper: dimension mismatch");
  Eigen::LLT<Matrix<Scalar>> llt(gamma);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("fenchel_upper: anchor matrix is not positive definite");
  const Scalar ln2 = std::log(Scalar(2));
  const Scalar logdet_gamma = Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
  const Scalar trace_term = llt.solve(b).trace();
  return logdet_gamma / ln2 + (trace_term - Scalar(b.rows())) / ln2;
}

// Concave lower bound on the rate of user (k, i) in bits per channel use.
template <typename Scalar>
Scalar rate_lower_bound(const Scenario<Scalar>& s, const LiftedChannels<Scalar>& lifted,
                        const CovarianceSet<Scalar>& qs, const Matrix<Scalar>& gamma, int k,
                        int i) {
  const Matrix<Scalar> a = signal_covariance(s, lifted, qs, k, i);
  const Matrix<Scalar> b = interference_covariance(s, lifted, qs, k, i);
  const Scalar la = log_det_pd<Scalar>(a) / std::log(Scalar(2));
  return (la - fenchel_upper(b, gamma)) / Scalar(qs.extension);
}

// Anchors that make the bound tight at the given covariances: Gamma = B.
template <typename Scalar>
GammaSet<Scalar> gamma_from_covariances(const Scenario<Scalar>& s,
                                        const LiftedChannels<Scalar>& lifted,
                                        const CovarianceSet<Scalar>& qs) {
  GammaSet<Scalar> out;
  out.gamma.resize(static_cast<std::size_t>(s.cells));
  for (int k = 0; k < s.cells; ++k) {
    out.gamma[static_cast<std::size_t>(k)].resize(
        static_cast<std::size_t>(s.users_per_cell[static_cast<std::size_t>(k)]));
    for (int i = 0; i < s.users_per_cell[static_cast<std::size_t>(k)]; ++i)
      out.gamma[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] =
          interference_covariance(s, lifted, qs, k, i);
  }
  return out;
}

}  // namespace igsolve

#endif  // IGSOLVE_BOUND_HPP
