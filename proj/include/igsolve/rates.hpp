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
// Achievable rates in the lifted real-valued uplink model.
//
// Each base station decodes its own users successively in user-index order
// while treating both later own-cell users and every other-cell user as
// noise.  For user i of cell k the signal-plus-interference covariance is
//
//   A = (sigma^2/2) I + sum_{j >= i, own cell} Gb Q Gb^T + sum_{other cells} Gb Q Gb^T
//
// and the interference covariance B removes the user's own term.  The rate
// is log2 det A - log2 det B, reported normalized per channel use (divided by
// the extension length N).

#ifndef IGSOLVE_RATES_HPP
#define IGSOLVE_RATES_HPP

#include "igsolve/channel.hpp"
#include "igsolve/linalg.hpp"
#include "igsolve/types.hpp"

namespace igsolve {

// One real 2N x 2N transmit covariance per user.
template <typename Scalar>
struct CovarianceSet {
  int extension = 1;
  PerUser<Matrix<Scalar>> q;

  static CovarianceSet zero(const Scenario<Scalar>& s, int extension) {
    CovarianceSet out;
    out.extension = extension;
    out.q = make_per_user<Matrix<Scalar>>(s.users_per_cell,
                                          Matrix<Scalar>::Zero(2 * extension, 2 * extension));
    return out;
  }
};

template <typename Scalar>
struct RateVector {
  PerUser<Scalar> r;
};

// Shape/symmetry/PSD check; tolerances: symmetry 1e-10, eigenvalue floor -1e-9.
template <typename Scalar>
void validate_covariances(const Scenario<Scalar>& s, const CovarianceSet<Scalar>& qs) {
  if (static_cast<int>(qs.q.size()) != s.cells)
    throw std::domain_error("covariances: cell count mismatch");
  const Eigen::Index dim = 2 * qs.extension;
  for (int k = 0; k < s.cells; ++k) {
    if (static_cast<int>(qs.q[static_cast<std::size_t>(k)].size()) !=
        s.users_per_cell[static_cast<std::size_t>(k)])
      throw std::domain_error("covariances: user count mismatch");
    for (const auto& q : qs.q[static_cast<std::size_t>(k)]) {
      if (q.rows() != dim || q.cols() != dim)
        throw std::domain_error("covariances: matrix dimension mismatch");
      if (!is_symmetric_within(q, Scalar(1e-10)))
        throw std::domain_error("covariances: matrix is not symmetric");
      if (min_eigenvalue<Scalar>(q) < Scalar(-1e-9))
        throw std::domain_error("covariances: matrix is not positive semidefinite");
    }
  }
}

namespace detail {

// Accumulates Gb Q Gb^T terms into `out` for every user treated as noise by
// (rx_cell=k, user=i), including user i itself when include_own is set.
template <typename Scalar>
void accumulate_interference(const Scenario<Scalar>& s, const LiftedChannels<Scalar>& lifted,
                             const CovarianceSet<Scalar>& qs, int k, int i, bool include_own,
                             Matrix<Scalar>& out) {
  for (int l = 0; l < s.cells; ++l) {
    const int users = s.users_per_cell[static_cast<std::size_t>(l)];
    for (int j = 0; j < users; ++j) {
      const bool own_cell = (l == k);
      if (own_cell && j < i) continue;             // already decoded and removed
      if (own_cell && j == i && !include_own) continue;
      const Matrix<Scalar>& gb = lifted.gbar(k, j, l);
      out.noalias() += gb * qs.q[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)] *
                       gb.transpose();
    }
  }
}

template <typename Scalar>
void check_user_index(const Scenario<Scalar>& s, int k, int i) {
  if (k < 0 || k >= s.cells) throw std::invalid_argument("rates: cell index out of range");
  if (i < 0 || i >= s.users_per_cell[static_cast<std::size_t>(k)])
    throw std::invalid_argument("rates: user index out of range");
}

}  // namespace detail

// Covariance of everything user (k, i) receives while being decoded.
template <typename Scalar>
Matrix<Scalar> signal_covariance(const Scenario<Scalar>& s, const LiftedChannels<Scalar>& lifted,
                                 const CovarianceSet<Scalar>& qs, int k, int i) {
  detail::check_user_index(s, k, i);
  const Eigen::Index dim = 2 * s.antennas * qs.extension;
  Matrix<Scalar> a = (s.noise_variance / Scalar(2)) * Matrix<Scalar>::Identity(dim, dim);
  detail::accumulate_interference(s, lifted, qs, k, i, /*include_own=*/true, a);
  return a;
}

// Same with the user's own contribution removed.
template <typename Scalar>
Matrix<Scalar> interference_covariance(const Scenario<Scalar>& s,
                                       const LiftedChannels<Scalar>& lifted,
                                       const CovarianceSet<Scalar>& qs, int k, int i) {
  detail::check_user_index(s, k, i);
  const Eigen::Index dim = 2 * s.antennas * qs.extension;
  Matrix<Scalar> b = (s.noise_variance / Scalar(2)) * Matrix<Scalar>::Identity(dim, dim);
  detail::accumulate_interference(s, lifted, qs, k, i, /*include_own=*/false, b);
  return b;
}

// Rate of user (k, i) in bits per extended block (unnormalized).
template <typename Scalar>
Scalar achievable_rate_raw(const Scenario<Scalar>& s, const LiftedChannels<Scalar>& lifted,
                           const CovarianceSet<Scalar>& qs, int k, int i) {
  validate_covariances(s, qs);
  const Scalar la = log_det_pd<Scalar>(signal_covariance(s, lifted, qs, k, i));
  const Scalar lb = log_det_pd<Scalar>(interference_covariance(s, lifted, qs, k, i));
  return (la - lb) / std::log(Scalar(2));
}

// Rate of user (k, i) in bits per channel use.
template <typename Scalar>
Scalar achievable_rate(const Scenario<Scalar>& s, const LiftedChannels<Scalar>& lifted,
                       const CovarianceSet<Scalar>& qs, int k, int i) {
  return achievable_rate_raw(s, lifted, qs, k, i) / Scalar(qs.extension);
}

template <typename Scalar>
RateVector<Scalar> all_rates(const Scenario<Scalar>& s, const LiftedChannels<Scalar>& lifted,
                             const CovarianceSet<Scalar>& qs) {
  RateVector<Scalar> out;
  out.r = make_per_user<Scalar>(s.users_per_cell, Scalar(0));
  for (int k = 0; k < s.cells; ++k)
    for (int i = 0; i < s.users_per_cell[static_cast<std::size_t>(k)]; ++i)
      out.r[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] =
          achievable_rate(s, lifted, qs, k, i);
  return out;
}

// Total transmit power per channel use.
template <typename Scalar>
Scalar sum_power(const CovarianceSet<Scalar>& qs) {
  Scalar total = Scalar(0);
  for (const auto& cell : qs.q)
    for (const auto& q : cell) total += q.trace();
  return total / Scalar(qs.extension);
}

// Block-diagonal rotation J = I_N (Kronecker) [[0, -1], [1, 0]]; a lifted
// covariance describes a proper (circularly symmetric) complex signal exactly
// when it commutes with J.
template <typename Scalar>
Matrix<Scalar> rotation_operator(int extension) {
  Matrix<Scalar> j = Matrix<Scalar>::Zero(2 * extension, 2 * extension);
  for (int n = 0; n < extension; ++n) {
    j(2 * n, 2 * n + 1) = Scalar(-1);
    j(2 * n + 1, 2 * n) = Scalar(1);
  }
  return j;
}

template <typename Scalar>
Scalar properness_defect(const Matrix<Scalar>& q) {
  if (q.rows() != q.cols() || q.rows() % 2 != 0)
    throw std::invalid_argument("properness_defect: expected a square matrix of even size");
  const Matrix<Scalar> j = rotation_operator<Scalar>(static_cast<int>(q.rows() / 2));
  return (q - j * q * j.transpose()).norm();
}

// Orthogonal projection onto the proper (J-commuting) subspace.
template <typename Scalar>
Matrix<Scalar> project_proper(const Matrix<Scalar>& q) {
  if (q.rows() != q.cols() || q.rows() % 2 != 0)
    throw std::invalid_argument("project_proper: expected a square matrix of even size");
  const Matrix<Scalar> j = rotation_operator<Scalar>(static_cast<int>(q.rows() / 2));
  return ((q + j * q * j.transpose()) / Scalar(2)).eval();
}

}  // namespace igsolve

#endif  // IGSOLVE_RATES_HPP
