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
// Convex power-minimization subproblem at fixed lower-bound anchors.
//
//   minimize    sum_u tr(Q_u)
//   subject to  rate_lower_bound(Q; Gamma_u) >= demand_u      (concave)
//               tr(Q_u) <= budget_u
//               Q_u  positive semidefinite
//
// Covariances are parameterized in an orthonormal basis of either the full
// symmetric space (improper signaling) or its J-commuting subspace (proper
// signaling).  The solver is a primal log-barrier method: damped Newton with
// Armijo backtracking on the centering objective, barrier parameter divided
// by 10 once the Newton decrement is small, terminated when the duality-gap
// surrogate (constraint count times barrier parameter) is tiny.  A phase-I
// run maximizes the minimum normalized constraint slack through the same
// machinery and doubles as the infeasibility certificate.
//
// Users with zero rate demand are dropped: their covariance is pinned to
// zero and their rate constraint disappears, which is optimal since their
// transmit power would only add interference.

#ifndef IGSOLVE_SUBPROBLEM_HPP
#define IGSOLVE_SUBPROBLEM_HPP

#include <algorithm>
#include <optional>

#include "igsolve/bound.hpp"

namespace igsolve {

enum class SignalingMode { Proper, Improper };

// Orthonormal basis of n x n real symmetric matrices, n(n+1)/2 elements.
template <typename Scalar>
std::vector<Matrix<Scalar>> symmetric_basis(int n) {
  if (n < 1) throw std::invalid_argument("symmetric_basis: size must be >= 1");
  std::vector<Matrix<Scalar>> out;
  const Scalar inv_sqrt2 = Scalar(1) / std::sqrt(Scalar(2));
  for (int p = 0; p < n; ++p) {
    Matrix<Scalar> e = Matrix<Scalar>::Zero(n, n);
    e(p, p) = Scalar(1);
    out.push_back(std::move(e));
  }
  for (int p = 0; p < n; ++p) {
    for (int q = p + 1; q < n; ++q) {
      Matrix<Scalar> e = Matrix<Scalar>::Zero(n, n);
      e(p, q) = inv_sqrt2;
      e(q, p) = inv_sqrt2;
      out.push_back(std::move(e));
    }
  }
  return out;
}

namespace detail {

// Real lifting of a complex Hermitian matrix: entry c_pq becomes the 2x2
// block [[Re, -Im], [Im, Re]] at block position (p, q).
template <typename Scalar>
Matrix<Scalar> lift_hermitian(
    const Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>& c) {
  Matrix<Scalar> out(2 * c.rows(), 2 * c.cols());
  for (Eigen::Index p = 0; p < c.rows(); ++p) {
    for (Eigen::Index q = 0; q < c.cols(); ++q) {
      const Scalar re = c(p, q).real();
      const Scalar im = c(p, q).imag();
      out(2 * p, 2 * q) = re;
      out(2 * p, 2 * q + 1) = -im;
      out(2 * p + 1, 2 * q) = im;
      out(2 * p + 1, 2 * q + 1) = re;
    }
  }
  return out;
}

}  // namespace detail

// Orthonormal basis of the proper (J-commuting) symmetric subspace in
// dimension 2N: the real lifting of the complex Hermitian N x N space, hence
// N^2 elements.
template <typename Scalar>
std::vector<Matrix<Scalar>> proper_basis(int extension) {
  if (extension < 1) throw std::invalid_argument("proper_basis: extension must be >= 1");
  using C = std::complex<Scalar>;
  using CMat = Eigen::Matrix<C, Eigen::Dynamic, Eigen::Dynamic>;
  const int n = extension;
  const Scalar inv_sqrt2 = Scalar(1) / std::sqrt(Scalar(2));
  std::vector<Matrix<Scalar>> out;
  for (int p = 0; p < n; ++p) {
    CMat c = CMat::Zero(n, n);
    c(p, p) = C(1, 0);
    out.push_back(detail::lift_hermitian<Scalar>(c) * inv_sqrt2);
  }
  for (int p = 0; p < n; ++p) {
    for (int q = p + 1; q < n; ++q) {
      CMat c = CMat::Zero(n, n);
      c(p, q) = C(inv_sqrt2, 0);
      c(q, p) = C(inv_sqrt2, 0);
      out.push_back(detail::lift_hermitian<Scalar>(c) * inv_sqrt2);
      c.setZero();
      c(p, q) = C(0, inv_sqrt2);
      c(q, p) = C(0, -inv_sqrt2);
      out.push_back(detail::lift_hermitian<Scalar>(c) * inv_sqrt2);
    }
  }
  return out;
}

template <typename Scalar>
std::vector<Matrix<Scalar>> covariance_basis(SignalingMode mode, int extension) {
  return mode == SignalingMode::Proper ? proper_basis<Scalar>(extension)
                                       : symmetric_basis<Scalar>(2 * extension);
}

template <typename Scalar>
struct SubproblemSpec {
  GammaSet<Scalar> gamma;
  PerUser<Scalar> demands;  // bits per channel use; zero drops the user
  PerUser<Scalar> budgets;  // trace budget per user
  SignalingMode mode = SignalingMode::Improper;
  int extension = 1;
};

template <typename Scalar>
struct SubproblemOptions {
  Scalar mu_initial = Scalar(1);
  Scalar mu_shrink = Scalar(0.1);
  Scalar newton_tolerance = Scalar(1e-6);
  Scalar gap_tolerance = Scalar(1e-8);       // on (constraint count) * mu
  Scalar armijo_slope = Scalar(0.3);
  Scalar backtrack = Scalar(0.5);
  int max_newton_per_stage = 250;
  int max_barrier_iterations = 50000;        // total Newton steps, both phases
  Scalar infeasibility_cut = Scalar(-1e-9);  // phase-I verdict threshold
  Scalar strict_start_slack = Scalar(1e-4);  // warm starts below this re-run phase I
  Scalar phase1_exit_slack = Scalar(0);      // > 0: stop phase I once this feasible
  Scalar init_power_fraction = Scalar(0.5);  // default phase-I covariance scale
};

enum class SubproblemStatus { Optimal, Infeasible, NonConverged };

template <typename Scalar>
struct BarrierSample {
  Scalar mu;
  Scalar objective;  // sum power per channel use at the iterate
  Scalar min_slack;  // minimum normalized constraint slack at the iterate
  Scalar newton_decrement;
};

template <typename Scalar>
struct SubproblemResult {
  SubproblemStatus status = SubproblemStatus::NonConverged;
  CovarianceSet<Scalar> q;
  Scalar objective = Scalar(0);  // sum power per channel use
  PerUser<Scalar> rate_slack;    // rate bound minus demand (zero-demand users: 0)
  PerUser<Scalar> power_slack;   // budget minus trace
  int barrier_iterations = 0;
  Scalar phase1_slack = std::numeric_limits<Scalar>::quiet_NaN();
  std::vector<BarrierSample<Scalar>> trace;
};

// Analytic gradient of the rate lower bound of user (k, i) with respect to
// every transmit covariance: Gb^T A^{-1} Gb for covariances inside the signal
// term, minus Gb^T Gamma^{-1} Gb for those inside the interference term, all
// scaled by 1/(N ln 2).  Users appearing in neither get a zero matrix.
template <typename Scalar>
PerUser<Matrix<Scalar>> grad_rate_lower_bound(const Scenario<Scalar>& s,
                                              const LiftedChannels<Scalar>& lifted,
                                              const CovarianceSet<Scalar>& qs,
                                              const Matrix<Scalar>& gamma, int k, int i) {
  const int n_ext = qs.extension;
  const Scalar scale = Scalar(1) / (Scalar(n_ext) * std::log(Scalar(2)));
  PerUser<Matrix<Scalar>> out = make_per_user<Matrix<Scalar>>(
      s.users_per_cell, Matrix<Scalar>::Zero(2 * n_ext, 2 * n_ext));

  const Matrix<Scalar> a = signal_covariance(s, lifted, qs, k, i);
  Eigen::LLT<Matrix<Scalar>> a_llt(a);
  if (a_llt.info() != Eigen::Success)
    throw std::domain_error("grad_rate_lower_bound: signal covariance is not positive definite");
  Eigen::LLT<Matrix<Scalar>> g_llt(gamma);
  if (g_llt.info() != Eigen::Success)
    throw std::domain_error("grad_rate_lower_bound: anchor matrix is not positive definite");

  for (int l = 0; l < s.cells; ++l) {
    for (int j = 0; j < s.users_per_cell[static_cast<std::size_t>(l)]; ++j) {
      const bool own_cell = (l == k);
      const bool in_a = own_cell ? (j >= i) : true;
      const bool in_b = own_cell ? (j > i) : true;
      if (!in_a && !in_b) continue;
      const Matrix<Scalar>& gb = lifted.gbar(k, j, l);
      Matrix<Scalar> grad = Matrix<Scalar>::Zero(2 * n_ext, 2 * n_ext);
      if (in_a) grad += gb.transpose() * a_llt.solve(gb);
      if (in_b) grad -= gb.transpose() * g_llt.solve(gb);
      out[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)] =
          symmetrize((grad * scale).eval());
    }
  }
  return out;
}

namespace detail {

template <typename Scalar>
struct ActiveUser {
  int cell = 0;
  int user = 0;
  int offset = 0;  // first coordinate in the packed variable vector
  int dim = 0;
  Scalar demand = Scalar(0);
  Scalar budget = Scalar(0);
  Vector<Scalar> trace_vec;  // tr(E_j) per basis element
};

template <typename Scalar>
struct RateConstraintData {
  int cell = 0;
  int user = 0;
  Scalar demand = Scalar(0);
  Scalar weight = Scalar(1);  // normalization for phase-I slacks
  std::vector<int> in_a;      // active-user indices in the signal term
  std::vector<const Matrix<Scalar>*> gbar_a;
  std::vector<int> in_b;      // active-user indices in the interference term
  Scalar logdet_gamma = Scalar(0);
  Eigen::LLT<Matrix<Scalar>> gamma_llt;
  std::vector<Vector<Scalar>> trace_coeff;  // per in_b entry, per basis element
  Scalar trace_const = Scalar(0);           // noise part of tr(Gamma^{-1} B)
};

// Barrier-form subproblem over packed basis coordinates.  With phase_one set
// the variable vector carries one extra coordinate s and every rate/power
// slack is shifted by s times its normalization weight; the objective becomes
// -s (max-min-slack epigraph form).
template <typename Scalar>
class BarrierProblem {
 public:
  BarrierProblem(const Scenario<Scalar>& scn, const LiftedChannels<Scalar>& lifted,
                 const SubproblemSpec<Scalar>& spec, bool phase_one)
      : scenario_(&scn), phase_one_(phase_one) {
    extension_ = spec.extension;
    basis_ = covariance_basis<Scalar>(spec.mode, extension_);
    const int d = static_cast<int>(basis_.size());
    noise_ = scn.noise_variance / Scalar(2);
    ambient_ = 2 * scn.antennas * extension_;

    int offset = 0;
    for (int k = 0; k < scn.cells; ++k) {
      for (int i = 0; i < scn.users_per_cell[static_cast<std::size_t>(k)]; ++i) {
        const Scalar demand =
            spec.demands[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
        if (!(demand > Scalar(0))) continue;
        ActiveUser<Scalar> u;
        u.cell = k;
        u.user = i;
        u.offset = offset;
        u.dim = d;
        u.demand = demand;
        u.budget = spec.budgets[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
        if (!(u.budget > Scalar(0)))
          throw std::invalid_argument("subproblem: budgets of demanded users must be > 0");
        u.trace_vec.resize(d);
        for (int j = 0; j < d; ++j) u.trace_vec[j] = basis_[static_cast<std::size_t>(j)].trace();
        users_.push_back(std::move(u));
        offset += d;
      }
    }
    n_ = offset;

    for (std::size_t uc = 0; uc < users_.size(); ++uc) {
      const auto& owner = users_[uc];
      RateConstraintData<Scalar> c;
      c.cell = owner.cell;
      c.user = owner.user;
      c.demand = owner.demand;
      c.weight = std::max(Scalar(1), owner.demand);
      const Matrix<Scalar>& gamma = spec.gamma.gamma[static_cast<std::size_t>(owner.cell)]
                                                    [static_cast<std::size_t>(owner.user)];
      if (gamma.rows() != ambient_ || gamma.cols() != ambient_)
        throw std::invalid_argument("subproblem: anchor matrix dimension mismatch");
      c.gamma_llt.compute(gamma);
      if (c.gamma_llt.info() != Eigen::Success)
        throw std::domain_error("subproblem: anchor matrix is not positive definite");
      c.logdet_gamma = Scalar(2) * c.gamma_llt.matrixLLT().diagonal().array().log().sum();
      c.trace_const =
          noise_ * c.gamma_llt.solve(Matrix<Scalar>::Identity(ambient_, ambient_)).trace();

      for (std::size_t uv = 0; uv < users_.size(); ++uv) {
        const auto& other = users_[uv];
        const bool own_cell = (other.cell == owner.cell);
        const bool in_a = own_cell ? (other.user >= owner.user) : true;
        const bool in_b = own_cell ? (other.user > owner.user) : true;
        if (!in_a && !in_b) continue;
        const Matrix<Scalar>& gb = lifted.gbar(owner.cell, other.user, other.cell);
        if (in_a) {
          c.in_a.push_back(static_cast<int>(uv));
          c.gbar_a.push_back(&gb);
        }
        if (in_b) {
          c.in_b.push_back(static_cast<int>(uv));
          const Matrix<Scalar> t = gb.transpose() * c.gamma_llt.solve(gb);
          Vector<Scalar> tau(d);
          for (int j = 0; j < d; ++j)
            tau[j] = t.cwiseProduct(basis_[static_cast<std::size_t>(j)]).sum();
          c.trace_coeff.push_back(std::move(tau));
        }
      }
      constraints_.push_back(std::move(c));
    }

    gap_count_ = Scalar(constraints_.size() + users_.size()) +
                 Scalar(users_.size()) * Scalar(2 * extension_);
  }

  int variable_count() const { return n_; }
  int dimension() const { return phase_one_ ? n_ + 1 : n_; }
  int extension() const { return extension_; }
  bool phase_one() const { return phase_one_; }
  Scalar gap_count() const { return gap_count_; }
  const std::vector<ActiveUser<Scalar>>& users() const { return users_; }

  struct Evaluation {
    Scalar sum_trace = Scalar(0);
    std::vector<Matrix<Scalar>> q;
    std::vector<Eigen::LLT<Matrix<Scalar>>> q_llt;
    std::vector<Scalar> q_logdet;
    std::vector<Eigen::LLT<Matrix<Scalar>>> a_llt;
    std::vector<Scalar> rate_slack;    // unshifted, bits per channel use
    std::vector<Scalar> power_slack;   // unshifted
    std::vector<Scalar> rate_shifted;  // barrier arguments
    std::vector<Scalar> power_shifted;
    Scalar min_normalized_slack = std::numeric_limits<Scalar>::infinity();
    Scalar barrier = Scalar(0);
  };

  std::vector<Matrix<Scalar>> unpack_active(const Vector<Scalar>& z) const {
    std::vector<Matrix<Scalar>> out;
    out.reserve(users_.size());
    for (const auto& u : users_) {
      Matrix<Scalar> q = Matrix<Scalar>::Zero(2 * extension_, 2 * extension_);
      for (int j = 0; j < u.dim; ++j)
        q += z[u.offset + j] * basis_[static_cast<std::size_t>(j)];
      out.push_back(std::move(q));
    }
    return out;
  }

  CovarianceSet<Scalar> unpack(const Vector<Scalar>& z) const {
    CovarianceSet<Scalar> qs = CovarianceSet<Scalar>::zero(*scenario_, extension_);
    auto active = unpack_active(z);
    for (std::size_t uc = 0; uc < users_.size(); ++uc)
      qs.q[static_cast<std::size_t>(users_[uc].cell)][static_cast<std::size_t>(users_[uc].user)] =
          std::move(active[uc]);
    return qs;
  }

  // Project covariances onto the packed coordinates (exact for matrices in
  // the basis span); users without variables are ignored.
  Vector<Scalar> pack(const CovarianceSet<Scalar>& qs) const {
    Vector<Scalar> z = Vector<Scalar>::Zero(dimension());
    for (const auto& u : users_) {
      const Matrix<Scalar>& q =
          qs.q[static_cast<std::size_t>(u.cell)][static_cast<std::size_t>(u.user)];
      for (int j = 0; j < u.dim; ++j)
        z[u.offset + j] = q.cwiseProduct(basis_[static_cast<std::size_t>(j)]).sum();
    }
    return z;
  }

  // Full constraint evaluation; empty when the point is outside the barrier
  // domain (a covariance not positive definite or a shifted slack <= 0).
  std::optional<Evaluation> evaluate(const Vector<Scalar>& z) const {
    if (!z.allFinite()) return std::nullopt;
    Evaluation e;
    e.q = unpack_active(z);
    const Scalar s_shift = phase_one_ ? z[n_] : Scalar(0);

    for (std::size_t uc = 0; uc < users_.size(); ++uc) {
      Eigen::LLT<Matrix<Scalar>> llt(e.q[uc]);
      if (llt.info() != Eigen::Success) return std::nullopt;
      const auto diag = llt.matrixLLT().diagonal();
      if ((diag.array() <= Scalar(0)).any()) return std::nullopt;
      const Scalar logdet = Scalar(2) * diag.array().log().sum();
      if (!std::isfinite(static_cast<double>(logdet))) return std::nullopt;
      e.q_llt.push_back(std::move(llt));
      e.q_logdet.push_back(logdet);

      const auto& u = users_[uc];
      const Scalar tr = e.q[uc].trace();
      e.sum_trace += tr;
      const Scalar slack = u.budget - tr;
      e.power_slack.push_back(slack);
      e.power_shifted.push_back(slack - s_shift * u.budget);
      e.min_normalized_slack = std::min(e.min_normalized_slack, slack / u.budget);
    }

    const Scalar ln2 = std::log(Scalar(2));
    for (const auto& c : constraints_) {
      Matrix<Scalar> a = noise_ * Matrix<Scalar>::Identity(ambient_, ambient_);
      for (std::size_t t = 0; t < c.in_a.size(); ++t) {
        const Matrix<Scalar>& gb = *c.gbar_a[t];
        a.noalias() += gb * e.q[static_cast<std::size_t>(c.in_a[t])] * gb.transpose();
      }
      Eigen::LLT<Matrix<Scalar>> llt(a);
      if (llt.info() != Eigen::Success) return std::nullopt;
      const Scalar logdet_a = Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
      e.a_llt.push_back(std::move(llt));

      Scalar trace_gamma_b = c.trace_const;
      for (std::size_t t = 0; t < c.in_b.size(); ++t) {
        const auto& u = users_[static_cast<std::size_t>(c.in_b[t])];
        trace_gamma_b += c.trace_coeff[t].dot(z.segment(u.offset, u.dim));
      }
      const Scalar rate = (logdet_a - c.logdet_gamma - trace_gamma_b + Scalar(ambient_)) /
                          (Scalar(extension_) * ln2);
      const Scalar slack = rate - c.demand;
      e.rate_slack.push_back(slack);
      e.rate_shifted.push_back(slack - s_shift * c.weight);
      e.min_normalized_slack = std::min(e.min_normalized_slack, slack / c.weight);
    }

    for (const Scalar v : e.rate_shifted) {
      if (!(v > Scalar(0))) return std::nullopt;
      e.barrier -= std::log(v);
    }
    for (const Scalar v : e.power_shifted) {
      if (!(v > Scalar(0))) return std::nullopt;
      e.barrier -= std::log(v);
    }
    for (const Scalar ld : e.q_logdet) e.barrier -= ld;
    if (!std::isfinite(static_cast<double>(e.barrier))) return std::nullopt;
    return e;
  }

  Scalar objective(const Evaluation& e, const Vector<Scalar>& z) const {
    return phase_one_ ? -z[n_] : e.sum_trace;
  }

  Scalar phi(const Evaluation& e, const Vector<Scalar>& z, Scalar mu) const {
    return objective(e, z) + mu * e.barrier;
  }

  void derivatives(const Evaluation& e, Scalar mu, Vector<Scalar>& grad,
                   Matrix<Scalar>& hess) const {
    const int dim = dimension();
    grad.setZero(dim);
    hess.setZero(dim, dim);
    const Scalar ln2 = std::log(Scalar(2));
    const Scalar rate_scale = Scalar(1) / (Scalar(extension_) * ln2);

    if (phase_one_) {
      grad[n_] = Scalar(-1);
    } else {
      for (const auto& u : users_) grad.segment(u.offset, u.dim) += u.trace_vec;
    }

    const Eigen::Index q_dim = 2 * extension_;
    const Matrix<Scalar> eye_q = Matrix<Scalar>::Identity(q_dim, q_dim);

    // log-det barriers on the covariances
    for (std::size_t uc = 0; uc < users_.size(); ++uc) {
      const auto& u = users_[uc];
      const Matrix<Scalar> qinv = e.q_llt[uc].solve(eye_q);
      std::vector<Matrix<Scalar>> r;
      r.reserve(static_cast<std::size_t>(u.dim));
      for (int j = 0; j < u.dim; ++j) {
        const Matrix<Scalar>& ej = basis_[static_cast<std::size_t>(j)];
        grad[u.offset + j] -= mu * qinv.cwiseProduct(ej).sum();
        r.push_back(qinv * ej);
      }
      // tr(Q^{-1} E_a Q^{-1} E_b) is symmetric in (a, b)
      for (int a = 0; a < u.dim; ++a)
        for (int b = a; b < u.dim; ++b) {
          const Scalar h = mu * r[static_cast<std::size_t>(a)]
                                    .cwiseProduct(r[static_cast<std::size_t>(b)].transpose())
                                    .sum();
          hess(u.offset + a, u.offset + b) += h;
          if (b != a) hess(u.offset + b, u.offset + a) += h;
        }
    }

    // power barriers
    for (std::size_t uc = 0; uc < users_.size(); ++uc) {
      const auto& u = users_[uc];
      const Scalar s_p = e.power_shifted[uc];
      grad.segment(u.offset, u.dim) += (mu / s_p) * u.trace_vec;
      if (phase_one_) grad[n_] += mu * u.budget / s_p;
      const Scalar inv2 = mu / (s_p * s_p);
      hess.block(u.offset, u.offset, u.dim, u.dim).noalias() +=
          inv2 * (u.trace_vec * u.trace_vec.transpose());
      if (phase_one_) {
        hess.block(u.offset, n_, u.dim, 1).noalias() += inv2 * u.budget * u.trace_vec;
        hess.block(n_, u.offset, 1, u.dim).noalias() +=
            inv2 * u.budget * u.trace_vec.transpose();
        hess(n_, n_) += inv2 * u.budget * u.budget;
      }
    }

    // rate barriers
    Vector<Scalar> gs(dim);
    for (std::size_t ci = 0; ci < constraints_.size(); ++ci) {
      const auto& c = constraints_[ci];
      const Scalar s_r = e.rate_shifted[ci];
      const auto& a_llt = e.a_llt[ci];

      gs.setZero();
      std::vector<Matrix<Scalar>> x_solved(c.in_a.size());
      for (std::size_t t = 0; t < c.in_a.size(); ++t) {
        const auto& u = users_[static_cast<std::size_t>(c.in_a[t])];
        x_solved[t] = a_llt.solve(*c.gbar_a[t]);
        const Matrix<Scalar> m_uu = c.gbar_a[t]->transpose() * x_solved[t];
        for (int j = 0; j < u.dim; ++j)
          gs[u.offset + j] +=
              rate_scale * m_uu.cwiseProduct(basis_[static_cast<std::size_t>(j)]).sum();
      }
      for (std::size_t t = 0; t < c.in_b.size(); ++t) {
        const auto& u = users_[static_cast<std::size_t>(c.in_b[t])];
        gs.segment(u.offset, u.dim) -= rate_scale * c.trace_coeff[t];
      }
      if (phase_one_) gs[n_] = -c.weight;

      grad.noalias() -= (mu / s_r) * gs;
      hess.noalias() += (mu / (s_r * s_r)) * (gs * gs.transpose());

      // curvature of the log-det part (negative semidefinite, enters with -1/s)
      const Scalar curve_scale = mu * rate_scale / s_r;
      for (std::size_t ta = 0; ta < c.in_a.size(); ++ta) {
        const auto& ua = users_[static_cast<std::size_t>(c.in_a[ta])];
        for (std::size_t tb = ta; tb < c.in_a.size(); ++tb) {
          const auto& ub = users_[static_cast<std::size_t>(c.in_a[tb])];
          // m = Gb_a^T A^{-1} Gb_b; symmetric when ta == tb
          const Matrix<Scalar> m = c.gbar_a[ta]->transpose() * x_solved[tb];
          for (int b = 0; b < ub.dim; ++b) {
            const Matrix<Scalar> zb = m * basis_[static_cast<std::size_t>(b)] * m.transpose();
            for (int a = 0; a < ua.dim; ++a) {
              const Scalar h = curve_scale * basis_[static_cast<std::size_t>(a)]
                                                 .cwiseProduct(zb.transpose())
                                                 .sum();
              hess(ua.offset + a, ub.offset + b) += h;
              // mirror only across distinct user blocks; the diagonal block
              // loop already covers both (a, b) orders
              if (tb != ta) hess(ub.offset + b, ua.offset + a) += h;
            }
          }
        }
      }
    }

    hess = ((hess + hess.transpose()) / Scalar(2)).eval();
  }

 private:
  const Scenario<Scalar>* scenario_;
  bool phase_one_;
  int extension_ = 1;
  Eigen::Index ambient_ = 0;
  Scalar noise_ = Scalar(0);
  int n_ = 0;
  Scalar gap_count_ = Scalar(0);
  std::vector<Matrix<Scalar>> basis_;
  std::vector<ActiveUser<Scalar>> users_;
  std::vector<RateConstraintData<Scalar>> constraints_;
};

// Damped Newton descent on the centering objective at fixed mu.  Returns
// false when the decrement tolerance could not be reached.
template <typename Scalar>
bool newton_stage(const BarrierProblem<Scalar>& prob, Vector<Scalar>& z, Scalar mu,
                  const SubproblemOptions<Scalar>& opt, int& total_steps,
                  std::vector<BarrierSample<Scalar>>& trace) {
  Vector<Scalar> grad;
  Matrix<Scalar> hess;
  const Scalar norm = Scalar(1) / Scalar(prob.extension());
  for (int iter = 0; iter < opt.max_newton_per_stage; ++iter) {
    const auto eval = prob.evaluate(z);
    if (!eval) return false;  // caller invariant violated; bail out honestly
    prob.derivatives(*eval, mu, grad, hess);

    Vector<Scalar> dz;
    Scalar descent = Scalar(0);
    Scalar ridge = Scalar(0);
    bool solved = false;
    for (int attempt = 0; attempt < 8 && !solved; ++attempt) {
      Matrix<Scalar> h = hess;
      if (ridge > Scalar(0)) h.diagonal().array() += ridge;
      Eigen::LDLT<Matrix<Scalar>> ldlt(h);
      dz = ldlt.solve(-grad);
      descent = grad.dot(dz);
      if (dz.allFinite() && descent < Scalar(0)) {
        solved = true;
      } else {
        ridge = (ridge == Scalar(0))
                    ? Scalar(1e-12) *
                          std::max(Scalar(1), hess.diagonal().cwiseAbs().maxCoeff())
                    : ridge * Scalar(100);
      }
    }
    if (!solved) {
      // no usable descent direction: only acceptable at a numerically
      // stationary point
      trace.push_back(BarrierSample<Scalar>{mu, eval->sum_trace * norm,
                                            eval->min_normalized_slack, Scalar(0)});
      return grad.cwiseAbs().maxCoeff() <= Scalar(1e-10);
    }

    const Scalar decrement = std::sqrt(std::max(Scalar(0), -descent));
    trace.push_back(BarrierSample<Scalar>{mu, eval->sum_trace * norm,
                                          eval->min_normalized_slack, decrement});
    if (decrement <= opt.newton_tolerance) return true;
    if (++total_steps > opt.max_barrier_iterations) return false;

    const Scalar phi0 = prob.phi(*eval, z, mu);
    Scalar alpha = Scalar(1);
    bool accepted = false;
    while (alpha >= Scalar(1e-20)) {
      const Vector<Scalar> zt = z + alpha * dz;
      const auto et = prob.evaluate(zt);
      // the barrier domain check inside evaluate() keeps every accepted
      // iterate strictly feasible
      if (et && prob.phi(*et, zt, mu) <= phi0 + opt.armijo_slope * alpha * descent) {
        z = zt;
        accepted = true;
        break;
      }
      alpha *= opt.backtrack;
    }
    if (!accepted) return decrement <= Scalar(1e-3);  // stuck at numerical precision
  }
  return false;
}

// Full barrier schedule.  exit_slack > 0 stops as soon as the iterate is
// strictly feasible by that margin (used to cut phase I short).
template <typename Scalar>
SubproblemStatus barrier_solve(const BarrierProblem<Scalar>& prob, Vector<Scalar>& z,
                               const SubproblemOptions<Scalar>& opt, int& total_steps,
                               std::vector<BarrierSample<Scalar>>& trace,
                               Scalar exit_slack = Scalar(0)) {
  Scalar mu = opt.mu_initial;
  while (true) {
    if (!newton_stage(prob, z, mu, opt, total_steps, trace))
      return SubproblemStatus::NonConverged;
    if (exit_slack > Scalar(0)) {
      const auto eval = prob.evaluate(z);
      if (eval && eval->min_normalized_slack >= exit_slack) return SubproblemStatus::Optimal;
    }
    if (prob.gap_count() * mu <= opt.gap_tolerance) return SubproblemStatus::Optimal;
    mu *= opt.mu_shrink;
  }
}

// Default strictly-PD starting covariances at a fraction of each budget.
//
// Proper mode starts isotropic.  Improper mode must NOT: every operator in
// the problem commutes with the rotation J, so from rotation-invariant
// covariances and anchors the entire iteration stays on the proper
// (circular) manifold and the wider search space is never explored.  The
// improper start therefore loads each in-phase/quadrature plane unevenly
// along a user-specific direction and adds a rank-one component coupling the
// extension dimensions, deterministically derived from the user's index.
template <typename Scalar>
CovarianceSet<Scalar> default_start(const Scenario<Scalar>& scn,
                                    const SubproblemSpec<Scalar>& spec, Scalar fraction) {
  CovarianceSet<Scalar> qs = CovarianceSet<Scalar>::zero(scn, spec.extension);
  const int n_ext = spec.extension;
  const Eigen::Index dim = 2 * n_ext;
  const Scalar golden = Scalar(2.399963229728653);  // radians
  int global_user = 0;
  for (int k = 0; k < scn.cells; ++k)
    for (int i = 0; i < scn.users_per_cell[static_cast<std::size_t>(k)]; ++i, ++global_user) {
      if (!(spec.demands[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] > Scalar(0)))
        continue;
      const Scalar p = spec.budgets[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
      Matrix<Scalar>& q = qs.q[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
      if (spec.mode == SignalingMode::Proper) {
        q = (fraction * p / Scalar(dim)) * Matrix<Scalar>::Identity(dim, dim);
        continue;
      }
      Matrix<Scalar> shape = Matrix<Scalar>::Zero(dim, dim);
      Vector<Scalar> spike(dim);
      for (int d = 0; d < n_ext; ++d) {
        const Scalar phi = golden * Scalar(global_user + 1) + Scalar(0.5) * Scalar(d);
        const Scalar c = std::cos(phi);
        const Scalar s = std::sin(phi);
        Matrix<Scalar> plane(2, 2);
        plane(0, 0) = Scalar(0.9) * c * c + Scalar(0.1) * s * s;
        plane(1, 1) = Scalar(0.9) * s * s + Scalar(0.1) * c * c;
        plane(0, 1) = plane(1, 0) = Scalar(0.8) * c * s;
        shape.block(2 * d, 2 * d, 2, 2) = plane / Scalar(n_ext);
        spike[2 * d] = std::cos(phi + Scalar(0.9) * Scalar(d));
        spike[2 * d + 1] = std::sin(phi + Scalar(0.9) * Scalar(d));
      }
      spike /= spike.norm();
      q = fraction * p *
          (Scalar(0.75) * shape + Scalar(0.25) * (spike * spike.transpose()));
    }
  return qs;
}

template <typename Scalar>
void validate_spec(const Scenario<Scalar>& scn, const LiftedChannels<Scalar>& lifted,
                   const SubproblemSpec<Scalar>& spec) {
  if (spec.extension != lifted.extension)
    throw std::invalid_argument("subproblem: extension does not match the lifted channels");
  const auto check_shape = [&](const PerUser<Scalar>& v, const char* what) {
    if (static_cast<int>(v.size()) != scn.cells)
      throw std::invalid_argument(std::string("subproblem: ") + what + " cell count mismatch");
    for (int k = 0; k < scn.cells; ++k)
      if (static_cast<int>(v[static_cast<std::size_t>(k)].size()) !=
          scn.users_per_cell[static_cast<std::size_t>(k)])
        throw std::invalid_argument(std::string("subproblem: ") + what + " user count mismatch");
  };
  check_shape(spec.demands, "demands");
  check_shape(spec.budgets, "budgets");
  for (int k = 0; k < scn.cells; ++k)
    for (int i = 0; i < scn.users_per_cell[static_cast<std::size_t>(k)]; ++i) {
      const Scalar d = spec.demands[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
      if (!(d >= Scalar(0)) || !std::isfinite(static_cast<double>(d)))
        throw std::invalid_argument("subproblem: demands must be finite and >= 0");
    }
  if (static_cast<int>(spec.gamma.gamma.size()) != scn.cells)
    throw std::invalid_argument("subproblem: anchor set cell count mismatch");
  for (int k = 0; k < scn.cells; ++k)
    if (static_cast<int>(spec.gamma.gamma[static_cast<std::size_t>(k)].size()) !=
        scn.users_per_cell[static_cast<std::size_t>(k)])
      throw std::invalid_argument("subproblem: anchor set user count mismatch");
}

// Shared phase-I setup and run: seeds the epigraph variable from the initial
// covariances, then descends the barrier schedule.  On return z holds the
// final point and the measured minimum normalized slack is reported.
template <typename Scalar>
std::pair<SubproblemStatus, Scalar> run_phase1(const BarrierProblem<Scalar>& prob1,
                                               const Scenario<Scalar>& scn,
                                               const SubproblemSpec<Scalar>& spec,
                                               const CovarianceSet<Scalar>* start,
                                               const SubproblemOptions<Scalar>& opt,
                                               Scalar exit_slack, Vector<Scalar>& z,
                                               int& total_steps,
                                               std::vector<BarrierSample<Scalar>>& trace) {
  const int n = prob1.variable_count();
  const auto seed = [&](const CovarianceSet<Scalar>& qs) -> std::optional<Vector<Scalar>> {
    Vector<Scalar> cand = prob1.pack(qs);
    Vector<Scalar> probe = cand;
    probe[n] = Scalar(-1e30);  // deep shift exposes the unshifted slacks
    const auto eval = prob1.evaluate(probe);
    if (!eval) return std::nullopt;
    cand[n] = eval->min_normalized_slack - Scalar(1);
    return cand;
  };

  std::optional<Vector<Scalar>> seeded;
  if (start) seeded = seed(*start);
  if (!seeded) seeded = seed(detail::default_start(scn, spec, opt.init_power_fraction));
  if (!seeded)
    throw std::domain_error("subproblem: phase-I starting covariances are not positive definite");
  z = *seeded;

  const SubproblemStatus status = barrier_solve(prob1, z, opt, total_steps, trace, exit_slack);
  const auto eval = prob1.evaluate(z);
  const Scalar slack =
      eval ? eval->min_normalized_slack : -std::numeric_limits<Scalar>::infinity();
  return {status, slack};
}

}  // namespace detail

// Phase I: maximize the minimum normalized constraint slack.  Returns the
// final covariances and the attained minimum normalized slack; a negative
// value certifies infeasibility of the subproblem.
template <typename Scalar>
std::pair<CovarianceSet<Scalar>, Scalar> phase1_feasible_point(
    const Scenario<Scalar>& scn, const LiftedChannels<Scalar>& lifted,
    const SubproblemSpec<Scalar>& spec, const CovarianceSet<Scalar>* start = nullptr,
    const SubproblemOptions<Scalar>& opt = {}) {
  detail::validate_spec(scn, lifted, spec);
  detail::BarrierProblem<Scalar> prob1(scn, lifted, spec, /*phase_one=*/true);
  if (prob1.users().empty())
    return {CovarianceSet<Scalar>::zero(scn, spec.extension), Scalar(1)};

  Vector<Scalar> z;
  int steps = 0;
  std::vector<BarrierSample<Scalar>> trace;
  const auto [status, slack] =
      detail::run_phase1(prob1, scn, spec, start, opt, /*exit_slack=*/Scalar(0), z, steps, trace);
  (void)status;
  return {prob1.unpack(z), slack};
}

// Solves the convex subproblem.  `start`, when given and strictly feasible,
// seeds phase II directly; otherwise it seeds phase I.
template <typename Scalar>
SubproblemResult<Scalar> solve_subproblem(const Scenario<Scalar>& scn,
                                          const LiftedChannels<Scalar>& lifted,
                                          const SubproblemSpec<Scalar>& spec,
                                          const CovarianceSet<Scalar>* start = nullptr,
                                          const SubproblemOptions<Scalar>& opt = {}) {
  detail::validate_spec(scn, lifted, spec);
  SubproblemResult<Scalar> result;
  result.q = CovarianceSet<Scalar>::zero(scn, spec.extension);
  result.rate_slack = make_per_user<Scalar>(scn.users_per_cell, Scalar(0));
  result.power_slack = make_per_user<Scalar>(scn.users_per_cell, Scalar(0));
  for (int k = 0; k < scn.cells; ++k)
    for (int i = 0; i < scn.users_per_cell[static_cast<std::size_t>(k)]; ++i)
      result.power_slack[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] =
          spec.budgets[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];

  detail::BarrierProblem<Scalar> prob(scn, lifted, spec, /*phase_one=*/false);
  if (prob.users().empty()) {
    // all demands zero: the zero solution is optimal
    result.status = SubproblemStatus::Optimal;
    result.phase1_slack = Scalar(1);
    return result;
  }

  int steps = 0;
  Vector<Scalar> x;
  bool have_start = false;
  if (start) {
    Vector<Scalar> cand = prob.pack(*start);
    const CovarianceSet<Scalar> rebuilt = prob.unpack(cand);
    Scalar recon = Scalar(0);
    for (int k = 0; k < scn.cells; ++k)
      for (int i = 0; i < scn.users_per_cell[static_cast<std::size_t>(k)]; ++i)
        recon = std::max(
            recon, (rebuilt.q[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] -
                    start->q[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)])
                       .cwiseAbs()
                       .maxCoeff());
    if (recon <= Scalar(1e-8)) {
      const auto eval = prob.evaluate(cand);
      if (eval && eval->min_normalized_slack >= opt.strict_start_slack) {
        x = std::move(cand);
        have_start = true;
      }
    }
  }

  if (!have_start) {
    detail::BarrierProblem<Scalar> prob1(scn, lifted, spec, /*phase_one=*/true);
    Vector<Scalar> z;
    const auto [p1_status, slack] = detail::run_phase1(
        prob1, scn, spec, start, opt, opt.phase1_exit_slack, z, steps, result.trace);
    result.phase1_slack = slack;
    result.barrier_iterations = steps;

    bool proceed = false;
    if (p1_status == SubproblemStatus::Optimal) {
      if (slack < opt.infeasibility_cut) {
        result.status = SubproblemStatus::Infeasible;
      } else if (slack > Scalar(0)) {
        proceed = true;
      } else {
        // boundary case: feasible set has no certified interior
        result.status = SubproblemStatus::NonConverged;
      }
    } else {
      // an unconverged phase I cannot certify infeasibility, but a strictly
      // feasible iterate is still usable
      proceed = slack > Scalar(0);
      result.status = SubproblemStatus::NonConverged;
    }
    if (!proceed) {
      result.q = prob1.unpack(z);
      result.objective = sum_power(result.q);
      return result;
    }
    x = z.head(prob.variable_count());
  }

  result.status = detail::barrier_solve(prob, x, opt, steps, result.trace);
  result.barrier_iterations = steps;
  result.q = prob.unpack(x);
  result.objective = sum_power(result.q);
  const auto eval = prob.evaluate(x);
  if (eval) {
    const auto& users = prob.users();
    for (std::size_t uc = 0; uc < users.size(); ++uc) {
      const auto k = static_cast<std::size_t>(users[uc].cell);
      const auto i = static_cast<std::size_t>(users[uc].user);
      result.power_slack[k][i] = eval->power_slack[uc];
      result.rate_slack[k][i] = eval->rate_slack[uc];
    }
  }
  return result;
}

}  // namespace igsolve

#endif  // IGSOLVE_SUBPROBLEM_HPP
