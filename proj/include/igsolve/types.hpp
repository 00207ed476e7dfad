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

#ifndef IGSOLVE_TYPES_HPP
#define IGSOLVE_TYPES_HPP

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <complex>
#include <stdexcept>
#include <vector>

namespace igsolve {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using ComplexVector = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;

// Per-user storage following the cell/user nesting of a scenario: outer index
// is the cell, inner index the user within that cell.
template <typename T>
using PerUser = std::vector<std::vector<T>>;

template <typename T>
PerUser<T> make_per_user(const std::vector<int>& users_per_cell, const T& value) {
  PerUser<T> out(users_per_cell.size());
  for (std::size_t k = 0; k < users_per_cell.size(); ++k) {
    out[k].assign(static_cast<std::size_t>(users_per_cell[k]), value);
  }
  return out;
}

}  // namespace igsolve

#endif  // IGSOLVE_TYPES_HPP
