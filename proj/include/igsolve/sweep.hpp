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
// Demand sweeps over signaling modes, with a stable CSV table format.
// Points run sequentially in a fixed order (modes in the given order,
// demands ascending), so repeated runs produce byte-identical tables.

#ifndef IGSOLVE_SWEEP_HPP
#define IGSOLVE_SWEEP_HPP

#include <cstdio>
#include <ostream>
#include <string>

#include "igsolve/sca.hpp"

namespace igsolve {

struct ModePoint {
  SignalingMode mode = SignalingMode::Improper;
  int extension = 1;
};

inline const char* mode_label(SignalingMode mode) {
  return mode == SignalingMode::Proper ? "pgs" : "igs";
}

inline const char* status_label(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::Infeasible: return "infeasible";
    default: return "max_iterations";
  }
}

// Parses "igs:2,pgs:1,igs" (extension defaults to 1) into mode points.
inline std::vector<ModePoint> parse_modes(const std::string& text) {
  std::vector<ModePoint> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    std::string token = text.substr(pos, comma - pos);
    pos = comma + 1;
    if (token.empty()) {
      if (out.empty() && pos > text.size()) break;
      throw std::invalid_argument("modes: empty entry in '" + text + "'");
    }
    ModePoint mp;
    std::string name = token;
    const std::size_t colon = token.find(':');
    if (colon != std::string::npos) {
      name = token.substr(0, colon);
      const std::string ext = token.substr(colon + 1);
      std::size_t used = 0;
      int n = 0;
      try {
        n = std::stoi(ext, &used);
      } catch (const std::exception&) {
        throw std::invalid_argument("modes: bad extension in '" + token + "'");
      }
      if (used != ext.size() || n < 1)
        throw std::invalid_argument("modes: bad extension in '" + token + "'");
      mp.extension = n;
    }
    if (name == "igs") {
      mp.mode = SignalingMode::Improper;
    } else if (name == "pgs") {
      mp.mode = SignalingMode::Proper;
    } else {
      throw std::invalid_argument("modes: unknown mode '" + name + "' (use igs or pgs)");
    }
    out.push_back(mp);
  }
  if (out.empty()) throw std::invalid_argument("modes: no entries in '" + text + "'");
  return out;
}

// Inclusive arithmetic progression with a relative tolerance on the end
// point, so textbook grids like 0.01:0.01:1.0 include the stop value.
template <typename Scalar>
std::vector<Scalar> demand_sequence(Scalar start, Scalar step, Scalar stop) {
  if (!(std::isfinite(static_cast<double>(start)) && std::isfinite(static_cast<double>(step)) &&
        std::isfinite(static_cast<double>(stop))))
    throw std::invalid_argument("demands: values must be finite");
  std::vector<Scalar> out;
  if (!(step > Scalar(0))) {
    if (step == Scalar(0) && start == stop) return {start};
    throw std::invalid_argument("demands: step must be positive");
  }
  const Scalar tol = step * Scalar(1e-6);
  for (int k = 0;; ++k) {
    const Scalar v = start + Scalar(k) * step;
    if (v > stop + tol) break;
    out.push_back(v);
    if (k > 1000000) throw std::invalid_argument("demands: sequence too long");
  }
  return out;
}

template <typename Scalar>
struct SweepSpec {
  std::string scenario_label;  // free-form tag for the table
  Scenario<Scalar> scenario;
  std::vector<ModePoint> modes;
  std::vector<Scalar> demands;    // bits per channel use, applied to every user
  Scalar budget = Scalar(100);    // per-user trace budget
  SolverOptions<Scalar> options{};
};

template <typename Scalar>
struct SweepRow {
  std::string scenario_label;
  int antennas = 1;
  ModePoint point;
  Scalar demand = Scalar(0);
  SolveStatus status = SolveStatus::MaxIterations;
  Scalar sum_power = Scalar(0);
  int outer_iterations = 0;
  Scalar min_rate_margin = Scalar(0);
  Scalar max_properness_defect = Scalar(0);
  std::vector<int> ranks;  // user order, cells outermost
};

namespace detail {

inline std::string short_real(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace detail

// Runs every (mode, demand) point: solve, then re-check the solution against
// the exact rate expressions.  Per-round powers go to `trace` when given.
template <typename Scalar>
std::vector<SweepRow<Scalar>> run_sweep(const SweepSpec<Scalar>& spec,
                                        std::ostream* trace = nullptr) {
  std::vector<SweepRow<Scalar>> rows;
  for (const ModePoint& mp : spec.modes) {
    for (const Scalar demand : spec.demands) {
      const SignalingConfig<Scalar> config =
          uniform_config(spec.scenario, mp.mode, mp.extension, demand, spec.budget);
      const SolveResult<Scalar> res =
          minimize_sum_power(spec.scenario, config, spec.options);

      SweepRow<Scalar> row;
      row.scenario_label = spec.scenario_label;
      row.antennas = spec.scenario.antennas;
      row.point = mp;
      row.demand = demand;
      row.status = res.status;
      row.outer_iterations = res.outer_iterations;
      if (res.status != SolveStatus::Infeasible) {
        row.sum_power = sum_power(res.q);
        const CertificationReport<Scalar> rep = certify(spec.scenario, config, res.q);
        row.min_rate_margin = rep.min_margin;
        row.max_properness_defect = rep.max_defect;
        for (const auto& cell : rep.ranks)
          for (const int r : cell) row.ranks.push_back(r);
      }
      if (trace) {
        for (std::size_t t = 0; t < res.power_trace.size(); ++t)
          *trace << "trace scenario=" << row.scenario_label << " mode=" << mode_label(mp.mode)
                 << " N=" << mp.extension
                 << " demand=" << detail::short_real(static_cast<double>(demand))
                 << " round=" << (t + 1) << " power="
                 << detail::short_real(static_cast<double>(res.power_trace[t])) << '\n';
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

// CSV with 12 significant digits; infeasible points leave the solution
// columns empty.
template <typename Scalar>
void emit_table(const std::vector<SweepRow<Scalar>>& rows, std::ostream& os) {
  os << "scenario,M,mode,N,demand_bits_per_cu,sum_power,status,outer_iters,"
        "min_rate_margin,max_properness_defect,ranks\n";
  for (const auto& row : rows) {
    os << row.scenario_label << ',' << row.antennas << ',' << mode_label(row.point.mode) << ','
       << row.point.extension << ',' << detail::short_real(static_cast<double>(row.demand))
       << ',';
    const bool solved = row.status != SolveStatus::Infeasible;
    if (solved) os << detail::short_real(static_cast<double>(row.sum_power));
    os << ',' << status_label(row.status) << ',' << row.outer_iterations << ',';
    if (solved) os << detail::short_real(static_cast<double>(row.min_rate_margin));
    os << ',';
    if (solved) os << detail::short_real(static_cast<double>(row.max_properness_defect));
    os << ',';
    for (std::size_t i = 0; i < row.ranks.size(); ++i) {
      if (i) os << ';';
      os << row.ranks[i];
    }
    os << '\n';
  }
}

}  // namespace igsolve

#endif  // IGSOLVE_SWEEP_HPP
