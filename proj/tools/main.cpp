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
// Command-line front end: solve a single demand point or sweep a demand
// range across signaling modes and emit a CSV table.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "igsolve/sweep.hpp"

namespace {

using Scalar = double;

std::string scenario_label_from_ref(const std::string& ref) {
  if (ref.rfind("builtin:", 0) == 0) return ref.substr(8);
  std::string base = ref;
  const std::size_t slash = base.find_last_of("/\\");
  if (slash != std::string::npos) base = base.substr(slash + 1);
  const std::size_t dot = base.find_last_of('.');
  if (dot != std::string::npos && dot > 0) base = base.substr(0, dot);
  return base.empty() ? ref : base;
}

// "r" or "start:step:stop" (inclusive)
std::vector<Scalar> parse_demand_spec(const std::string& text) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (true) {
    const std::size_t colon = text.find(':', pos);
    if (colon == std::string::npos) {
      parts.push_back(text.substr(pos));
      break;
    }
    parts.push_back(text.substr(pos, colon - pos));
    pos = colon + 1;
  }
  const auto to_real = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("demands: cannot parse '" + s + "'");
    }
    if (used != s.size()) throw std::invalid_argument("demands: cannot parse '" + s + "'");
    return static_cast<Scalar>(v);
  };
  if (parts.size() == 1) return {to_real(parts[0])};
  if (parts.size() == 3)
    return igsolve::demand_sequence(to_real(parts[0]), to_real(parts[1]), to_real(parts[2]));
  throw std::invalid_argument("demands: expected 'value' or 'start:step:stop'");
}

int run_solve(const igsolve::Scenario<Scalar>& scn, const std::string& mode_str, int extension,
              Scalar demand, Scalar budget, Scalar epsilon, bool trace) {
  const igsolve::SignalingMode mode = mode_str == "pgs" ? igsolve::SignalingMode::Proper
                                                        : igsolve::SignalingMode::Improper;
  const igsolve::SignalingConfig<Scalar> config =
      igsolve::uniform_config(scn, mode, extension, demand, budget);
  igsolve::SolverOptions<Scalar> options;
  options.epsilon = epsilon;
  const igsolve::SolveResult<Scalar> res = igsolve::minimize_sum_power(scn, config, options);

  if (trace)
    for (std::size_t t = 0; t < res.power_trace.size(); ++t)
      std::cerr << "round " << (t + 1) << ": power "
                << igsolve::detail::short_real(static_cast<double>(res.power_trace[t])) << '\n';

  std::cout << "status: " << igsolve::status_label(res.status) << '\n';
  if (!res.diagnostic.empty()) std::cout << "note: " << res.diagnostic << '\n';
  std::cout << "outer rounds: " << res.outer_iterations
            << " (retries: " << res.retries_used << ")\n";
  if (res.status == igsolve::SolveStatus::Infeasible) return 0;

  const igsolve::CertificationReport<Scalar> rep = igsolve::certify(scn, config, res.q);
  std::cout << "sum power: " << igsolve::detail::short_real(igsolve::sum_power(res.q)) << '\n';
  std::cout << "per-user results (cell,user): rate / margin / power / rank / defect\n";
  for (int k = 0; k < scn.cells; ++k)
    for (int i = 0; i < scn.users_per_cell[static_cast<std::size_t>(k)]; ++i) {
      const auto ku = static_cast<std::size_t>(k);
      const auto iu = static_cast<std::size_t>(i);
      std::cout << "  (" << (k + 1) << ',' << (i + 1) << ")  "
                << igsolve::detail::short_real(res.rates.r[ku][iu]) << " / "
                << igsolve::detail::short_real(rep.margins[ku][iu]) << " / "
                << igsolve::detail::short_real(res.q.q[ku][iu].trace() /
                                               static_cast<Scalar>(config.extension))
                << " / " << rep.ranks[ku][iu] << " / "
                << igsolve::detail::short_real(rep.defects[ku][iu]) << '\n';
    }
  std::cout << "certification: " << (rep.passed ? "pass" : "FAIL") << " (min margin "
            << igsolve::detail::short_real(rep.min_margin) << ")\n";
  return 0;
}

int run_sweep_cmd(const igsolve::Scenario<Scalar>& scn, const std::string& label,
                  const std::string& modes_str, const std::string& demands_str, Scalar budget,
                  Scalar epsilon, const std::string& out_path, bool trace) {
  igsolve::SweepSpec<Scalar> spec;
  spec.scenario_label = label;
  spec.scenario = scn;
  spec.modes = igsolve::parse_modes(modes_str);
  spec.demands = parse_demand_spec(demands_str);
  spec.budget = budget;
  spec.options.epsilon = epsilon;

  const auto rows = igsolve::run_sweep(spec, trace ? &std::cerr : nullptr);
  if (out_path.empty() || out_path == "-") {
    igsolve::emit_table(rows, std::cout);
  } else {
    std::ofstream file(out_path);
    if (!file) throw std::runtime_error("cannot open output file '" + out_path + "'");
    igsolve::emit_table(rows, file);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Minimum sum-power transmit covariances for multi-cell uplinks under "
      "per-user rate demands"};
  app.require_subcommand(1);

  std::string scenario_ref;
  int antennas = 0;
  std::string mode_str = "igs";
  int extension = 1;
  double demand = 0;
  double budget = 100;
  double epsilon = 1e-5;
  bool trace = false;
  std::string modes_str = "igs:1";
  std::string demands_str;
  std::string out_path;

  CLI::App* solve = app.add_subcommand("solve", "Solve a single demand point");
  solve->add_option("--scenario", scenario_ref, "Scenario file, or builtin:mi / builtin:si")
      ->required();
  solve->add_option("--antennas", antennas,
                    "Receive antennas per cell (0 keeps the stored count)");
  solve->add_option("--mode", mode_str, "igs (general real covariances) or pgs (circular)")
      ->check(CLI::IsMember({"igs", "pgs"}));
  solve->add_option("--extension", extension, "Symbol-extension length N")
      ->check(CLI::PositiveNumber);
  solve->add_option("--demand", demand, "Per-user rate demand, bits per channel use")
      ->required();
  solve->add_option("--budget", budget, "Per-user transmit power budget");
  solve->add_option("--epsilon", epsilon, "Outer-loop convergence threshold on sum power");
  solve->add_flag("--trace", trace, "Print per-round sum powers to stderr");

  CLI::App* sweep = app.add_subcommand("sweep", "Sweep demands across modes, emit CSV");
  sweep->add_option("--scenario", scenario_ref, "Scenario file, or builtin:mi / builtin:si")
      ->required();
  sweep->add_option("--antennas", antennas,
                    "Receive antennas per cell (0 keeps the stored count)");
  sweep->add_option("--modes", modes_str, "Comma list of mode:extension, e.g. pgs:1,igs:1,igs:2");
  sweep->add_option("--demands", demands_str, "Demand grid 'start:step:stop' or single value")
      ->required();
  sweep->add_option("--budget", budget, "Per-user transmit power budget");
  sweep->add_option("--epsilon", epsilon, "Outer-loop convergence threshold on sum power");
  sweep->add_option("--out", out_path, "CSV output path (default: stdout)");
  sweep->add_flag("--trace", trace, "Print per-round sum powers to stderr");

  CLI11_PARSE(app, argc, argv);

  try {
    const igsolve::Scenario<Scalar> scn = igsolve::resolve_scenario<Scalar>(scenario_ref, antennas);
    igsolve::validate_scenario(scn);
    if (solve->parsed())
      return run_solve(scn, mode_str, extension, demand, budget, epsilon, trace);
    return run_sweep_cmd(scn, scenario_label_from_ref(scenario_ref), modes_str, demands_str,
                         budget, epsilon, out_path, trace);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
