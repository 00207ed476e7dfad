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
// Multi-cell uplink scenarios and the real-valued channel lifting.
//
// A scenario holds one complex channel vector per (receiving cell, user,
// transmitting cell) triple, stored as (magnitude, phase) pairs.  The lifting
// maps a length-M complex vector onto a 2M x 2 real matrix whose per-antenna
// 2x2 blocks are scaled rotations, so that complex multiplication becomes
// real matrix action on stacked (real, imag) coordinates.  Block extension
// replicates that matrix over N signalling slots.

#ifndef IGSOLVE_CHANNEL_HPP
#define IGSOLVE_CHANNEL_HPP

#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "igsolve/types.hpp"

namespace igsolve {

template <typename Scalar>
struct PolarEntry {
  Scalar magnitude = Scalar(0);
  Scalar phase = Scalar(0);

  std::complex<Scalar> value() const {
    return std::polar(magnitude, phase);
  }
};

// Channel key (rx_cell, user, tx_cell), all 0-based.  The user index refers
// to the transmitting user within tx_cell.
using ChannelKey = std::array<int, 3>;

template <typename Scalar>
struct Scenario {
  int cells = 0;                     // number of cells (one base station each)
  std::vector<int> users_per_cell;   // transmitting users in each cell
  int antennas = 0;                  // receive antennas per base station
  Scalar noise_variance = Scalar(1); // complex noise variance per antenna
  std::map<ChannelKey, std::vector<PolarEntry<Scalar>>> channels;

  const std::vector<PolarEntry<Scalar>>& channel(int rx_cell, int user, int tx_cell) const {
    const auto it = channels.find(ChannelKey{rx_cell, user, tx_cell});
    if (it == channels.end()) {
      std::ostringstream msg;
      msg << "scenario: missing channel entry (rx_cell=" << rx_cell + 1
          << ", user=" << user + 1 << ", tx_cell=" << tx_cell + 1 << ")";
      throw std::invalid_argument(msg.str());
    }
    return it->second;
  }

  ComplexVector<Scalar> channel_vector(int rx_cell, int user, int tx_cell) const {
    const auto& entries = channel(rx_cell, user, tx_cell);
    ComplexVector<Scalar> h(static_cast<Eigen::Index>(entries.size()));
    for (std::size_t m = 0; m < entries.size(); ++m) h[static_cast<Eigen::Index>(m)] = entries[m].value();
    return h;
  }

  int total_users() const {
    int n = 0;
    for (int u : users_per_cell) n += u;
    return n;
  }
};

// Validates counts, index ranges, and that exactly one channel vector of
// length `antennas` exists per (rx_cell, user, tx_cell) triple.  Errors name
// the offending field.
template <typename Scalar>
void validate_scenario(const Scenario<Scalar>& s) {
  if (s.cells < 1) throw std::invalid_argument("scenario: 'K' must be >= 1");
  if (static_cast<int>(s.users_per_cell.size()) != s.cells)
    throw std::invalid_argument("scenario: 'users_per_cell' must have exactly K entries");
  for (int u : s.users_per_cell)
    if (u < 0) throw std::invalid_argument("scenario: 'users_per_cell' entries must be >= 0");
  if (s.antennas < 1) throw std::invalid_argument("scenario: 'M' must be >= 1");
  if (!(s.noise_variance > Scalar(0)) || !std::isfinite(static_cast<double>(s.noise_variance)))
    throw std::invalid_argument("scenario: 'noise_variance' must be finite and > 0");

  std::size_t expected = 0;
  for (int k = 0; k < s.cells; ++k) {
    for (int l = 0; l < s.cells; ++l) {
      for (int j = 0; j < s.users_per_cell[static_cast<std::size_t>(l)]; ++j) {
        ++expected;
        const auto& entries = s.channel(k, j, l);  // throws when missing
        if (static_cast<int>(entries.size()) != s.antennas) {
          std::ostringstream msg;
          msg << "scenario: channel entry (rx_cell=" << k + 1 << ", user=" << j + 1
              << ", tx_cell=" << l + 1 << ") has " << entries.size()
              << " antenna entries, expected M=" << s.antennas;
          throw std::invalid_argument(msg.str());
        }
        for (const auto& e : entries) {
          if (!std::isfinite(static_cast<double>(e.magnitude)) || e.magnitude < Scalar(0))
            throw std::invalid_argument("scenario: channel 'mag' must be finite and >= 0");
          if (!std::isfinite(static_cast<double>(e.phase)))
            throw std::invalid_argument("scenario: channel 'phase' must be finite");
        }
      }
    }
  }
  if (s.channels.size() != expected) {
    for (const auto& [key, unused] : s.channels) {
      (void)unused;
      const int k = key[0], j = key[1], l = key[2];
      const bool in_range = k >= 0 && k < s.cells && l >= 0 && l < s.cells && j >= 0 &&
                            j < s.users_per_cell[static_cast<std::size_t>(l)];
      if (!in_range) {
        std::ostringstream msg;
        msg << "scenario: channel entry (rx_cell=" << k + 1 << ", user=" << j + 1
            << ", tx_cell=" << l + 1 << ") is out of range";
        throw std::invalid_argument(msg.str());
      }
    }
  }
}

// Real lifting of one complex channel vector: per antenna, the 2x2 block
// [[Re h, -Im h], [Im h, Re h]] stacked to a 2M x 2 matrix with interleaved
// (real, imag) rows.
template <typename Scalar>
Matrix<Scalar> lift_complex_to_real(const ComplexVector<Scalar>& h) {
  const Eigen::Index m_antennas = h.size();
  if (m_antennas < 1) throw std::invalid_argument("lift_complex_to_real: empty channel vector");
  Matrix<Scalar> g(2 * m_antennas, 2);
  for (Eigen::Index m = 0; m < m_antennas; ++m) {
    const Scalar re = h[m].real();
    const Scalar im = h[m].imag();
    if (!std::isfinite(static_cast<double>(re)) || !std::isfinite(static_cast<double>(im)))
      throw std::invalid_argument("lift_complex_to_real: non-finite channel coefficient");
    g(2 * m, 0) = re;
    g(2 * m, 1) = -im;
    g(2 * m + 1, 0) = im;
    g(2 * m + 1, 1) = re;
  }
  return g;
}

// Block extension over N slots: I_N (Kronecker) G.
template <typename Scalar>
Matrix<Scalar> extend(const Matrix<Scalar>& g, int extension) {
  if (extension < 1) throw std::invalid_argument("extend: extension length must be >= 1");
  if (extension == 1) return g;
  Matrix<Scalar> out = Matrix<Scalar>::Zero(g.rows() * extension, g.cols() * extension);
  for (int n = 0; n < extension; ++n)
    out.block(n * g.rows(), n * g.cols(), g.rows(), g.cols()) = g;
  return out;
}

template <typename Scalar>
struct RealLiftedChannel {
  Matrix<Scalar> base;      // 2M x 2
  Matrix<Scalar> extended;  // 2MN x 2N
};

// All lifted channels of a scenario for a fixed extension length.
template <typename Scalar>
struct LiftedChannels {
  int extension = 1;
  // indexed [rx_cell][tx_cell][user]
  std::vector<std::vector<std::vector<RealLiftedChannel<Scalar>>>> items;

  const Matrix<Scalar>& gbar(int rx_cell, int user, int tx_cell) const {
    return items[static_cast<std::size_t>(rx_cell)][static_cast<std::size_t>(tx_cell)]
                [static_cast<std::size_t>(user)].extended;
  }
  const Matrix<Scalar>& base(int rx_cell, int user, int tx_cell) const {
    return items[static_cast<std::size_t>(rx_cell)][static_cast<std::size_t>(tx_cell)]
                [static_cast<std::size_t>(user)].base;
  }
};

template <typename Scalar>
LiftedChannels<Scalar> lift_scenario(const Scenario<Scalar>& s, int extension) {
  validate_scenario(s);
  if (extension < 1) throw std::invalid_argument("lift_scenario: extension length must be >= 1");
  LiftedChannels<Scalar> out;
  out.extension = extension;
  out.items.resize(static_cast<std::size_t>(s.cells));
  for (int k = 0; k < s.cells; ++k) {
    out.items[static_cast<std::size_t>(k)].resize(static_cast<std::size_t>(s.cells));
    for (int l = 0; l < s.cells; ++l) {
      auto& users = out.items[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)];
      users.resize(static_cast<std::size_t>(s.users_per_cell[static_cast<std::size_t>(l)]));
      for (int j = 0; j < s.users_per_cell[static_cast<std::size_t>(l)]; ++j) {
        auto& item = users[static_cast<std::size_t>(j)];
        item.base = lift_complex_to_real<Scalar>(s.channel_vector(k, j, l));
        item.extended = extend(item.base, extension);
      }
    }
  }
  return out;
}

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw std::invalid_argument(std::string("scenario: missing field '") + key + "'");
  return *it;
}

inline int require_int(const nlohmann::json& j, const char* key) {
  const auto& f = require_field(j, key);
  if (!f.is_number_integer())
    throw std::invalid_argument(std::string("scenario: field '") + key + "' must be an integer");
  return f.template get<int>();
}

}  // namespace detail

template <typename Scalar>
Scenario<Scalar> scenario_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("scenario: top-level JSON value must be an object");
  Scenario<Scalar> s;
  s.cells = detail::require_int(j, "K");
  const auto& upc = detail::require_field(j, "users_per_cell");
  if (!upc.is_array())
    throw std::invalid_argument("scenario: field 'users_per_cell' must be an array");
  for (const auto& u : upc) {
    if (!u.is_number_integer())
      throw std::invalid_argument("scenario: 'users_per_cell' entries must be integers");
    s.users_per_cell.push_back(u.template get<int>());
  }
  s.antennas = detail::require_int(j, "M");
  const auto& nv = detail::require_field(j, "noise_variance");
  if (!nv.is_number())
    throw std::invalid_argument("scenario: field 'noise_variance' must be a number");
  s.noise_variance = static_cast<Scalar>(nv.template get<double>());

  const auto& chans = detail::require_field(j, "channels");
  if (!chans.is_array()) throw std::invalid_argument("scenario: field 'channels' must be an array");
  for (const auto& rec : chans) {
    if (!rec.is_object())
      throw std::invalid_argument("scenario: 'channels' entries must be objects");
    const int rx = detail::require_int(rec, "rx_cell");
    const int user = detail::require_int(rec, "user");
    const int tx = detail::require_int(rec, "tx_cell");
    const auto& entries = detail::require_field(rec, "entries");
    if (!entries.is_array())
      throw std::invalid_argument("scenario: channel field 'entries' must be an array");
    std::vector<PolarEntry<Scalar>> vec;
    for (const auto& e : entries) {
      if (!e.is_object() || !e.contains("mag") || !e.contains("phase") ||
          !e["mag"].is_number() || !e["phase"].is_number())
        throw std::invalid_argument(
            "scenario: channel entries must be objects with numeric 'mag' and 'phase'");
      vec.push_back(PolarEntry<Scalar>{static_cast<Scalar>(e["mag"].template get<double>()),
                                       static_cast<Scalar>(e["phase"].template get<double>())});
    }
    const ChannelKey key{rx - 1, user - 1, tx - 1};
    if (s.channels.count(key)) {
      std::ostringstream msg;
      msg << "scenario: duplicate channel entry (rx_cell=" << rx << ", user=" << user
          << ", tx_cell=" << tx << ")";
      throw std::invalid_argument(msg.str());
    }
    s.channels.emplace(key, std::move(vec));
  }
  validate_scenario(s);
  return s;
}

template <typename Scalar>
nlohmann::json scenario_to_json(const Scenario<Scalar>& s) {
  nlohmann::json j;
  j["K"] = s.cells;
  j["users_per_cell"] = s.users_per_cell;
  j["M"] = s.antennas;
  j["noise_variance"] = static_cast<double>(s.noise_variance);
  auto& chans = j["channels"] = nlohmann::json::array();
  for (const auto& [key, entries] : s.channels) {
    nlohmann::json rec;
    rec["rx_cell"] = key[0] + 1;
    rec["user"] = key[1] + 1;
    rec["tx_cell"] = key[2] + 1;
    auto& arr = rec["entries"] = nlohmann::json::array();
    for (const auto& e : entries)
      arr.push_back({{"mag", static_cast<double>(e.magnitude)},
                     {"phase", static_cast<double>(e.phase)}});
    chans.push_back(std::move(rec));
  }
  return j;
}

template <typename Scalar>
Scenario<Scalar> load_scenario(std::istream& in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("scenario: ") + e.what());
  }
  return scenario_from_json<Scalar>(j);
}

template <typename Scalar>
void save_scenario(const Scenario<Scalar>& s, std::ostream& out) {
  out << scenario_to_json(s).dump(2) << '\n';
}

// Keeps only the first `antennas` entries of every stored channel vector.
template <typename Scalar>
Scenario<Scalar> truncate_antennas(Scenario<Scalar> s, int antennas) {
  if (antennas < 1) throw std::invalid_argument("truncate_antennas: 'M' must be >= 1");
  if (antennas > s.antennas)
    throw std::invalid_argument("truncate_antennas: requested more antennas than the scenario stores");
  for (auto& [key, entries] : s.channels) {
    (void)key;
    entries.resize(static_cast<std::size_t>(antennas));
  }
  s.antennas = antennas;
  return s;
}

namespace detail {

struct BuiltinEntry {
  int rx, user, tx;  // 1-based
  double mag0, phase0, mag1, phase1;
};

// Two-cell, two-users-per-cell reference scenarios.  Direct channels are
// shared; the strong-interference variant only raises the cross-link gains.
inline const std::array<BuiltinEntry, 8>& builtin_moderate_entries() {
  static const std::array<BuiltinEntry, 8> table = {{
      {1, 1, 1, 3.2, -0.72, 2.9, 0.12},
      {1, 2, 1, 2.3, 2.52, 3.0, -1.32},
      {2, 1, 2, 3.4, 2.23, 3.1, 0.32},
      {2, 2, 2, 3.0, -1.13, 2.9, 0.45},
      {1, 1, 2, 1.6, 1.35, 1.45, 1.23},
      {1, 2, 2, 1.15, 0.37, 1.5, 2.11},
      {2, 1, 1, 1.7, 1.68, 1.55, 0.91},
      {2, 2, 1, 1.5, -0.76, 1.45, -2.13},
  }};
  return table;
}

inline const std::array<BuiltinEntry, 4>& builtin_strong_cross_entries() {
  static const std::array<BuiltinEntry, 4> table = {{
      {1, 1, 2, 2.9, 1.35, 2.7, 1.23},
      {1, 2, 2, 2.5, 0.37, 3.1, 2.11},
      {2, 1, 1, 3.2, 1.68, 2.7, 0.91},
      {2, 2, 1, 3.1, -0.76, 2.4, -2.13},
  }};
  return table;
}

}  // namespace detail

// Builtin two-cell scenarios: "mi" (moderate interference) and "si" (strong
// interference).  Channel vectors store two antennas; antennas=1 keeps only
// the first one.
template <typename Scalar>
std::map<std::string, Scenario<Scalar>> builtin_scenarios(int antennas = 2) {
  if (antennas != 1 && antennas != 2)
    throw std::invalid_argument("builtin_scenarios: 'M' must be 1 or 2");
  const auto apply = [](Scenario<Scalar>& s, const detail::BuiltinEntry& e) {
    s.channels[ChannelKey{e.rx - 1, e.user - 1, e.tx - 1}] = {
        PolarEntry<Scalar>{static_cast<Scalar>(e.mag0), static_cast<Scalar>(e.phase0)},
        PolarEntry<Scalar>{static_cast<Scalar>(e.mag1), static_cast<Scalar>(e.phase1)}};
  };

  Scenario<Scalar> mi;
  mi.cells = 2;
  mi.users_per_cell = {2, 2};
  mi.antennas = 2;
  mi.noise_variance = Scalar(1);
  for (const auto& e : detail::builtin_moderate_entries()) apply(mi, e);

  Scenario<Scalar> si = mi;
  for (const auto& e : detail::builtin_strong_cross_entries()) apply(si, e);

  std::map<std::string, Scenario<Scalar>> out;
  out.emplace("mi", antennas == 2 ? mi : truncate_antennas(mi, antennas));
  out.emplace("si", antennas == 2 ? si : truncate_antennas(si, antennas));
  return out;
}

// Resolves a CLI-style scenario reference: "builtin:<name>" or a file path.
// antennas = 0 keeps the stored antenna count.
template <typename Scalar>
Scenario<Scalar> resolve_scenario(const std::string& ref, int antennas = 0) {
  Scenario<Scalar> s;
  if (ref.rfind("builtin:", 0) == 0) {
    const std::string name = ref.substr(8);
    auto all = builtin_scenarios<Scalar>(antennas == 0 ? 2 : antennas);
    const auto it = all.find(name);
    if (it == all.end())
      throw std::invalid_argument("scenario: unknown builtin '" + name + "' (have: mi, si)");
    return it->second;
  }
  std::ifstream file(ref);
  if (!file) throw std::invalid_argument("scenario: cannot open file '" + ref + "'");
  s = load_scenario<Scalar>(file);
  if (antennas != 0 && antennas != s.antennas) s = truncate_antennas(std::move(s), antennas);
  return s;
}

}  // namespace igsolve

#endif  // IGSOLVE_CHANNEL_HPP
