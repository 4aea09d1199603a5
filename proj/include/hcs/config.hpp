#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hcs/discrete_ops.hpp"
#include "hcs/geometry.hpp"

namespace hcs {

struct Tolerances {
    double eigen = 1e-8;
    double linear = 1e-10;
    double pole_guard = 1e-6;  ///< relative to mu^(1)
    bool operator==(const Tolerances&) const = default;
};

struct ValidationSettings {
    int p = 8;                             ///< cell resolution of the eps-problem
    std::array<int, 3> mode{1, 0, 0};      ///< forcing wave vector k = 2 pi mode
    double threshold = 0.1;
    double slack = 0.1;
    int budget = 128;                      ///< K p per axis
    bool spectral = false;                 ///< also run the spectral spot check
    QuasiMomentum theta_star{{kTwoPi / 2, kTwoPi / 2, kTwoPi / 2}};
    bool operator==(const ValidationSettings&) const = default;
};

struct RunConfig {
    GeometryConfig geometry;
    int n = 16;
    int g = 4;
    int m_max = 10;
    double lambda_max = 200.0;
    std::vector<std::array<int, 3>> k_modes{{0, 0, 0}, {1, 0, 0}};
    double period = 1.0;
    std::vector<double> eps_list{0.25, 0.125};
    Tolerances tol;
    /// Single quasi-momentum for bloch, beta and validate; unset: bloch sweeps the grid, the others use 0.
    std::optional<QuasiMomentum> theta;
    int beta_samples = 200;
    ValidationSettings validation;
    std::string output = "out";
    int threads = 1;
    std::uint64_t seed = 20240917;
    bool operator==(const RunConfig&) const = default;
};

/// Throws ParseError (with line and column) for malformed text or unknown
/// keys, and ValidationError listing every violated invariant.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::string& path);

/// Every violated invariant; empty when valid.
std::vector<std::string> config_violations(const RunConfig& config);

/// YAML text that parses back to the same RunConfig.
std::string serialize_config(const RunConfig& config);

/// FNV-1a over the canonical geometry section and grid size, as 16 hex digits.
std::string geometry_hash(const RunConfig& config);

/// Cell counts K = 1/eps; throws ValidationError unless 1/eps is an integer.
std::vector<int> cell_counts(const std::vector<double>& eps_list);

/// Parses "a,b,c" where each entry is a number or a multiple of pi such as "pi/2", "3pi/4", "-pi".
std::vector<double> parse_number_list(const std::string& text);

}  // namespace hcs
