#ifndef GEXP_CONFIG_HPP
#define GEXP_CONFIG_HPP

#include "gexp/gpde.hpp"
#include "gexp/qsmc.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gexp {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Run configuration. Text form is sectioned key = value:
//
//   [band]    lower, upper
//   [payoff]  expr, times, lipschitz, sup_bound
//   [grid]    n_x, x_max, cfl, store_per_unit
//   [mc]      paths, steps, seed, threads
//   [family]  constants, random_piecewise, pieces, floor, file
//   [output]  dir, csv_paths
struct RunConfig {
    double band_lower = 1.0;
    double band_upper = 2.0;

    std::string payoff_expr = "sq(x1)";
    std::vector<double> payoff_times{1.0};
    std::optional<double> lipschitz;
    std::optional<double> sup_bound;

    SpaceTimeGrid grid;
    SimConfig sim;

    int family_constants = 9;
    int family_random_piecewise = 0;
    int family_pieces = 4;
    double family_floor = kDefaultFloor;
    std::string family_file;

    std::string output_dir = "out";
    int csv_paths = 16;

    bool operator==(const RunConfig&) const = default;

    Band band() const;
    PayoffSpec payoff() const;
    // Constant grid, then random piecewise controls, then the controls in family_file.
    ControlFamily family() const;

    // Re-validates every numeric constraint; throws ConfigError.
    void validate() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
std::string emit_config(const RunConfig& config);

// Hash of the canonical text without the output location and thread count,
// neither of which changes any result.
std::string config_fingerprint(const RunConfig& config);

} // namespace gexp

#endif // GEXP_CONFIG_HPP
