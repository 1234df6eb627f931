#ifndef GEXP_VALIDATE_HPP
#define GEXP_VALIDATE_HPP

#include "gexp/gpde.hpp"
#include "gexp/qsmc.hpp"
#include "gexp/represent.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace gexp {

// 64-bit FNV-1a as 16 hex digits.
std::string fnv1a_hex(std::string_view text);

// Hash of everything a Monte Carlo or PDE result depends on.
std::string run_fingerprint(const Band& band, const SpaceTimeGrid& grid, const SimConfig& sim,
                            std::string_view extra = {});

// Outcome of one empirical inequality: pass <=> left <= right + slack.
struct InequalityReport {
    std::string name;
    double left = 0.0;
    double right = 0.0;
    double constant = 0.0;
    double slack = 0.0;
    double margin = 0.0; // right + slack - left
    bool pass = false;
    double se_left = 0.0;
    double se_right = 0.0;
    std::string fingerprint;
    std::string note;

    static InequalityReport make(std::string name, double left, double right, double slack, double constant = 0.0,
                                 double se_left = 0.0, double se_right = 0.0);

    std::string to_json() const;
};

// One line per report.
std::string format_report_table(const std::vector<InequalityReport>& reports);

// Bounded adapted integrand H_t = f(t, X_t).
struct Integrand {
    std::string name;
    std::function<double(double t, double x)> f;

    static Integrand constant(double c);
    static Integrand indicator_before(double s);
    // cos(X_t) (1 - t / 2)
    static Integrand smooth_bounded();
};

// ||H||_H2 <= ||int H dX||_S2 <= 2 ||H||_H2, both norms over the family. The two
// sides use independent sub-seeds. Returns the lower and upper reports.
std::vector<InequalityReport> bdg_check(const Integrand& h, const Band& band, const ControlFamily& family,
                                        const SimConfig& sim);

// Constant in ||H||_H2 + ||K||_S2 <= C ||Y||_S2 obtained by running the
// a-priori argument with weight 1/6: E int H^2 d<B> <= 16 E sup Y^2 and
// E K_1^2 <= 54 E sup Y^2.
inline constexpr double kAprioriKConstant = 54.0;
double apriori_aggregate_constant();

// Per control: E[K_1^2] <= 54 E[sup |Y|^2] (no slack), plus the aggregate bound.
std::vector<InequalityReport> apriori_check(const PayoffSpec& payoff, const Band& band, const ValueField& field,
                                            const ControlFamily& family, const SimConfig& sim);

// Frozen from calibrate_difference_constant: the reference pairs peak near 0.28
// on 201 and 401 point grids, rounded up.
inline constexpr double kDifferenceConstant = 0.5;

struct DifferenceTerms {
    double delta_y = 0.0;  // ||dY||_S2
    double delta_h = 0.0;  // ||dH||_H2
    double delta_k = 0.0;  // ||dK||_S2
    double delta_xi = 0.0; // ||dxi||_L2P
    double xi1 = 0.0;      // ||xi1||_L2P
    double xi2 = 0.0;      // ||xi2||_L2P
    double se_delta_y = 0.0;
    double se_delta_xi = 0.0;
    double bracket() const;
};

DifferenceTerms difference_terms(const PayoffSpec& xi1, const PayoffSpec& xi2, const Band& band,
                                 const SpaceTimeGrid& grid, const ControlFamily& family, const SimConfig& sim);

// ||dY||_S2 <= ||dxi||_L2P and ||dH|| + ||dK|| <= C* bracket.
std::vector<InequalityReport> difference_check(const PayoffSpec& xi1, const PayoffSpec& xi2, const Band& band,
                                               const SpaceTimeGrid& grid, const ControlFamily& family,
                                               const SimConfig& sim, double cstar = kDifferenceConstant);

// Largest (||dH|| + ||dK||) / bracket over the reference pairs.
double calibrate_difference_constant(const Band& band, const SpaceTimeGrid& grid, const ControlFamily& family,
                                     const SimConfig& sim);

struct TowerValues {
    double nested = 0.0;  // E^G[xi] from the nested solve
    double refed = 0.0;   // E^G[E^G_t[xi]] with the conditional re-fed on a refined grid
};

// t must not exceed the first monitoring time; it is inserted when missing.
TowerValues tower_values(const PayoffSpec& payoff, const Band& band, const SpaceTimeGrid& grid, double t,
                         int threads = 0);
InequalityReport tower_check(const PayoffSpec& payoff, const Band& band, const SpaceTimeGrid& grid, double t,
                             double tolerance = 2e-2, int threads = 0);

// sqrt(p / (p - 2)).
double doob_constant(double p);

// ||xi||_L2P <= C_p ||xi||_LpG with ||xi||_LpG^p = sup_P E^P|xi|^p.
InequalityReport doob_check(const PayoffSpec& payoff, double p, const Band& band, const SpaceTimeGrid& grid,
                            const ControlFamily& family, const SimConfig& sim);

// ||xi||_L2P >= sup_P E^P[xi^2]^{1/2}.
InequalityReport lp_consistency_check(const PayoffSpec& payoff, const Band& band, const SpaceTimeGrid& grid,
                                      const ControlFamily& family, const SimConfig& sim);

struct MollifyPoint {
    double epsilon = 0.0;
    double max_gap = 0.0;
    double min_gap = 0.0;
    double ratio = 0.0; // max_gap / epsilon
    double cstar = 0.0;
    double legendre_min = 0.0;
    double legendre_max = 0.0;
};

std::vector<MollifyPoint> mollify_sweep(const Band& band, const std::vector<double>& epsilons,
                                        const std::vector<double>& gamma_grid, int a_nodes = 21);

// Sandwich, ratio stability (< 25% spread) and Legendre bounds.
std::vector<InequalityReport> mollify_check(const Band& band, const std::vector<double>& epsilons);

std::vector<double> uniform_grid(double lo, double hi, double step);

} // namespace gexp

#endif // GEXP_VALIDATE_HPP
