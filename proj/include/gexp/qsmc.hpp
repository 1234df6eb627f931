#ifndef GEXP_QSMC_HPP
#define GEXP_QSMC_HPP

#include "gexp/gfun.hpp"
#include "gexp/gpde.hpp"
#include "gexp/parallel.hpp"
#include "gexp/payoff.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace gexp {

inline constexpr double kDefaultFloor = 1e-6;

// Piecewise-constant volatility control: alpha = values[j] on
// [breakpoints[j], breakpoints[j+1]).
struct ControlProcess {
    std::vector<double> breakpoints{0.0, 1.0};
    std::vector<double> values{1.0};
    double floor = kDefaultFloor;

    static ControlProcess constant(double a, double floor = kDefaultFloor);

    double alpha(double t) const;
    bool is_constant() const;
    void validate(const Band& band) const;
};

struct ControlFamily {
    std::vector<ControlProcess> controls;
    std::vector<std::string> labels;

    // count constant controls evenly spaced over [max(lower, floor), upper].
    static ControlFamily constant_grid(const Band& band, int count, double floor = kDefaultFloor);

    void add(ControlProcess control, std::string label);
    // Piecewise controls with equal pieces and values uniform on the band.
    void add_random_piecewise(const Band& band, int count, int pieces, std::uint64_t seed,
                              double floor = kDefaultFloor);

    std::size_t size() const { return controls.size(); }
    void validate(const Band& band) const;
};

// Flat key-value text, one control per line:
//   control <label> breakpoints=0,0.5,1 values=1,2 floor=1e-06
// Blank lines and lines starting with '#' are ignored.
void write_family(const ControlFamily& family, std::ostream& out);
ControlFamily read_family(std::istream& in);

struct SimConfig {
    int paths = 10000;
    int steps = 64;
    std::uint64_t seed = 1;
    int threads = 0;

    bool operator==(const SimConfig&) const = default;
};

// Independent seed for a named sub-experiment.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

// Per-path engine depending only on (seed, path, stream).
std::mt19937_64 path_engine(std::uint64_t seed, std::uint64_t path, std::uint64_t stream = 0);

// Per-step volatilities of a control on a uniform grid of M steps (left endpoint).
Eigen::ArrayXd step_alphas(const ControlProcess& control, int steps);

// Standard normals driving path p; identical for every control (common random numbers).
void driving_normals(std::uint64_t seed, std::uint64_t path, std::span<double> out);

// Simulated paths of one control. Column p holds path p.
class PathBundle {
public:
    PathBundle(ControlProcess control, std::uint64_t seed, Eigen::MatrixXd increments);

    std::uint64_t seed() const { return seed_; }
    int n_paths() const { return static_cast<int>(increments_.cols()); }
    int n_steps() const { return static_cast<int>(increments_.rows()); }
    double dt() const { return 1.0 / n_steps(); }
    double time(int k) const { return static_cast<double>(k) / n_steps(); }
    const ControlProcess& control() const { return control_; }

    // Brownian increments dW (M x N).
    const Eigen::MatrixXd& increments() const { return increments_; }
    // X^alpha on the grid ((M+1) x N), X_0 = 0.
    const Eigen::MatrixXd& paths() const { return paths_; }
    // alpha on each step; identical across paths for deterministic controls.
    const Eigen::ArrayXd& alpha() const { return alpha_; }
    // Accounted quadratic variation sum alpha_k dt ((M+1) entries).
    const Eigen::ArrayXd& qv() const { return qv_; }

    // Grid index of time t; throws unless t * M is an integer.
    int step_index(double t) const;

private:
    ControlProcess control_;
    std::uint64_t seed_;
    Eigen::MatrixXd increments_;
    Eigen::MatrixXd paths_;
    Eigen::ArrayXd alpha_;
    Eigen::ArrayXd qv_;
};

PathBundle simulate(const ControlProcess& control, int paths, int steps, std::uint64_t seed, int threads = 0);
PathBundle simulate(const ControlProcess& control, const SimConfig& sim);

// Columns: path_id, t, X, qv, alpha (alpha of the step starting at t, empty at t = 1).
void write_bundle_csv(const PathBundle& bundle, std::ostream& out);

struct MeanEstimate {
    double mean = 0.0;
    double se = 0.0;
    std::size_t count = 0;
};

// Mean and standard error, computed around the first sample so that a
// constant sample returns that constant exactly.
MeanEstimate estimate_mean(std::span<const double> samples);

// Grid indices of the monitoring times; throws unless each t_i * M is an integer.
std::vector<int> monitoring_steps(const PayoffSpec& payoff, int steps);

// Streams paths for every control of the family with common random numbers.
// body(control_index, path_index, X) with X of length steps + 1. Paths are
// not stored.
template <typename Body>
void for_each_path(const ControlFamily& family, const SimConfig& sim, Body&& body)
{
    if (sim.paths < 1 || sim.steps < 1)
        throw std::invalid_argument("for_each_path: paths and steps must be >= 1");
    const int m = sim.steps;
    std::vector<Eigen::ArrayXd> vols;
    vols.reserve(family.size());
    for (const auto& c : family.controls)
        vols.push_back(step_alphas(c, m).sqrt());
    const double sqdt = std::sqrt(1.0 / m);

    const std::size_t chunk = 256;
    const std::size_t n_chunks = (static_cast<std::size_t>(sim.paths) + chunk - 1) / chunk;
    parallel_for(n_chunks, sim.threads, [&](std::size_t ci) {
        std::vector<double> z(m);
        std::vector<double> x(m + 1);
        const std::size_t end = std::min<std::size_t>((ci + 1) * chunk, static_cast<std::size_t>(sim.paths));
        for (std::size_t p = ci * chunk; p < end; ++p) {
            driving_normals(sim.seed, p, z);
            for (std::size_t c = 0; c < vols.size(); ++c) {
                x[0] = 0.0;
                for (int k = 0; k < m; ++k)
                    x[k + 1] = x[k] + vols[c](k) * (sqdt * z[k]);
                body(c, p, std::span<const double>(x));
            }
        }
    });
}

struct ControlEstimate {
    std::string label;
    MeanEstimate estimate;
};

struct DualResult {
    double value = 0.0;
    double se = 0.0;
    std::size_t argmax = 0;
    std::string argmax_label;
    std::vector<ControlEstimate> table;
};

// max over the family of the Monte Carlo estimate of E^P[xi]; a statistical
// lower bound of E^G[xi].
DualResult dual_value(const PayoffSpec& payoff, const ControlFamily& family, const SimConfig& sim);

struct PathValues {
    std::vector<double> values;
    std::vector<bool> clamped;
    std::size_t n_clamped = 0;
};

// E^G_t[xi] along each path, read from the solved field. At t = 1 the payoff
// is evaluated directly.
PathValues conditional_supremum(const PayoffSpec& payoff, const ValueField& field, const PathBundle& bundle,
                                 double t);

struct NormEstimate {
    double value = 0.0;
    double se = 0.0;
    std::size_t argmax = 0;
    std::vector<MeanEstimate> per_control; // p-th moments
};

// Supremum over the family of a p-th moment, returned as its p-th root.
NormEstimate family_norm(std::span<const MeanEstimate> moments, double p);

// sup_P E^P[ sup_t (E^G_t|xi|)^p ]^{1/p}; abs_field must be the solved field of |xi|.
// The time supremum runs over the simulation grid.
NormEstimate lp_norm(const PayoffSpec& payoff, double p, const ControlFamily& family, const ValueField& abs_field,
                     const SimConfig& sim);

// E^P[ (int alpha H^2 dt)^{p/2} ] with H sampled at the left endpoints (M or M+1 rows).
MeanEstimate hp_moment(const Eigen::MatrixXd& h, const PathBundle& bundle, double p);
// E^P[ sup_t |Y_t|^p ] with Y on the (M+1)-point grid.
MeanEstimate sp_moment(const Eigen::MatrixXd& y, double p);

NormEstimate hp_norm(std::span<const Eigen::MatrixXd> h, std::span<const PathBundle> bundles, double p);
NormEstimate sp_norm(std::span<const Eigen::MatrixXd> y, double p);

struct QvResidual {
    // sup_t |<X>_t - (X_t^2 - 2 int X dX)| against the accounted alpha dt.
    double max_abs = 0.0;
    // RMS over paths of the per-path supremum above.
    double rms = 0.0;
    // Largest |X_t^2 - 2 int X dX - sum dX^2|: the discrete Ito identity, zero up to rounding.
    double identity_max = 0.0;
};

QvResidual qv_identity_check(const PathBundle& bundle);

} // namespace gexp

#endif // GEXP_QSMC_HPP
