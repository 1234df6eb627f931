#ifndef GEXP_REPRESENT_HPP
#define GEXP_REPRESENT_HPP

#include "gexp/gpde.hpp"
#include "gexp/qsmc.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace gexp {

// Sampled (Y, H, K) along simulated paths, each (M+1) x N with column = path.
//   Y_t = u(t, history, X_t), H_t = du/dx, K accumulated from
//   (G(D2u) - alpha_t D2u / 2) dt at left endpoints.
struct Decomposition {
    std::string label;
    int n_steps = 0;
    Eigen::MatrixXd y;
    Eigen::MatrixXd h;
    Eigen::MatrixXd k;
    Eigen::MatrixXd int_hdx;
    Eigen::VectorXd xi;          // payoff on each path
    std::vector<bool> excluded;  // path left [-x_max, x_max]
    int n_excluded = 0;

    int n_paths() const { return static_cast<int>(y.cols()); }
    double time(int step) const { return static_cast<double>(step) / n_steps; }
    double exclusion_rate() const { return n_paths() ? static_cast<double>(n_excluded) / n_paths() : 0.0; }
};

// Fills one path of a decomposition. y, h, k, ihdx have length M + 1; alpha has M entries.
// Returns false when the path leaves the truncation region.
bool trace_path(const ValueField& field, std::span<const double> alpha,
                std::span<const double> x, const std::vector<int>& monitoring, std::span<double> y,
                std::span<double> h, std::span<double> k, std::span<double> ihdx);

Decomposition extract(const PayoffSpec& payoff, const Band& band, const ValueField& field, const PathBundle& bundle,
                      std::string label = {});

struct ResidualSummary {
    std::vector<double> per_path; // sup_t |Y_t - Y_0 - int H dX + K_t|, NaN for excluded paths
    double rms = 0.0;
    double max = 0.0;
};

ResidualSummary residual(const Decomposition& dec);

// Most negative increment of K over included paths.
double monotonicity(const Decomposition& dec);

struct GapResult {
    std::vector<ControlEstimate> per_control; // E^P[-K_1]
    double sup = 0.0;
    double se = 0.0;
    std::size_t argmax = 0;
    double min_increment = 0.0;
    double k_abs_max = 0.0;
    double exclusion_rate = 0.0;
};

// sup over the family of E^P[-K_1]; paths are streamed, not stored.
GapResult gmartingale_gap(const PayoffSpec& payoff, const Band& band, const ValueField& field,
                          const ControlFamily& family, const SimConfig& sim);

struct SymmetryEvidence {
    bool symmetric = false;
    double k_abs_max = 0.0;       // sup over family and paths of |K_t|
    double value = 0.0;           // E^G[xi]
    double negated_value = 0.0;   // E^G[-xi]
    double expectation_sum = 0.0; // E^G[xi] + E^G[-xi]
};

SymmetryEvidence is_symmetric(const PayoffSpec& payoff, const Band& band, const ValueField& field,
                              const ControlFamily& family, const SimConfig& sim, double tol = 1e-8);

// Columns: control, path_id, t, Y, H, K, int_HdX, residual. max_paths < 0 writes every path.
void write_decomposition_csv(const Decomposition& dec, std::ostream& out, int max_paths = -1, bool header = true);

} // namespace gexp

#endif // GEXP_REPRESENT_HPP
