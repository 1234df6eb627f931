#ifndef GEXP_GPDE_HPP
#define GEXP_GPDE_HPP

#include "gexp/gfun.hpp"
#include "gexp/payoff.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

namespace gexp {

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Uniform grid on [-x_max, x_max]. The explicit step is cfl * dx^2 / upper,
// and the solver keeps store_per_unit time slices per unit of time.
struct SpaceTimeGrid {
    double x_max = 8.0;
    int n_x = 401;
    double cfl = 0.9;
    int store_per_unit = 128;

    double dx() const { return 2.0 * x_max / (n_x - 1); }
    double x(int j) const { return -x_max + j * dx(); }
    int center() const { return (n_x - 1) / 2; }
    // Largest stable explicit step for the band.
    double dt_limit(const Band& band) const { return dx() * dx() / band.hi(); }
    void validate() const;

    bool operator==(const SpaceTimeGrid&) const = default;
};

// Stored solution of one backward march over [t_begin, t_end].
// values(j, s) is u at x_j and t_begin + s (t_end - t_begin) / (slices - 1).
struct IntervalSolution {
    double t_begin = 0.0;
    double t_end = 1.0;
    int fine_steps = 0;
    Eigen::ArrayXXd values;

    int slices() const { return static_cast<int>(values.cols()); }
    double slice_time(int s) const { return t_begin + s * (t_end - t_begin) / (slices() - 1); }
};

// Explicit monotone backward march u_k = u_{k+1} + dt G(D2 u_{k+1}) from the
// terminal data at time t back to s. The second difference at the two
// boundary nodes is zero.
IntervalSolution solve_interval(const Eigen::ArrayXd& terminal, const Band& band, const SpaceTimeGrid& grid,
                                double s, double t);

// Nested solution v_1, ..., v_n of a cylinder payoff. Interval k (0-based)
// covers [t_k, t_{k+1}) with t_0 = 0 and is parameterized by the k earlier
// observations B_{t_1}, ..., B_{t_k}, each on the spatial grid.
class ValueField {
public:
    struct Interval {
        double t_begin = 0.0;
        double t_end = 1.0;
        int param_dims = 0;
        // One solution per parameter node, x_{t_1} most significant.
        std::vector<IntervalSolution> slabs;
    };

    struct Sample {
        double value = 0.0;
        double gradient = 0.0;
        double hessian = 0.0;
        bool clamped = false;
    };

    ValueField(std::vector<double> times, SpaceTimeGrid grid, Band band, std::vector<Interval> intervals);

    const std::vector<double>& times() const { return times_; }
    const SpaceTimeGrid& grid() const { return grid_; }
    const Band& band() const { return band_; }
    int n_intervals() const { return static_cast<int>(intervals_.size()); }
    const Interval& interval(int k) const { return intervals_.at(k); }
    // Interval containing t (right-open, except t = 1).
    int interval_index(double t) const;

    // E^G_t at the path history (B_{t_1}, ...) and current state x, with
    // linear interpolation in (t, x) and multilinear in the parameters.
    Sample sample(double t, std::span<const double> history, double x) const;
    double value(double t, std::span<const double> history, double x) const
    {
        return sample(t, history, x).value;
    }
    // v_1(0, 0).
    double at_origin() const;

private:
    std::vector<double> times_;
    SpaceTimeGrid grid_;
    Band band_;
    std::vector<Interval> intervals_;
};

// Solves v_n, ..., v_1 backward with node-exact stitching at the monitoring
// dates. Rejects more than three monitoring dates.
ValueField conditional_expectation(const PayoffSpec& payoff, const Band& band, const SpaceTimeGrid& grid,
                                   int threads = 0);

double g_expectation(const PayoffSpec& payoff, const Band& band, const SpaceTimeGrid& grid, int threads = 0);

// Node-level first and second differences of every stored slice.
struct FieldDerivatives {
    // [interval][param node] -> n_x by slices
    std::vector<std::vector<Eigen::ArrayXXd>> gradient;
    std::vector<std::vector<Eigen::ArrayXXd>> hessian;
};

void node_derivatives(const Eigen::ArrayXXd& values, double dx, Eigen::ArrayXXd& gradient, Eigen::ArrayXXd& hessian);
FieldDerivatives derivatives(const ValueField& field);

struct ConvergenceRow {
    int n_x = 0;
    double dx = 0.0;
    double value = 0.0;
    double difference = 0.0; // value - previous value, NaN on the first row
    double order = 0.0;      // log2 of successive difference ratio, NaN when undefined
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
    bool monotone() const;
};

ConvergenceTable refine_study(const PayoffSpec& payoff, const Band& band, const std::vector<SpaceTimeGrid>& grids,
                              int threads = 0);

// Three grids with halving dx ending at the given one.
std::vector<SpaceTimeGrid> halving_grids(const SpaceTimeGrid& finest, int levels = 3);

// Columnar CSV: t, x1.., x, v, dv, d2v. Every stride-th slice is written.
void write_field_csv(const ValueField& field, std::ostream& out, int time_stride = 1);

// Binary dump, little-endian:
//   char[8]  "GEXPVF01"
//   u32      interval count, u32 n_x, u32 store_per_unit
//   f64      x_max, cfl, band lower, band upper
//   f64[n]   monitoring times
//   per interval: f64 t_begin, f64 t_end, u32 param_dims, u32 slices,
//                 then per parameter node: i32 fine_steps, f64[n_x * slices] column-major
void write_field_binary(const ValueField& field, std::ostream& out);
ValueField read_field_binary(std::istream& in);

} // namespace gexp

#endif // GEXP_GPDE_HPP
