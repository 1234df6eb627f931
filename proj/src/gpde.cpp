#include "gexp/gpde.hpp"
#include "gexp/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace gexp {

void SpaceTimeGrid::validate() const
{
    if (n_x < 3 || n_x % 2 == 0)
        throw std::invalid_argument("SpaceTimeGrid: n_x must be odd and >= 3 so that x = 0 is a node");
    if (!(x_max > 0.0) || !std::isfinite(x_max))
        throw std::invalid_argument("SpaceTimeGrid: x_max must be positive");
    if (store_per_unit < 1)
        throw std::invalid_argument("SpaceTimeGrid: store_per_unit must be >= 1");
    if (!(cfl > 0.0))
        throw std::invalid_argument("SpaceTimeGrid: cfl must be positive");
}

IntervalSolution solve_interval(const Eigen::ArrayXd& terminal, const Band& band, const SpaceTimeGrid& grid,
                                double s, double t)
{
    grid.validate();
    if (band.dim() != 1)
        throw std::invalid_argument("solve_interval: only one-dimensional bands are supported");
    if (!(s < t))
        throw std::invalid_argument("solve_interval: empty interval");
    if (terminal.size() != grid.n_x)
        throw std::invalid_argument("solve_interval: terminal data does not match the grid");
    if (!terminal.allFinite())
        throw NumericalError("solve_interval: terminal data is not finite");
    if (grid.cfl > 1.0)
        throw NumericalError("solve_interval: CFL violation, dt must not exceed dx^2 / upper");

    const double len = t - s;
    const int stored = std::max(1, static_cast<int>(std::lround(len * grid.store_per_unit)));
    const double dt_max = grid.cfl * grid.dt_limit(band);
    const int sub = std::max(1, static_cast<int>(std::ceil(len / stored / dt_max - 1e-12)));
    const double dt = len / (static_cast<double>(stored) * sub);

    const int n = grid.n_x;
    const double inv_dx2 = 1.0 / (grid.dx() * grid.dx());
    const double lo = band.lo();
    const double hi = band.hi();

    IntervalSolution out;
    out.t_begin = s;
    out.t_end = t;
    out.fine_steps = stored * sub;
    out.values.resize(n, stored + 1);
    out.values.col(stored) = terminal;

    std::vector<double> cur(terminal.data(), terminal.data() + n);
    std::vector<double> nxt(n);
    for (int block = stored - 1; block >= 0; --block) {
        for (int k = 0; k < sub; ++k) {
            nxt[0] = cur[0];
            nxt[n - 1] = cur[n - 1];
            for (int j = 1; j < n - 1; ++j) {
                const double gamma = (cur[j + 1] - 2.0 * cur[j] + cur[j - 1]) * inv_dx2;
                nxt[j] = cur[j] + dt * g_scalar(gamma, lo, hi);
            }
            cur.swap(nxt);
        }
        out.values.col(block) = Eigen::Map<const Eigen::ArrayXd>(cur.data(), n);
    }
    return out;
}

// ---------------------------------------------------------------------------

ValueField::ValueField(std::vector<double> times, SpaceTimeGrid grid, Band band, std::vector<Interval> intervals)
    : times_(std::move(times))
    , grid_(grid)
    , band_(std::move(band))
    , intervals_(std::move(intervals))
{
    grid_.validate();
    if (times_.empty() || intervals_.size() != times_.size())
        throw std::invalid_argument("ValueField: one interval per monitoring time required");
    std::size_t expected = 1;
    for (std::size_t k = 0; k < intervals_.size(); ++k) {
        const auto& iv = intervals_[k];
        if (iv.param_dims != static_cast<int>(k) || iv.slabs.size() != expected)
            throw std::invalid_argument("ValueField: interval parameter layout mismatch");
        for (const auto& slab : iv.slabs)
            if (slab.values.rows() != grid_.n_x || slab.values.cols() < 2)
                throw std::invalid_argument("ValueField: slab shape mismatch");
        expected *= static_cast<std::size_t>(grid_.n_x);
    }
}

int ValueField::interval_index(double t) const
{
    for (int k = 0; k + 1 < n_intervals(); ++k)
        if (t < times_[k])
            return k;
    return n_intervals() - 1;
}

namespace {

struct Cell {
    int index = 0;
    double weight = 0.0; // weight on index + 1
    bool clamped = false;
};

Cell locate(double x, const SpaceTimeGrid& grid)
{
    Cell c;
    double xc = x;
    if (x < -grid.x_max || x > grid.x_max) {
        c.clamped = true;
        xc = std::clamp(x, -grid.x_max, grid.x_max);
    }
    const double pos = (xc + grid.x_max) / grid.dx();
    c.index = std::clamp(static_cast<int>(std::floor(pos)), 0, grid.n_x - 2);
    c.weight = std::clamp(pos - c.index, 0.0, 1.0);
    return c;
}

struct NodeValues {
    double v, g, h;
};

NodeValues node_at(const Eigen::ArrayXXd& u, int j, int s, double dx)
{
    const int n = static_cast<int>(u.rows());
    NodeValues out{u(j, s), 0.0, 0.0};
    if (j == 0) {
        out.g = (u(1, s) - u(0, s)) / dx;
    } else if (j == n - 1) {
        out.g = (u(n - 1, s) - u(n - 2, s)) / dx;
    } else {
        out.g = (u(j + 1, s) - u(j - 1, s)) / (2.0 * dx);
        out.h = (u(j + 1, s) - 2.0 * u(j, s) + u(j - 1, s)) / (dx * dx);
    }
    return out;
}

} // namespace

ValueField::Sample ValueField::sample(double t, std::span<const double> history, double x) const
{
    const int k = interval_index(t);
    const Interval& iv = intervals_[k];
    if (history.size() < static_cast<std::size_t>(iv.param_dims))
        throw std::invalid_argument("ValueField::sample: path history too short for t");

    Sample out;
    std::array<Cell, 3> params{};
    for (int d = 0; d < iv.param_dims; ++d) {
        params[d] = locate(history[d], grid_);
        out.clamped = out.clamped || params[d].clamped;
    }
    const Cell cx = locate(x, grid_);
    out.clamped = out.clamped || cx.clamped;

    const int slices = iv.slabs.front().slices();
    const double tau = std::clamp((t - iv.t_begin) / (iv.t_end - iv.t_begin), 0.0, 1.0) * (slices - 1);
    const int s0 = std::clamp(static_cast<int>(std::floor(tau)), 0, slices - 2);
    const double ws = std::clamp(tau - s0, 0.0, 1.0);
    const double dx = grid_.dx();

    const int corners = 1 << iv.param_dims;
    for (int c = 0; c < corners; ++c) {
        std::size_t flat = 0;
        double w = 1.0;
        for (int d = 0; d < iv.param_dims; ++d) {
            const bool upper = (c >> (iv.param_dims - 1 - d)) & 1;
            flat = flat * static_cast<std::size_t>(grid_.n_x) + static_cast<std::size_t>(params[d].index + upper);
            w *= upper ? params[d].weight : 1.0 - params[d].weight;
        }
        if (w == 0.0)
            continue;
        const Eigen::ArrayXXd& u = iv.slabs[flat].values;
        const NodeValues a = node_at(u, cx.index, s0, dx);
        const NodeValues b = node_at(u, cx.index + 1, s0, dx);
        const NodeValues c2 = node_at(u, cx.index, s0 + 1, dx);
        const NodeValues d2 = node_at(u, cx.index + 1, s0 + 1, dx);
        const double wx = cx.weight;
        auto blend = [&](double va, double vb, double vc, double vd) {
            return (1.0 - ws) * ((1.0 - wx) * va + wx * vb) + ws * ((1.0 - wx) * vc + wx * vd);
        };
        out.value += w * blend(a.v, b.v, c2.v, d2.v);
        out.gradient += w * blend(a.g, b.g, c2.g, d2.g);
        out.hessian += w * blend(a.h, b.h, c2.h, d2.h);
    }
    return out;
}

double ValueField::at_origin() const
{
    return intervals_.front().slabs.front().values(grid_.center(), 0);
}

// ---------------------------------------------------------------------------

ValueField conditional_expectation(const PayoffSpec& payoff, const Band& band, const SpaceTimeGrid& grid, int threads)
{
    grid.validate();
    if (band.dim() != 1)
        throw std::invalid_argument("conditional_expectation: only one-dimensional bands are supported");
    const int n = payoff.n_times();
    if (n > 3)
        throw std::invalid_argument("conditional_expectation: at most 3 monitoring times are supported");
    if (grid.cfl > 1.0)
        throw NumericalError("conditional_expectation: CFL violation, dt must not exceed dx^2 / upper");

    const int nx = grid.n_x;
    std::vector<ValueField::Interval> intervals(n);
    for (int k = n - 1; k >= 0; --k) {
        ValueField::Interval& iv = intervals[k];
        iv.t_begin = k == 0 ? 0.0 : payoff.times()[k - 1];
        iv.t_end = payoff.times()[k];
        iv.param_dims = k;
        std::size_t count = 1;
        for (int d = 0; d < k; ++d)
            count *= static_cast<std::size_t>(nx);
        iv.slabs.resize(count);

        parallel_for(count, threads, [&](std::size_t p) {
            Eigen::ArrayXd terminal(nx);
            if (k == n - 1) {
                std::array<double, 3> coords{};
                std::size_t rem = p;
                for (int d = k - 1; d >= 0; --d) {
                    coords[d] = grid.x(static_cast<int>(rem % nx));
                    rem /= nx;
                }
                for (int j = 0; j < nx; ++j) {
                    coords[k] = grid.x(j);
                    terminal(j) = payoff(std::span<const double>(coords.data(), static_cast<std::size_t>(k + 1)));
                }
            } else {
                const auto& next = intervals[k + 1].slabs;
                for (int j = 0; j < nx; ++j)
                    terminal(j) = next[p * nx + j].values(j, 0);
            }
            iv.slabs[p] = solve_interval(terminal, band, grid, iv.t_begin, iv.t_end);
        });
    }
    return ValueField(payoff.times(), grid, band, std::move(intervals));
}

double g_expectation(const PayoffSpec& payoff, const Band& band, const SpaceTimeGrid& grid, int threads)
{
    return conditional_expectation(payoff, band, grid, threads).at_origin();
}

void node_derivatives(const Eigen::ArrayXXd& values, double dx, Eigen::ArrayXXd& gradient, Eigen::ArrayXXd& hessian)
{
    const int n = static_cast<int>(values.rows());
    gradient.resize(values.rows(), values.cols());
    hessian.resize(values.rows(), values.cols());
    for (Eigen::Index s = 0; s < values.cols(); ++s) {
        for (int j = 0; j < n; ++j) {
            const NodeValues nv = node_at(values, j, static_cast<int>(s), dx);
            gradient(j, s) = nv.g;
            hessian(j, s) = nv.h;
        }
    }
}

FieldDerivatives derivatives(const ValueField& field)
{
    FieldDerivatives out;
    const double dx = field.grid().dx();
    for (int k = 0; k < field.n_intervals(); ++k) {
        const auto& iv = field.interval(k);
        auto& gs = out.gradient.emplace_back(iv.slabs.size());
        auto& hs = out.hessian.emplace_back(iv.slabs.size());
        for (std::size_t p = 0; p < iv.slabs.size(); ++p)
            node_derivatives(iv.slabs[p].values, dx, gs[p], hs[p]);
    }
    return out;
}

bool ConvergenceTable::monotone() const
{
    int sign = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double d = rows[i].difference;
        if (d == 0.0)
            continue;
        const int s = d > 0 ? 1 : -1;
        if (sign != 0 && s != sign)
            return false;
        sign = s;
    }
    return true;
}

ConvergenceTable refine_study(const PayoffSpec& payoff, const Band& band, const std::vector<SpaceTimeGrid>& grids,
                              int threads)
{
    if (grids.size() < 3)
        throw std::invalid_argument("refine_study: at least three grids required");
    ConvergenceTable table;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < grids.size(); ++i) {
        ConvergenceRow row;
        row.n_x = grids[i].n_x;
        row.dx = grids[i].dx();
        row.value = g_expectation(payoff, band, grids[i], threads);
        row.difference = i == 0 ? nan : row.value - table.rows.back().value;
        row.order = nan;
        if (i >= 2) {
            const double prev = std::abs(table.rows.back().difference);
            const double cur = std::abs(row.difference);
            if (prev > 0.0 && cur > 0.0)
                row.order = std::log2(prev / cur);
        }
        table.rows.push_back(row);
    }
    return table;
}

std::vector<SpaceTimeGrid> halving_grids(const SpaceTimeGrid& finest, int levels)
{
    std::vector<SpaceTimeGrid> out(levels, finest);
    for (int i = levels - 2; i >= 0; --i) {
        if ((out[i + 1].n_x - 1) % 2 != 0 || (out[i + 1].n_x - 1) / 2 % 2 != 0)
            throw std::invalid_argument("halving_grids: n_x - 1 must be divisible by 2^levels");
        out[i].n_x = (out[i + 1].n_x - 1) / 2 + 1;
    }
    return out;
}

} // namespace gexp
