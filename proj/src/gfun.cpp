#include "gexp/gfun.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gexp {

namespace {

double bump(double y)
{
    const double r = 1.0 - y * y;
    return r > 0.0 ? std::exp(-1.0 / r) : 0.0;
}

} // namespace

SmoothG::SmoothG(const Band& band, double epsilon, int quadrature_nodes)
    : base_(band)
    , epsilon_(epsilon)
{
    if (band.dim() != 1)
        throw std::invalid_argument("mollify: only scalar bands are supported");
    if (!(epsilon > 0.0 && epsilon <= 1.0))
        throw std::invalid_argument("mollify: epsilon must lie in (0, 1]");
    if (quadrature_nodes < 3 || quadrature_nodes % 2 == 0)
        throw std::invalid_argument("mollify: Simpson rule needs an odd node count >= 3");

    lower_eps_ = std::max(band.lo(), epsilon);
    upper_ = band.hi();
    if (lower_eps_ > upper_)
        throw std::invalid_argument("mollify: lifted lower bound exceeds upper bound");

    const int n = quadrature_nodes;
    const double h = 2.0 / (n - 1);
    nodes_.resize(n);
    weights_.resize(n);
    double total = 0.0;
    for (int j = 0; j < n; ++j) {
        // Symmetric node placement so that sum w_j y_j == 0 exactly.
        const int k = j - (n - 1) / 2;
        nodes_[j] = k * h;
        const double simpson = (j == 0 || j == n - 1) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
        weights_[j] = simpson * bump(nodes_[j]);
        total += weights_[j];
    }
    for (double& w : weights_)
        w /= total;

    double first_moment = 0.0;
    for (int j = 0; j < n; ++j)
        if (nodes_[j] > 0.0)
            first_moment += weights_[j] * nodes_[j];
    cstar_ = 0.5 * (upper_ - lower_eps_) * first_moment;
}

double SmoothG::operator()(double gamma) const
{
    double acc = 0.0;
    for (std::size_t j = 0; j < nodes_.size(); ++j)
        acc += weights_[j] * unsmoothed(gamma + epsilon_ * nodes_[j]);
    return acc;
}

SmoothG mollify(const Band& band, double epsilon, int quadrature_nodes)
{
    return SmoothG(band, epsilon, quadrature_nodes);
}

double legendre(const SmoothG& g, double a, double gamma_truncation, int gamma_nodes)
{
    if (a < g.lower_eps() || a > g.upper())
        return std::numeric_limits<double>::infinity();
    if (!(gamma_truncation > 0.0))
        throw std::invalid_argument("legendre: truncation must be positive");
    if (gamma_nodes < 3)
        throw std::invalid_argument("legendre: need at least 3 gamma nodes");

    auto objective = [&](double gamma) { return 0.5 * a * gamma - g(gamma); };

    const double step = 2.0 * gamma_truncation / (gamma_nodes - 1);
    int best = 0;
    double best_val = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < gamma_nodes; ++j) {
        const double v = objective(-gamma_truncation + j * step);
        if (v > best_val) {
            best_val = v;
            best = j;
        }
    }

    // The objective is concave; refine inside the bracketing cells.
    double lo = -gamma_truncation + std::max(best - 1, 0) * step;
    double hi = -gamma_truncation + std::min(best + 1, gamma_nodes - 1) * step;
    const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - ratio * (hi - lo);
    double x2 = lo + ratio * (hi - lo);
    double f1 = objective(x1);
    double f2 = objective(x2);
    for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + std::abs(lo)); ++it) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = objective(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = objective(x1);
        }
    }
    return std::max({best_val, f1, f2});
}

double legendre(const SmoothG& g, double a)
{
    return legendre(g, a, default_legendre_truncation(a));
}

double sandwich_check(const SmoothG& g, const std::vector<double>& gamma_grid)
{
    if (gamma_grid.empty())
        throw std::invalid_argument("sandwich_check: empty grid");
    double worst = -std::numeric_limits<double>::infinity();
    for (double gamma : gamma_grid)
        worst = std::max(worst, g(gamma) - g.unsmoothed(gamma));
    return worst;
}

} // namespace gexp
