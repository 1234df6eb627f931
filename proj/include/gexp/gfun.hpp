#ifndef GEXP_GFUN_HPP
#define GEXP_GFUN_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace gexp {

// Symmetric d x d matrix, 1 <= d <= 3.
template <typename Scalar>
using SymMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;

template <typename Derived>
bool is_exactly_symmetric(const Eigen::MatrixBase<Derived>& m)
{
    if (m.rows() != m.cols())
        return false;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = i + 1; j < m.cols(); ++j)
            if (m(i, j) != m(j, i))
                return false;
    return true;
}

// Smallest eigenvalue of a symmetric matrix (d <= 3).
template <typename Scalar>
Scalar min_eigenvalue(const SymMat<Scalar>& m)
{
    Eigen::SelfAdjointEigenSolver<SymMat<Scalar>> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

// The matrix interval [lower, upper] constraining d<B>/dt.
template <typename Scalar>
class VolBand {
public:
    VolBand(SymMat<Scalar> lower, SymMat<Scalar> upper)
        : lower_(std::move(lower))
        , upper_(std::move(upper))
    {
        const auto d = lower_.rows();
        if (d < 1 || d > 3)
            throw std::invalid_argument("VolBand: dimension must be in 1..3");
        if (upper_.rows() != d || lower_.cols() != d || upper_.cols() != d)
            throw std::invalid_argument("VolBand: dimension mismatch");
        if (!is_exactly_symmetric(lower_) || !is_exactly_symmetric(upper_))
            throw std::invalid_argument("VolBand: bounds must be symmetric");
        const Scalar tol = Scalar(64) * std::numeric_limits<Scalar>::epsilon()
                           * std::max<Scalar>(Scalar(1), upper_.cwiseAbs().maxCoeff());
        if (min_eigenvalue<Scalar>(lower_) < -tol)
            throw std::invalid_argument("VolBand: lower bound must be positive semidefinite");
        if (min_eigenvalue<Scalar>(SymMat<Scalar>(upper_ - lower_)) < -tol)
            throw std::invalid_argument("VolBand: lower bound must not exceed upper bound");
        if (min_eigenvalue<Scalar>(upper_) <= Scalar(0))
            throw std::invalid_argument("VolBand: upper bound must be positive definite");
        isotropic_ = is_scalar_multiple(lower_) && is_scalar_multiple(upper_);
    }

    static VolBand scalar(Scalar lower, Scalar upper)
    {
        SymMat<Scalar> lo(1, 1), up(1, 1);
        lo(0, 0) = lower;
        up(0, 0) = upper;
        return VolBand(lo, up);
    }

    static VolBand isotropic(int d, Scalar lower, Scalar upper)
    {
        SymMat<Scalar> lo = SymMat<Scalar>::Identity(d, d) * lower;
        SymMat<Scalar> up = SymMat<Scalar>::Identity(d, d) * upper;
        return VolBand(lo, up);
    }

    int dim() const { return static_cast<int>(lower_.rows()); }
    bool is_isotropic() const { return isotropic_; }
    const SymMat<Scalar>& lower() const { return lower_; }
    const SymMat<Scalar>& upper() const { return upper_; }

    // d = 1 accessors.
    Scalar lo() const { return lower_(0, 0); }
    Scalar hi() const { return upper_(0, 0); }

private:
    static bool is_scalar_multiple(const SymMat<Scalar>& m)
    {
        const Scalar c = m(0, 0);
        return m == SymMat<Scalar>(SymMat<Scalar>::Identity(m.rows(), m.cols()) * c);
    }

    SymMat<Scalar> lower_;
    SymMat<Scalar> upper_;
    bool isotropic_ = false;
};

using Band = VolBand<double>;

// Scalar nonlinearity for d = 1: 1/2 (upper g^+ - lower g^-).
template <typename Scalar>
inline Scalar g_scalar(Scalar gamma, Scalar lower, Scalar upper)
{
    return gamma >= Scalar(0) ? Scalar(0.5) * upper * gamma : Scalar(0.5) * lower * gamma;
}

/// G(gamma) = 1/2 sup { tr(gamma a) : lower <= a <= upper }.
///
/// Every a in the interval is lower + D^{1/2} P D^{1/2} with D = upper - lower and
/// 0 <= P <= I, so the supremum is attained with P the projector onto the
/// nonnegative eigenspace of D^{1/2} gamma D^{1/2}. This gives an exact
/// eigenvalue formula for every band, isotropic or not.
template <typename Derived, typename Scalar>
Scalar eval_G(const Eigen::MatrixBase<Derived>& gamma, const VolBand<Scalar>& band)
{
    if (gamma.rows() != band.dim() || gamma.cols() != band.dim())
        throw std::invalid_argument("eval_G: gamma dimension does not match band");
    if (!is_exactly_symmetric(gamma))
        throw std::invalid_argument("eval_G: gamma must be symmetric");

    if (band.dim() == 1)
        return g_scalar<Scalar>(gamma(0, 0), band.lo(), band.hi());

    const SymMat<Scalar> g = gamma;
    if (band.is_isotropic()) {
        Eigen::SelfAdjointEigenSolver<SymMat<Scalar>> es(g, Eigen::EigenvaluesOnly);
        const Scalar lo = band.lower()(0, 0);
        const Scalar hi = band.upper()(0, 0);
        Scalar pos = 0, neg = 0;
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
            const Scalar lam = es.eigenvalues()(i);
            if (lam > 0)
                pos += lam;
            else
                neg -= lam;
        }
        return Scalar(0.5) * (hi * pos - lo * neg);
    }

    const SymMat<Scalar> spread = band.upper() - band.lower();
    Eigen::SelfAdjointEigenSolver<SymMat<Scalar>> ds(spread);
    const auto root_vals = ds.eigenvalues().cwiseMax(Scalar(0)).cwiseSqrt();
    const SymMat<Scalar> root = ds.eigenvectors() * root_vals.asDiagonal() * ds.eigenvectors().transpose();
    SymMat<Scalar> scaled = root * g * root;
    scaled = Scalar(0.5) * (scaled + scaled.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<SymMat<Scalar>> es(scaled, Eigen::EigenvaluesOnly);
    const Scalar pos = es.eigenvalues().cwiseMax(Scalar(0)).sum();
    return Scalar(0.5) * ((g * band.lower()).trace() + pos);
}

template <typename Scalar>
Scalar eval_G(Scalar gamma, const VolBand<Scalar>& band)
{
    if (band.dim() != 1)
        throw std::invalid_argument("eval_G: scalar gamma requires a one-dimensional band");
    return g_scalar<Scalar>(gamma, band.lo(), band.hi());
}

// Mollified nonlinearity for a scalar band.
//
// G_eps(g) = int Gbar_eps(g + eps * y) eta(y) dy over y in [-1, 1], where Gbar_eps
// is the nonlinearity of the lifted band [max(lower, eps), upper] and eta is the
// normalized bump exp(-1 / (1 - y^2)). The integral uses a fixed composite
// Simpson rule; the weights are renormalized so constants integrate exactly.
class SmoothG {
public:
    SmoothG(const Band& band, double epsilon, int quadrature_nodes = 129);

    double operator()(double gamma) const;
    // Nonlinearity of the lifted band, without smoothing.
    double unsmoothed(double gamma) const { return g_scalar(gamma, lower_eps_, upper_); }

    double epsilon() const { return epsilon_; }
    double lower_eps() const { return lower_eps_; }
    double upper() const { return upper_; }
    const Band& base() const { return base_; }
    int quadrature_nodes() const { return static_cast<int>(nodes_.size()); }

    // Gap G_eps - Gbar_eps at gamma = 0 divided by eps. Gbar_eps is affine on
    // every window not containing 0, so this is the largest gap over eps.
    double cstar() const { return cstar_; }

private:
    Band base_;
    double epsilon_;
    double lower_eps_;
    double upper_;
    std::vector<double> nodes_;
    std::vector<double> weights_;
    double cstar_ = 0.0;
};

SmoothG mollify(const Band& band, double epsilon, int quadrature_nodes = 129);

// L_eps(a) = sup_gamma { a gamma / 2 - G_eps(gamma) } over [-truncation, truncation].
// Returns +infinity when a lies outside the lifted band.
double legendre(const SmoothG& g, double a, double gamma_truncation, int gamma_nodes = 2001);
double legendre(const SmoothG& g, double a);

inline double default_legendre_truncation(double a) { return 100.0 * (1.0 + std::abs(a)); }

// Largest G_eps - Gbar_eps over the grid.
double sandwich_check(const SmoothG& g, const std::vector<double>& gamma_grid);

} // namespace gexp

#endif // GEXP_GFUN_HPP
