#include "gexp/represent.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace gexp {

bool trace_path(const ValueField& field, std::span<const double> alpha,
                std::span<const double> x, const std::vector<int>& monitoring, std::span<double> y,
                std::span<double> h, std::span<double> k, std::span<double> ihdx)
{
    const int m = static_cast<int>(alpha.size());
    const double dt = 1.0 / m;
    const double lo = field.band().lo();
    const double hi = field.band().hi();
    std::array<double, 3> hist{};
    std::size_t n_hist = 0;
    bool inside = true;

    k[0] = 0.0;
    ihdx[0] = 0.0;
    for (int step = 0; step <= m; ++step) {
        while (n_hist < monitoring.size() && monitoring[n_hist] <= step) {
            hist[n_hist] = x[monitoring[n_hist]];
            ++n_hist;
        }
        const auto s = field.sample(static_cast<double>(step) / m, std::span<const double>(hist.data(), n_hist),
                                    x[step]);
        inside = inside && !s.clamped;
        y[step] = s.value;
        h[step] = s.gradient;
        if (step == m)
            break;
        const double gamma = s.hessian;
        k[step + 1] = k[step] + (g_scalar(gamma, lo, hi) - 0.5 * alpha[step] * gamma) * dt;
        ihdx[step + 1] = ihdx[step] + s.gradient * (x[step + 1] - x[step]);
    }
    return inside;
}

Decomposition extract(const PayoffSpec& payoff, const Band& band, const ValueField& field, const PathBundle& bundle,
                      std::string label)
{
    if (band.lo() != field.band().lo() || band.hi() != field.band().hi())
        throw std::invalid_argument("extract: band does not match the solved field");
    bundle.control().validate(band);
    const int m = bundle.n_steps();
    const int n = bundle.n_paths();
    const auto mon = monitoring_steps(payoff, m);

    Decomposition d;
    d.label = std::move(label);
    d.n_steps = m;
    d.y.resize(m + 1, n);
    d.h.resize(m + 1, n);
    d.k.resize(m + 1, n);
    d.int_hdx.resize(m + 1, n);
    d.xi.resize(n);
    d.excluded.assign(n, false);

    std::span<const double> alpha(bundle.alpha().data(), m);
    for (int p = 0; p < n; ++p) {
        std::span<const double> x(bundle.paths().col(p).data(), m + 1);
        const bool inside = trace_path(field, alpha, x, mon, {d.y.col(p).data(), std::size_t(m + 1)},
                                       {d.h.col(p).data(), std::size_t(m + 1)},
                                       {d.k.col(p).data(), std::size_t(m + 1)},
                                       {d.int_hdx.col(p).data(), std::size_t(m + 1)});
        std::array<double, 3> obs{};
        for (std::size_t i = 0; i < mon.size(); ++i)
            obs[i] = x[mon[i]];
        d.xi(p) = payoff(std::span<const double>(obs.data(), mon.size()));
        if (!inside) {
            d.excluded[p] = true;
            ++d.n_excluded;
        }
    }
    return d;
}

ResidualSummary residual(const Decomposition& dec)
{
    ResidualSummary r;
    r.per_path.assign(dec.n_paths(), std::numeric_limits<double>::quiet_NaN());
    double sumsq = 0.0;
    int used = 0;
    for (int p = 0; p < dec.n_paths(); ++p) {
        if (dec.excluded[p])
            continue;
        double sup = 0.0;
        const double y0 = dec.y(0, p);
        for (int s = 0; s <= dec.n_steps; ++s)
            sup = std::max(sup, std::abs(dec.y(s, p) - y0 - dec.int_hdx(s, p) + dec.k(s, p)));
        r.per_path[p] = sup;
        r.max = std::max(r.max, sup);
        sumsq += sup * sup;
        ++used;
    }
    r.rms = used ? std::sqrt(sumsq / used) : 0.0;
    return r;
}

double monotonicity(const Decomposition& dec)
{
    double worst = std::numeric_limits<double>::infinity();
    for (int p = 0; p < dec.n_paths(); ++p) {
        if (dec.excluded[p])
            continue;
        for (int s = 0; s < dec.n_steps; ++s)
            worst = std::min(worst, dec.k(s + 1, p) - dec.k(s, p));
    }
    return std::isfinite(worst) ? worst : 0.0;
}

GapResult gmartingale_gap(const PayoffSpec& payoff, const Band& band, const ValueField& field,
                          const ControlFamily& family, const SimConfig& sim)
{
    family.validate(band);
    const int m = sim.steps;
    const auto mon = monitoring_steps(payoff, m);
    const std::size_t n = static_cast<std::size_t>(sim.paths);
    const std::size_t nc = family.size();

    std::vector<Eigen::ArrayXd> alphas;
    for (const auto& c : family.controls)
        alphas.push_back(step_alphas(c, m));

    std::vector<double> k_final(nc * n);
    std::vector<char> inside(nc * n);
    std::vector<double> min_inc(nc * n);
    std::vector<double> abs_max(nc * n);
    for_each_path(family, sim, [&](std::size_t c, std::size_t p, std::span<const double> x) {
        thread_local std::vector<double> buf;
        buf.resize(4 * static_cast<std::size_t>(m + 1));
        std::span<double> y(buf.data(), m + 1), h(buf.data() + (m + 1), m + 1), k(buf.data() + 2 * (m + 1), m + 1),
            ihdx(buf.data() + 3 * (m + 1), m + 1);
        const bool ok = trace_path(field, {alphas[c].data(), std::size_t(m)}, x, mon, y, h, k, ihdx);
        const std::size_t slot = c * n + p;
        inside[slot] = ok;
        k_final[slot] = k[m];
        double mi = std::numeric_limits<double>::infinity(), am = 0.0;
        for (int s = 0; s < m; ++s) {
            mi = std::min(mi, k[s + 1] - k[s]);
            am = std::max(am, std::abs(k[s + 1]));
        }
        min_inc[slot] = mi;
        abs_max[slot] = am;
    });

    GapResult r;
    r.sup = -std::numeric_limits<double>::infinity();
    r.min_increment = std::numeric_limits<double>::infinity();
    std::size_t excluded = 0;
    for (std::size_t c = 0; c < nc; ++c) {
        std::vector<double> samples;
        samples.reserve(n);
        for (std::size_t p = 0; p < n; ++p) {
            const std::size_t slot = c * n + p;
            if (!inside[slot]) {
                ++excluded;
                continue;
            }
            samples.push_back(-k_final[slot]);
            r.min_increment = std::min(r.min_increment, min_inc[slot]);
            r.k_abs_max = std::max(r.k_abs_max, abs_max[slot]);
        }
        const MeanEstimate e = estimate_mean(samples);
        r.per_control.push_back({family.labels[c], e});
        if (e.mean > r.sup) {
            r.sup = e.mean;
            r.se = e.se;
            r.argmax = c;
        }
    }
    if (!std::isfinite(r.min_increment))
        r.min_increment = 0.0;
    r.exclusion_rate = static_cast<double>(excluded) / static_cast<double>(nc * n);
    return r;
}

SymmetryEvidence is_symmetric(const PayoffSpec& payoff, const Band& band, const ValueField& field,
                              const ControlFamily& family, const SimConfig& sim, double tol)
{
    SymmetryEvidence ev;
    const GapResult gap = gmartingale_gap(payoff, band, field, family, sim);
    ev.k_abs_max = gap.k_abs_max;
    ev.symmetric = gap.k_abs_max <= tol;
    ev.value = field.at_origin();
    ev.negated_value = g_expectation(payoff.negated(), band, field.grid(), sim.threads);
    ev.expectation_sum = ev.value + ev.negated_value;
    return ev;
}

void write_decomposition_csv(const Decomposition& dec, std::ostream& out, int max_paths, bool header)
{
    if (header)
        out << "control,path_id,t,Y,H,K,int_HdX,residual\n";
    char buf[256];
    const int n = max_paths < 0 ? dec.n_paths() : std::min(max_paths, dec.n_paths());
    for (int p = 0; p < n; ++p) {
        const double y0 = dec.y(0, p);
        for (int s = 0; s <= dec.n_steps; ++s) {
            const double res = dec.y(s, p) - y0 - dec.int_hdx(s, p) + dec.k(s, p);
            std::snprintf(buf, sizeof(buf), "%s,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", dec.label.c_str(), p, dec.time(s), dec.y(s, p),
                          dec.h(s, p), dec.k(s, p), dec.int_hdx(s, p), res);
            out << buf;
        }
    }
}

} // namespace gexp
