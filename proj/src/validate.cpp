#include "gexp/validate.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace gexp {

std::string fnv1a_hex(std::string_view text)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string run_fingerprint(const Band& band, const SpaceTimeGrid& grid, const SimConfig& sim, std::string_view extra)
{
    char buf[512];
    std::snprintf(buf, sizeof(buf), "band=%.17g,%.17g;n_x=%d;x_max=%.17g;cfl=%.17g;store=%d;paths=%d;steps=%d;seed=%llu;",
                  band.lo(), band.hi(), grid.n_x, grid.x_max, grid.cfl, grid.store_per_unit, sim.paths, sim.steps,
                  static_cast<unsigned long long>(sim.seed));
    return fnv1a_hex(std::string(buf) + std::string(extra));
}

InequalityReport InequalityReport::make(std::string name, double left, double right, double slack, double constant,
                                        double se_left, double se_right)
{
    InequalityReport r;
    r.name = std::move(name);
    r.left = left;
    r.right = right;
    r.slack = slack;
    r.constant = constant;
    r.se_left = se_left;
    r.se_right = se_right;
    r.margin = right + slack - left;
    r.pass = left <= right + slack;
    return r;
}

std::string InequalityReport::to_json() const
{
    nlohmann::ordered_json j;
    j["name"] = name;
    j["left"] = left;
    j["right"] = right;
    j["constant"] = constant;
    j["slack"] = slack;
    j["margin"] = margin;
    j["pass"] = pass;
    j["se_left"] = se_left;
    j["se_right"] = se_right;
    j["fingerprint"] = fingerprint;
    if (!note.empty())
        j["note"] = note;
    return j.dump();
}

std::string format_report_table(const std::vector<InequalityReport>& reports)
{
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-40s %14s %14s %12s %12s  %s\n", "check", "left", "right", "slack", "margin",
                  "result");
    os << buf;
    for (const auto& r : reports) {
        std::snprintf(buf, sizeof(buf), "%-40s %14.6g %14.6g %12.4g %12.4g  %s\n", r.name.c_str(), r.left, r.right,
                      r.slack, r.margin, r.pass ? "PASS" : "FAIL");
        os << buf;
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// BDG

Integrand Integrand::constant(double c)
{
    char buf[48];
    std::snprintf(buf, sizeof(buf), "const(%g)", c);
    return {buf, [c](double, double) { return c; }};
}

Integrand Integrand::indicator_before(double s)
{
    char buf[48];
    std::snprintf(buf, sizeof(buf), "1{t<%g}", s);
    return {buf, [s](double t, double) { return t < s ? 1.0 : 0.0; }};
}

Integrand Integrand::smooth_bounded()
{
    return {"cos(X)(1-t/2)", [](double t, double x) { return std::cos(x) * (1.0 - 0.5 * t); }};
}

namespace {

std::vector<Eigen::ArrayXd> family_alphas(const ControlFamily& family, int steps)
{
    std::vector<Eigen::ArrayXd> out;
    for (const auto& c : family.controls)
        out.push_back(step_alphas(c, steps));
    return out;
}

std::vector<MeanEstimate> column_means(const std::vector<double>& samples, std::size_t controls, std::size_t paths)
{
    std::vector<MeanEstimate> out;
    for (std::size_t c = 0; c < controls; ++c)
        out.push_back(estimate_mean(std::span<const double>(samples.data() + c * paths, paths)));
    return out;
}

double combined(double a, double b) { return std::sqrt(a * a + b * b); }

} // namespace

std::vector<InequalityReport> bdg_check(const Integrand& h, const Band& band, const ControlFamily& family,
                                        const SimConfig& sim)
{
    family.validate(band);
    const int m = sim.steps;
    const double dt = 1.0 / m;
    const auto alphas = family_alphas(family, m);
    const std::size_t n = static_cast<std::size_t>(sim.paths);
    const std::size_t nc = family.size();

    SimConfig sim_h = sim;
    sim_h.seed = derive_seed(sim.seed, 1);
    SimConfig sim_i = sim;
    sim_i.seed = derive_seed(sim.seed, 2);

    std::vector<double> qv_int(nc * n), sup_sq(nc * n);
    for_each_path(family, sim_h, [&](std::size_t c, std::size_t p, std::span<const double> x) {
        double acc = 0.0;
        for (int k = 0; k < m; ++k) {
            const double v = h.f(k * dt, x[k]);
            acc += alphas[c](k) * v * v * dt;
        }
        qv_int[c * n + p] = acc;
    });
    for_each_path(family, sim_i, [&](std::size_t c, std::size_t p, std::span<const double> x) {
        double integral = 0.0, sup = 0.0;
        for (int k = 0; k < m; ++k) {
            integral += h.f(k * dt, x[k]) * (x[k + 1] - x[k]);
            sup = std::max(sup, integral * integral);
        }
        sup_sq[c * n + p] = sup;
    });

    const auto mh = column_means(qv_int, nc, n);
    const auto mi = column_means(sup_sq, nc, n);
    const NormEstimate hn = family_norm(mh, 2.0);
    const NormEstimate in = family_norm(mi, 2.0);

    const std::string fp = run_fingerprint(band, SpaceTimeGrid{}, sim, "bdg:" + h.name);
    auto lower = InequalityReport::make("bdg.lower " + h.name, hn.value, in.value, 2.0 * combined(hn.se, in.se), 1.0,
                                        hn.se, in.se);
    auto upper = InequalityReport::make("bdg.upper " + h.name, in.value, 2.0 * hn.value,
                                        2.0 * combined(in.se, 2.0 * hn.se), 2.0, in.se, 2.0 * hn.se);
    lower.fingerprint = upper.fingerprint = fp;
    return {lower, upper};
}

// ---------------------------------------------------------------------------
// A-priori estimate

double apriori_aggregate_constant() { return 4.0 + std::sqrt(kAprioriKConstant); }

namespace {

struct PathMoments {
    std::vector<double> k_sq, y_sup_sq, h_qv;
    std::vector<char> inside;
};

PathMoments decomposition_moments(const PayoffSpec& payoff, const ValueField& field, const ControlFamily& family,
                                  const SimConfig& sim)
{
    const int m = sim.steps;
    const auto mon = monitoring_steps(payoff, m);
    const auto alphas = family_alphas(family, m);
    const std::size_t n = static_cast<std::size_t>(sim.paths);
    const std::size_t nc = family.size();
    PathMoments pm;
    pm.k_sq.resize(nc * n);
    pm.y_sup_sq.resize(nc * n);
    pm.h_qv.resize(nc * n);
    pm.inside.resize(nc * n);
    for_each_path(family, sim, [&](std::size_t c, std::size_t p, std::span<const double> x) {
        thread_local std::vector<double> buf;
        buf.resize(4 * static_cast<std::size_t>(m + 1));
        std::span<double> y(buf.data(), m + 1), h(buf.data() + (m + 1), m + 1), k(buf.data() + 2 * (m + 1), m + 1),
            ihdx(buf.data() + 3 * (m + 1), m + 1);
        const std::size_t slot = c * n + p;
        pm.inside[slot] = trace_path(field, {alphas[c].data(), std::size_t(m)}, x, mon, y, h, k, ihdx);
        double ysup = 0.0, ksup = 0.0, hq = 0.0;
        for (int s = 0; s <= m; ++s) {
            ysup = std::max(ysup, y[s] * y[s]);
            ksup = std::max(ksup, k[s] * k[s]);
            if (s < m)
                hq += alphas[c](s) * h[s] * h[s] / m;
        }
        pm.k_sq[slot] = ksup;
        pm.y_sup_sq[slot] = ysup;
        pm.h_qv[slot] = hq;
    });
    return pm;
}

std::vector<double> included(const std::vector<double>& v, const std::vector<char>& inside, std::size_t c,
                             std::size_t n)
{
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t p = 0; p < n; ++p)
        if (inside[c * n + p])
            out.push_back(v[c * n + p]);
    return out;
}

} // namespace

std::vector<InequalityReport> apriori_check(const PayoffSpec& payoff, const Band& band, const ValueField& field,
                                            const ControlFamily& family, const SimConfig& sim)
{
    family.validate(band);
    const PathMoments pm = decomposition_moments(payoff, field, family, sim);
    const std::size_t n = static_cast<std::size_t>(sim.paths);
    const std::string fp = run_fingerprint(band, field.grid(), sim, "apriori:" + payoff.expr().to_string());

    std::vector<InequalityReport> out;
    std::vector<MeanEstimate> mk, my, mh;
    for (std::size_t c = 0; c < family.size(); ++c) {
        const auto k = estimate_mean(included(pm.k_sq, pm.inside, c, n));
        const auto y = estimate_mean(included(pm.y_sup_sq, pm.inside, c, n));
        const auto h = estimate_mean(included(pm.h_qv, pm.inside, c, n));
        mk.push_back(k);
        my.push_back(y);
        mh.push_back(h);
        auto r = InequalityReport::make("apriori.K " + family.labels[c], k.mean, kAprioriKConstant * y.mean, 0.0,
                                        kAprioriKConstant, k.se, kAprioriKConstant * y.se);
        r.fingerprint = fp;
        out.push_back(r);
    }
    const NormEstimate kn = family_norm(mk, 2.0);
    const NormEstimate yn = family_norm(my, 2.0);
    const NormEstimate hn = family_norm(mh, 2.0);
    const double c = apriori_aggregate_constant();
    auto agg = InequalityReport::make("apriori.aggregate", hn.value + kn.value, c * yn.value, 0.0, c,
                                      combined(hn.se, kn.se), c * yn.se);
    agg.fingerprint = fp;
    out.push_back(agg);
    return out;
}

// ---------------------------------------------------------------------------
// Difference estimate

double DifferenceTerms::bracket() const
{
    return delta_xi + (std::sqrt(xi1) + std::sqrt(xi2)) * std::sqrt(delta_xi);
}

DifferenceTerms difference_terms(const PayoffSpec& xi1, const PayoffSpec& xi2, const Band& band,
                                 const SpaceTimeGrid& grid, const ControlFamily& family, const SimConfig& sim)
{
    family.validate(band);
    const ValueField f1 = conditional_expectation(xi1, band, grid, sim.threads);
    const ValueField f2 = conditional_expectation(xi2, band, grid, sim.threads);
    const PayoffSpec delta = difference(xi1, xi2);

    const int m = sim.steps;
    const auto mon1 = monitoring_steps(xi1, m);
    const auto mon2 = monitoring_steps(xi2, m);
    const auto alphas = family_alphas(family, m);
    const std::size_t n = static_cast<std::size_t>(sim.paths);
    const std::size_t nc = family.size();

    SimConfig sim_a = sim;
    sim_a.seed = derive_seed(sim.seed, 11);
    std::vector<double> dy(nc * n), dh(nc * n), dk(nc * n);
    std::vector<char> inside(nc * n);
    for_each_path(family, sim_a, [&](std::size_t c, std::size_t p, std::span<const double> x) {
        thread_local std::vector<double> buf;
        const std::size_t len = static_cast<std::size_t>(m + 1);
        buf.resize(8 * len);
        auto part = [&](int i) { return std::span<double>(buf.data() + i * len, len); };
        const std::span<const double> al(alphas[c].data(), std::size_t(m));
        const bool ok1 = trace_path(f1, al, x, mon1, part(0), part(1), part(2), part(3));
        const bool ok2 = trace_path(f2, al, x, mon2, part(4), part(5), part(6), part(7));
        double ys = 0.0, ks = 0.0, hq = 0.0;
        for (int s = 0; s <= m; ++s) {
            const double ddy = part(0)[s] - part(4)[s];
            const double ddk = part(2)[s] - part(6)[s];
            ys = std::max(ys, ddy * ddy);
            ks = std::max(ks, ddk * ddk);
            if (s < m) {
                const double ddh = part(1)[s] - part(5)[s];
                hq += al[s] * ddh * ddh / m;
            }
        }
        const std::size_t slot = c * n + p;
        inside[slot] = ok1 && ok2;
        dy[slot] = ys;
        dk[slot] = ks;
        dh[slot] = hq;
    });

    std::vector<MeanEstimate> my, mh, mk;
    for (std::size_t c = 0; c < nc; ++c) {
        my.push_back(estimate_mean(included(dy, inside, c, n)));
        mh.push_back(estimate_mean(included(dh, inside, c, n)));
        mk.push_back(estimate_mean(included(dk, inside, c, n)));
    }
    DifferenceTerms t;
    const NormEstimate ny = family_norm(my, 2.0);
    t.delta_y = ny.value;
    t.se_delta_y = ny.se;
    t.delta_h = family_norm(mh, 2.0).value;
    t.delta_k = family_norm(mk, 2.0).value;

    SimConfig sim_b = sim;
    sim_b.seed = derive_seed(sim.seed, 12);
    const NormEstimate nd =
        lp_norm(delta, 2.0, family, conditional_expectation(delta.absolute(), band, grid, sim.threads), sim_b);
    t.delta_xi = nd.value;
    t.se_delta_xi = nd.se;
    t.xi1 = lp_norm(xi1, 2.0, family, conditional_expectation(xi1.absolute(), band, grid, sim.threads), sim_b).value;
    t.xi2 = lp_norm(xi2, 2.0, family, conditional_expectation(xi2.absolute(), band, grid, sim.threads), sim_b).value;
    return t;
}

std::vector<InequalityReport> difference_check(const PayoffSpec& xi1, const PayoffSpec& xi2, const Band& band,
                                               const SpaceTimeGrid& grid, const ControlFamily& family,
                                               const SimConfig& sim, double cstar)
{
    const DifferenceTerms t = difference_terms(xi1, xi2, band, grid, family, sim);
    const std::string fp =
        run_fingerprint(band, grid, sim, "difference:" + xi1.expr().to_string() + "|" + xi2.expr().to_string());
    // Absolute slack covers rounding when both sides coincide exactly.
    auto first = InequalityReport::make("difference.Y", t.delta_y, t.delta_xi,
                                        2.0 * combined(t.se_delta_y, t.se_delta_xi) + 1e-12, 1.0, t.se_delta_y,
                                        t.se_delta_xi);
    const double bracket = t.bracket();
    auto second = InequalityReport::make("difference.HK", t.delta_h + t.delta_k, cstar * bracket, 1e-12, cstar);
    if (bracket > 0.0 && (t.delta_h + t.delta_k) / bracket > 2.0 * cstar)
        second.note = "pair needs more than twice the calibrated constant";
    first.fingerprint = second.fingerprint = fp;
    return {first, second};
}

double calibrate_difference_constant(const Band& band, const SpaceTimeGrid& grid, const ControlFamily& family,
                                     const SimConfig& sim)
{
    const Expr x = Expr::var(1);
    const std::vector<std::pair<PayoffSpec, PayoffSpec>> pairs = {
        {PayoffSpec::terminal(call(x, 0.0)), PayoffSpec::terminal(Expr::constant(0.9) * call(x, 0.0))},
        {PayoffSpec::terminal(min(abs(x), Expr::constant(1.0))), PayoffSpec::terminal(clamp(x, -1.0, 1.0))},
        {PayoffSpec::terminal(call(x, 0.0)), PayoffSpec::terminal(put(x, 0.0))},
        {PayoffSpec::terminal(min(abs(x), Expr::constant(1.0))),
         PayoffSpec::terminal(Expr::constant(0.5) * min(abs(x), Expr::constant(1.0)))},
    };
    double worst = 0.0;
    for (const auto& [a, b] : pairs) {
        const DifferenceTerms t = difference_terms(a, b, band, grid, family, sim);
        if (t.bracket() > 0.0)
            worst = std::max(worst, (t.delta_h + t.delta_k) / t.bracket());
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Tower property

TowerValues tower_values(const PayoffSpec& payoff, const Band& band, const SpaceTimeGrid& grid, double t, int threads)
{
    const PayoffSpec lifted = payoff.with_monitoring_time(t);
    if (lifted.times().front() != t)
        throw std::invalid_argument("tower_check: t must not exceed the first monitoring time");
    const ValueField field = conditional_expectation(lifted, band, grid, threads);

    SpaceTimeGrid fine = grid;
    fine.n_x = 2 * (grid.n_x - 1) + 1;
    Eigen::ArrayXd conditional(fine.n_x);
    for (int j = 0; j < fine.n_x; ++j) {
        const double xj = fine.x(j);
        const std::array<double, 1> hist{xj};
        conditional(j) = field.value(t, hist, xj);
    }
    TowerValues v;
    v.nested = field.at_origin();
    v.refed = solve_interval(conditional, band, fine, 0.0, t).values(fine.center(), 0);
    return v;
}

InequalityReport tower_check(const PayoffSpec& payoff, const Band& band, const SpaceTimeGrid& grid, double t,
                             double tolerance, int threads)
{
    const TowerValues v = tower_values(payoff, band, grid, t, threads);
    auto r = InequalityReport::make("tower", std::abs(v.refed - v.nested), tolerance, 0.0, tolerance);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "nested=%.10g refed=%.10g", v.nested, v.refed);
    r.note = buf;
    r.fingerprint = run_fingerprint(band, grid, SimConfig{0, 0, 0, 0}, "tower:" + payoff.expr().to_string());
    return r;
}

// ---------------------------------------------------------------------------
// Doob-type inequality

double doob_constant(double p)
{
    if (!(p > 2.0))
        throw std::invalid_argument("doob_constant: p must exceed 2");
    return std::sqrt(p / (p - 2.0));
}

InequalityReport doob_check(const PayoffSpec& payoff, double p, const Band& band, const SpaceTimeGrid& grid,
                            const ControlFamily& family, const SimConfig& sim)
{
    const double cp = doob_constant(p);
    if (p != std::floor(p))
        throw std::invalid_argument("doob_check: p must be an integer");
    SimConfig sim_a = sim;
    sim_a.seed = derive_seed(sim.seed, 21);
    SimConfig sim_b = sim;
    sim_b.seed = derive_seed(sim.seed, 22);

    const NormEstimate lhs =
        lp_norm(payoff, 2.0, family, conditional_expectation(payoff.absolute(), band, grid, sim.threads), sim_a);
    const DualResult moment = dual_value(payoff.absolute().power(static_cast<int>(p)), family, sim_b);
    const double g_norm = std::pow(std::max(moment.value, 0.0), 1.0 / p);
    const double g_se = moment.value > 0.0 ? moment.se * g_norm / (p * moment.value) : 0.0;

    auto r = InequalityReport::make("doob p=" + std::to_string(static_cast<int>(p)), lhs.value, cp * g_norm,
                                    2.0 * combined(lhs.se, cp * g_se) + 1e-12, cp, lhs.se, cp * g_se);
    r.fingerprint = run_fingerprint(band, grid, sim, "doob:" + payoff.expr().to_string());
    return r;
}

InequalityReport lp_consistency_check(const PayoffSpec& payoff, const Band& band, const SpaceTimeGrid& grid,
                                      const ControlFamily& family, const SimConfig& sim)
{
    SimConfig sim_a = sim;
    sim_a.seed = derive_seed(sim.seed, 31);
    SimConfig sim_b = sim;
    sim_b.seed = derive_seed(sim.seed, 32);
    const NormEstimate norm =
        lp_norm(payoff, 2.0, family, conditional_expectation(payoff.absolute(), band, grid, sim.threads), sim_a);
    const DualResult second = dual_value(payoff.power(2), family, sim_b);
    const double lower = std::sqrt(std::max(second.value, 0.0));
    const double lower_se = second.value > 0.0 ? second.se / (2.0 * lower) : 0.0;
    auto r = InequalityReport::make("lp.consistency", lower, norm.value, 2.0 * combined(lower_se, norm.se) + 1e-12,
                                    1.0, lower_se, norm.se);
    if (!std::isfinite(norm.value)) {
        r.pass = false;
        r.note = "norm estimate not finite";
    }
    r.fingerprint = run_fingerprint(band, grid, sim, "lp:" + payoff.expr().to_string());
    return r;
}

// ---------------------------------------------------------------------------
// Mollification

std::vector<double> uniform_grid(double lo, double hi, double step)
{
    std::vector<double> g;
    const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
    for (int i = 0; i <= n; ++i)
        g.push_back(lo + i * step);
    return g;
}

std::vector<MollifyPoint> mollify_sweep(const Band& band, const std::vector<double>& epsilons,
                                        const std::vector<double>& gamma_grid, int a_nodes)
{
    std::vector<MollifyPoint> out;
    for (double eps : epsilons) {
        const SmoothG g = mollify(band, eps);
        MollifyPoint pt;
        pt.epsilon = eps;
        pt.cstar = g.cstar();
        pt.max_gap = sandwich_check(g, gamma_grid);
        pt.min_gap = std::numeric_limits<double>::infinity();
        for (double gamma : gamma_grid)
            pt.min_gap = std::min(pt.min_gap, g(gamma) - g.unsmoothed(gamma));
        pt.ratio = pt.max_gap / eps;
        pt.legendre_min = std::numeric_limits<double>::infinity();
        pt.legendre_max = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < a_nodes; ++i) {
            const double a = g.lower_eps() + (g.upper() - g.lower_eps()) * i / (a_nodes - 1);
            const double l = legendre(g, a);
            pt.legendre_min = std::min(pt.legendre_min, l);
            pt.legendre_max = std::max(pt.legendre_max, l);
        }
        out.push_back(pt);
    }
    return out;
}

std::vector<InequalityReport> mollify_check(const Band& band, const std::vector<double>& epsilons)
{
    const auto grid = uniform_grid(-20.0, 20.0, 0.5);
    const auto sweep = mollify_sweep(band, epsilons, grid);
    std::vector<InequalityReport> out;
    constexpr double round_off = 1e-12;
    double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0;
    for (const auto& pt : sweep) {
        char tag[32];
        std::snprintf(tag, sizeof(tag), " eps=%g", pt.epsilon);
        out.push_back(InequalityReport::make(std::string("mollify.gap>=0") + tag, -pt.min_gap, 0.0, round_off));
        out.push_back(InequalityReport::make(std::string("mollify.gap<=C*eps") + tag, pt.max_gap,
                                             pt.cstar * pt.epsilon, round_off, pt.cstar));
        out.push_back(InequalityReport::make(std::string("mollify.L<=0") + tag, pt.legendre_max, 0.0, round_off));
        out.push_back(InequalityReport::make(std::string("mollify.L>=-C*eps") + tag, -pt.legendre_min,
                                             pt.cstar * pt.epsilon, round_off, pt.cstar));
        rmin = std::min(rmin, pt.ratio);
        rmax = std::max(rmax, pt.ratio);
    }
    auto spread = InequalityReport::make("mollify.ratio_spread", rmin > 0.0 ? (rmax - rmin) / rmin : 1.0, 0.25, 0.0);
    spread.pass = spread.left < 0.25;
    out.push_back(spread);
    return out;
}

} // namespace gexp
