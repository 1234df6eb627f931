#include "gexp/qsmc.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace gexp {

// ---------------------------------------------------------------------------
// Controls

ControlProcess ControlProcess::constant(double a, double floor)
{
    ControlProcess c;
    c.breakpoints = {0.0, 1.0};
    c.values = {a};
    c.floor = floor;
    return c;
}

double ControlProcess::alpha(double t) const
{
    const auto it = std::upper_bound(breakpoints.begin() + 1, breakpoints.end() - 1, t);
    return values[static_cast<std::size_t>(it - (breakpoints.begin() + 1))];
}

bool ControlProcess::is_constant() const
{
    return std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); });
}

void ControlProcess::validate(const Band& band) const
{
    if (band.dim() != 1)
        throw std::invalid_argument("ControlProcess: only scalar bands are supported");
    if (breakpoints.size() < 2 || values.size() != breakpoints.size() - 1)
        throw std::invalid_argument("ControlProcess: need m + 1 breakpoints for m values");
    if (breakpoints.front() != 0.0 || breakpoints.back() != 1.0)
        throw std::invalid_argument("ControlProcess: breakpoints must run from 0 to 1");
    for (std::size_t i = 1; i < breakpoints.size(); ++i)
        if (!(breakpoints[i] > breakpoints[i - 1]))
            throw std::invalid_argument("ControlProcess: breakpoints must be strictly increasing");
    if (!(floor > 0.0))
        throw std::invalid_argument("ControlProcess: floor must be positive");
    const double lo = std::max(floor, band.lo());
    for (double v : values)
        if (!(v >= lo && v <= band.hi()))
            throw std::invalid_argument("ControlProcess: volatility value outside [max(floor, lower), upper]");
}

ControlFamily ControlFamily::constant_grid(const Band& band, int count, double floor)
{
    if (count < 1)
        throw std::invalid_argument("constant_grid: count must be >= 1");
    ControlFamily f;
    const double lo = std::max(floor, band.lo());
    const double hi = band.hi();
    for (int i = 0; i < count; ++i) {
        const double a = count == 1 ? hi : (i == count - 1 ? hi : lo + (hi - lo) * i / (count - 1));
        char buf[48];
        std::snprintf(buf, sizeof(buf), "const_%.6g", a);
        f.add(ControlProcess::constant(a, floor), buf);
    }
    return f;
}

void ControlFamily::add(ControlProcess control, std::string label)
{
    controls.push_back(std::move(control));
    labels.push_back(std::move(label));
}

void ControlFamily::add_random_piecewise(const Band& band, int count, int pieces, std::uint64_t seed, double floor)
{
    if (pieces < 1)
        throw std::invalid_argument("add_random_piecewise: pieces must be >= 1");
    std::mt19937_64 rng(derive_seed(seed, 0x70696563ULL));
    const double lo = std::max(floor, band.lo());
    std::uniform_real_distribution<double> u(lo, band.hi());
    for (int i = 0; i < count; ++i) {
        ControlProcess c;
        c.floor = floor;
        c.breakpoints.resize(pieces + 1);
        c.values.resize(pieces);
        for (int j = 0; j <= pieces; ++j)
            c.breakpoints[j] = static_cast<double>(j) / pieces;
        for (int j = 0; j < pieces; ++j)
            c.values[j] = u(rng);
        add(std::move(c), "piecewise_" + std::to_string(i));
    }
}

void ControlFamily::validate(const Band& band) const
{
    if (controls.empty())
        throw std::invalid_argument("ControlFamily: empty family");
    if (labels.size() != controls.size())
        throw std::invalid_argument("ControlFamily: one label per control required");
    for (const auto& c : controls)
        c.validate(band);
}

namespace {

std::string join_numbers(const std::vector<double>& v)
{
    std::string s;
    char buf[32];
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
        if (i)
            s += ',';
        s += buf;
    }
    return s;
}

std::vector<double> split_numbers(const std::string& s)
{
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        const double v = std::stod(item, &used);
        if (used != item.size())
            throw std::invalid_argument("bad number '" + item + "'");
        out.push_back(v);
    }
    return out;
}

} // namespace

void write_family(const ControlFamily& family, std::ostream& out)
{
    out << "# control family\n";
    char buf[32];
    for (std::size_t i = 0; i < family.size(); ++i) {
        const auto& c = family.controls[i];
        std::snprintf(buf, sizeof(buf), "%.17g", c.floor);
        out << "control " << family.labels[i] << " breakpoints=" << join_numbers(c.breakpoints)
            << " values=" << join_numbers(c.values) << " floor=" << buf << '\n';
    }
}

ControlFamily read_family(std::istream& in)
{
    ControlFamily family;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#')
            continue;
        std::stringstream ss(line);
        std::string keyword, label, token;
        ss >> keyword >> label;
        if (keyword != "control" || label.empty())
            throw std::invalid_argument("family file line " + std::to_string(lineno) + ": expected 'control <label>'");
        ControlProcess c;
        bool have_bp = false, have_vals = false;
        while (ss >> token) {
            const auto eq = token.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument("family file line " + std::to_string(lineno) + ": expected key=value");
            const std::string key = token.substr(0, eq);
            const std::string val = token.substr(eq + 1);
            try {
                if (key == "breakpoints") {
                    c.breakpoints = split_numbers(val);
                    have_bp = true;
                } else if (key == "values") {
                    c.values = split_numbers(val);
                    have_vals = true;
                } else if (key == "floor") {
                    c.floor = std::stod(val);
                } else {
                    throw std::invalid_argument("unknown key '" + key + "'");
                }
            } catch (const std::invalid_argument& e) {
                throw std::invalid_argument("family file line " + std::to_string(lineno) + ": " + e.what());
            }
        }
        if (!have_bp || !have_vals)
            throw std::invalid_argument("family file line " + std::to_string(lineno)
                                        + ": breakpoints and values are required");
        family.add(std::move(c), label);
    }
    return family;
}

// ---------------------------------------------------------------------------
// Random streams

namespace {

std::uint64_t splitmix(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) { return splitmix(splitmix(seed) ^ tag); }

std::mt19937_64 path_engine(std::uint64_t seed, std::uint64_t path, std::uint64_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

void driving_normals(std::uint64_t seed, std::uint64_t path, std::span<double> out)
{
    auto eng = path_engine(seed, path);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& z : out)
        z = normal(eng);
}

Eigen::ArrayXd step_alphas(const ControlProcess& control, int steps)
{
    Eigen::ArrayXd a(steps);
    for (int k = 0; k < steps; ++k)
        a(k) = control.alpha(static_cast<double>(k) / steps);
    return a;
}

// ---------------------------------------------------------------------------
// Bundles

PathBundle::PathBundle(ControlProcess control, std::uint64_t seed, Eigen::MatrixXd increments)
    : control_(std::move(control))
    , seed_(seed)
    , increments_(std::move(increments))
{
    const int m = n_steps();
    if (m < 1 || n_paths() < 1)
        throw std::invalid_argument("PathBundle: need at least one path and one step");
    alpha_ = step_alphas(control_, m);
    qv_.resize(m + 1);
    qv_(0) = 0.0;
    for (int k = 0; k < m; ++k)
        qv_(k + 1) = qv_(k) + alpha_(k) * dt();
    paths_.resize(m + 1, n_paths());
    paths_.row(0).setZero();
    const Eigen::ArrayXd vol = alpha_.sqrt();
    for (int k = 0; k < m; ++k)
        paths_.row(k + 1) = paths_.row(k) + vol(k) * increments_.row(k);
}

int PathBundle::step_index(double t) const
{
    const double pos = t * n_steps();
    const double r = std::round(pos);
    if (std::abs(pos - r) > 1e-9 || r < 0 || r > n_steps())
        throw std::invalid_argument("PathBundle: time " + std::to_string(t) + " is not on the simulation grid");
    return static_cast<int>(r);
}

PathBundle simulate(const ControlProcess& control, int paths, int steps, std::uint64_t seed, int threads)
{
    if (paths < 1 || steps < 1)
        throw std::invalid_argument("simulate: paths and steps must be >= 1");
    const double sqdt = std::sqrt(1.0 / steps);
    Eigen::MatrixXd dw(steps, paths);
    parallel_for(static_cast<std::size_t>(paths), threads, [&](std::size_t p) {
        driving_normals(seed, p, std::span<double>(dw.col(static_cast<Eigen::Index>(p)).data(), steps));
    });
    dw *= sqdt;
    return PathBundle(control, seed, std::move(dw));
}

PathBundle simulate(const ControlProcess& control, const SimConfig& sim)
{
    return simulate(control, sim.paths, sim.steps, sim.seed, sim.threads);
}

void write_bundle_csv(const PathBundle& bundle, std::ostream& out)
{
    out << "path_id,t,X,qv,alpha\n";
    char buf[160];
    for (int p = 0; p < bundle.n_paths(); ++p) {
        for (int k = 0; k <= bundle.n_steps(); ++k) {
            if (k < bundle.n_steps())
                std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", p, bundle.time(k),
                              bundle.paths()(k, p), bundle.qv()(k), bundle.alpha()(k));
            else
                std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,\n", p, bundle.time(k), bundle.paths()(k, p),
                              bundle.qv()(k));
            out << buf;
        }
    }
}

// ---------------------------------------------------------------------------
// Estimators

MeanEstimate estimate_mean(std::span<const double> samples)
{
    MeanEstimate e;
    e.count = samples.size();
    if (samples.empty())
        return e;
    const double shift = samples.front();
    double s1 = 0.0, s2 = 0.0;
    for (double v : samples) {
        const double d = v - shift;
        s1 += d;
        s2 += d * d;
    }
    const double n = static_cast<double>(samples.size());
    const double md = s1 / n;
    e.mean = shift + md;
    if (samples.size() > 1) {
        const double var = std::max(0.0, (s2 - n * md * md) / (n - 1.0));
        e.se = std::sqrt(var / n);
    }
    return e;
}

std::vector<int> monitoring_steps(const PayoffSpec& payoff, int steps)
{
    std::vector<int> idx;
    for (double t : payoff.times()) {
        const double pos = t * steps;
        const double r = std::round(pos);
        if (std::abs(pos - r) > 1e-9)
            throw std::invalid_argument("monitoring time " + std::to_string(t) + " is not on the simulation grid of "
                                        + std::to_string(steps) + " steps");
        idx.push_back(static_cast<int>(r));
    }
    return idx;
}

DualResult dual_value(const PayoffSpec& payoff, const ControlFamily& family, const SimConfig& sim)
{
    if (family.size() == 0)
        throw std::invalid_argument("dual_value: empty family");
    const auto mon = monitoring_steps(payoff, sim.steps);
    const std::size_t n = static_cast<std::size_t>(sim.paths);
    std::vector<std::vector<double>> samples(family.size(), std::vector<double>(n));
    for_each_path(family, sim, [&](std::size_t c, std::size_t p, std::span<const double> x) {
        std::array<double, 3> obs{};
        for (std::size_t i = 0; i < mon.size(); ++i)
            obs[i] = x[mon[i]];
        samples[c][p] = payoff(std::span<const double>(obs.data(), mon.size()));
    });

    DualResult r;
    r.value = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < family.size(); ++c) {
        const MeanEstimate e = estimate_mean(samples[c]);
        r.table.push_back({family.labels[c], e});
        if (e.mean > r.value) {
            r.value = e.mean;
            r.se = e.se;
            r.argmax = c;
        }
    }
    r.argmax_label = family.labels[r.argmax];
    return r;
}

namespace {

// Observed monitoring values up to and including step k.
std::size_t fill_history(const std::vector<int>& mon, std::span<const double> x, int k, std::array<double, 3>& hist)
{
    std::size_t h = 0;
    for (std::size_t i = 0; i < mon.size() && mon[i] <= k; ++i)
        hist[h++] = x[mon[i]];
    return h;
}

} // namespace

PathValues conditional_supremum(const PayoffSpec& payoff, const ValueField& field, const PathBundle& bundle, double t)
{
    const int k = bundle.step_index(t);
    const auto mon = monitoring_steps(payoff, bundle.n_steps());
    PathValues out;
    out.values.resize(bundle.n_paths());
    out.clamped.resize(bundle.n_paths());
    for (int p = 0; p < bundle.n_paths(); ++p) {
        const auto col = bundle.paths().col(p);
        std::span<const double> x(col.data(), col.size());
        std::array<double, 3> hist{};
        const std::size_t h = fill_history(mon, x, k, hist);
        if (k == bundle.n_steps()) {
            out.values[p] = payoff(std::span<const double>(hist.data(), h));
            continue;
        }
        const auto s = field.sample(bundle.time(k), std::span<const double>(hist.data(), h), x[k]);
        out.values[p] = s.value;
        out.clamped[p] = s.clamped;
        out.n_clamped += s.clamped ? 1 : 0;
    }
    return out;
}

NormEstimate family_norm(std::span<const MeanEstimate> moments, double p)
{
    if (moments.empty())
        throw std::invalid_argument("family_norm: no moments");
    NormEstimate r;
    r.per_control.assign(moments.begin(), moments.end());
    double best = -1.0;
    for (std::size_t c = 0; c < moments.size(); ++c) {
        if (moments[c].mean > best) {
            best = moments[c].mean;
            r.argmax = c;
        }
    }
    const double m = std::max(best, 0.0);
    r.value = std::pow(m, 1.0 / p);
    // Delta method for m^{1/p}.
    r.se = m > 0.0 ? moments[r.argmax].se * r.value / (p * m) : 0.0;
    return r;
}

NormEstimate lp_norm(const PayoffSpec& payoff, double p, const ControlFamily& family, const ValueField& abs_field,
                     const SimConfig& sim)
{
    if (!(p >= 1.0))
        throw std::invalid_argument("lp_norm: p must be >= 1");
    const auto mon = monitoring_steps(payoff, sim.steps);
    const std::size_t n = static_cast<std::size_t>(sim.paths);
    std::vector<std::vector<double>> samples(family.size(), std::vector<double>(n));
    for_each_path(family, sim, [&](std::size_t c, std::size_t path, std::span<const double> x) {
        std::array<double, 3> hist{};
        double sup = 0.0;
        for (int k = 0; k < sim.steps; ++k) {
            const std::size_t h = fill_history(mon, x, k, hist);
            const double v = abs_field.value(static_cast<double>(k) / sim.steps, std::span<const double>(hist.data(), h),
                                             x[k]);
            sup = std::max(sup, v);
        }
        const std::size_t h = fill_history(mon, x, sim.steps, hist);
        sup = std::max(sup, std::abs(payoff(std::span<const double>(hist.data(), h))));
        samples[c][path] = std::pow(sup, p);
    });
    std::vector<MeanEstimate> moments;
    for (const auto& s : samples)
        moments.push_back(estimate_mean(s));
    return family_norm(moments, p);
}

MeanEstimate hp_moment(const Eigen::MatrixXd& h, const PathBundle& bundle, double p)
{
    const int m = bundle.n_steps();
    if ((h.rows() != m && h.rows() != m + 1) || h.cols() != bundle.n_paths())
        throw std::invalid_argument("hp_moment: integrand samples are not aligned with the bundle");
    std::vector<double> samples(bundle.n_paths());
    for (int q = 0; q < bundle.n_paths(); ++q) {
        double acc = 0.0;
        for (int k = 0; k < m; ++k)
            acc += bundle.alpha()(k) * h(k, q) * h(k, q) * bundle.dt();
        samples[q] = std::pow(acc, 0.5 * p);
    }
    return estimate_mean(samples);
}

MeanEstimate sp_moment(const Eigen::MatrixXd& y, double p)
{
    std::vector<double> samples(y.cols());
    for (Eigen::Index q = 0; q < y.cols(); ++q)
        samples[q] = std::pow(y.col(q).cwiseAbs().maxCoeff(), p);
    return estimate_mean(samples);
}

NormEstimate hp_norm(std::span<const Eigen::MatrixXd> h, std::span<const PathBundle> bundles, double p)
{
    if (h.size() != bundles.size())
        throw std::invalid_argument("hp_norm: one integrand sample per bundle required");
    std::vector<MeanEstimate> moments;
    for (std::size_t i = 0; i < h.size(); ++i)
        moments.push_back(hp_moment(h[i], bundles[i], p));
    return family_norm(moments, p);
}

NormEstimate sp_norm(std::span<const Eigen::MatrixXd> y, double p)
{
    std::vector<MeanEstimate> moments;
    for (const auto& m : y)
        moments.push_back(sp_moment(m, p));
    return family_norm(moments, p);
}

QvResidual qv_identity_check(const PathBundle& bundle)
{
    QvResidual r;
    const int m = bundle.n_steps();
    double sumsq = 0.0;
    for (int q = 0; q < bundle.n_paths(); ++q) {
        const auto x = bundle.paths().col(q);
        double ito = 0.0;      // sum X dX
        double realized = 0.0; // sum dX^2
        double path_sup = 0.0;
        for (int k = 0; k < m; ++k) {
            const double dx = x(k + 1) - x(k);
            ito += x(k) * dx;
            realized += dx * dx;
            const double rebuilt = x(k + 1) * x(k + 1) - 2.0 * ito;
            path_sup = std::max(path_sup, std::abs(bundle.qv()(k + 1) - rebuilt));
            r.identity_max = std::max(r.identity_max, std::abs(rebuilt - realized));
        }
        r.max_abs = std::max(r.max_abs, path_sup);
        sumsq += path_sup * path_sup;
    }
    r.rms = std::sqrt(sumsq / bundle.n_paths());
    return r;
}

} // namespace gexp
