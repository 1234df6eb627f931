#include "gexp/config.hpp"
#include "gexp/validate.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace gexp {

namespace {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_list(const std::vector<double>& v)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out += (i ? "," : "") + fmt(v[i]);
    return out;
}

double to_double(const std::string& key, const std::string& v)
{
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out))
        throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
    return out;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v)
{
    Int out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
    return out;
}

std::vector<double> to_list(const std::string& key, const std::string& v)
{
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(to_double(key, trim(item)));
    if (out.empty())
        throw ConfigError("config: '" + key + "' expects a comma-separated list");
    return out;
}

} // namespace

Band RunConfig::band() const
{
    try {
        return Band::scalar(band_lower, band_upper);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config [band]: ") + e.what());
    }
}

PayoffSpec RunConfig::payoff() const
{
    try {
        return PayoffSpec(payoff_times, parse_payoff(payoff_expr), lipschitz, sup_bound);
    } catch (const PayoffParseError& e) {
        throw ConfigError(std::string("config [payoff] expr: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config [payoff]: ") + e.what());
    }
}

ControlFamily RunConfig::family() const
{
    const Band b = band();
    ControlFamily f;
    try {
        if (family_constants > 0)
            f = ControlFamily::constant_grid(b, family_constants, family_floor);
        if (family_random_piecewise > 0)
            f.add_random_piecewise(b, family_random_piecewise, family_pieces, derive_seed(sim.seed, 0xfa),
                                   family_floor);
        if (!family_file.empty()) {
            std::ifstream in(family_file);
            if (!in)
                throw ConfigError("config [family] file: cannot open " + family_file);
            ControlFamily extra = read_family(in);
            for (std::size_t i = 0; i < extra.size(); ++i)
                f.add(extra.controls[i], extra.labels[i]);
        }
        f.validate(b);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config [family]: ") + e.what());
    }
    return f;
}

void RunConfig::validate() const
{
    band();
    const PayoffSpec p = payoff();
    try {
        grid.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config [grid]: ") + e.what());
    }
    if (sim.paths < 1)
        throw ConfigError("config [mc]: paths must be >= 1");
    if (sim.steps < 1)
        throw ConfigError("config [mc]: steps must be >= 1");
    if (sim.threads < 0)
        throw ConfigError("config [mc]: threads must be >= 0");
    try {
        monitoring_steps(p, sim.steps);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config [mc] steps: ") + e.what());
    }
    if (family_constants < 0 || family_random_piecewise < 0 || family_pieces < 1)
        throw ConfigError("config [family]: counts must be non-negative and pieces >= 1");
    if (!(family_floor > 0.0))
        throw ConfigError("config [family]: floor must be positive");
    if (csv_paths < 0)
        throw ConfigError("config [output]: csv_paths must be >= 0");
    family();
}

RunConfig parse_config(const std::string& text)
{
    RunConfig c;
    std::stringstream ss(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#')
            continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) + ": malformed section header");
            section = trim(std::string_view(t).substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(std::string_view(t).substr(0, eq));
        const std::string v = trim(std::string_view(t).substr(eq + 1));
        const std::string full = section + "." + key;

        if (full == "band.lower")
            c.band_lower = to_double(full, v);
        else if (full == "band.upper")
            c.band_upper = to_double(full, v);
        else if (full == "payoff.expr")
            c.payoff_expr = v;
        else if (full == "payoff.times")
            c.payoff_times = to_list(full, v);
        else if (full == "payoff.lipschitz")
            c.lipschitz = to_double(full, v);
        else if (full == "payoff.sup_bound")
            c.sup_bound = to_double(full, v);
        else if (full == "grid.n_x")
            c.grid.n_x = to_int<int>(full, v);
        else if (full == "grid.x_max")
            c.grid.x_max = to_double(full, v);
        else if (full == "grid.cfl")
            c.grid.cfl = to_double(full, v);
        else if (full == "grid.store_per_unit")
            c.grid.store_per_unit = to_int<int>(full, v);
        else if (full == "mc.paths")
            c.sim.paths = to_int<int>(full, v);
        else if (full == "mc.steps")
            c.sim.steps = to_int<int>(full, v);
        else if (full == "mc.seed")
            c.sim.seed = to_int<std::uint64_t>(full, v);
        else if (full == "mc.threads")
            c.sim.threads = to_int<int>(full, v);
        else if (full == "family.constants")
            c.family_constants = to_int<int>(full, v);
        else if (full == "family.random_piecewise")
            c.family_random_piecewise = to_int<int>(full, v);
        else if (full == "family.pieces")
            c.family_pieces = to_int<int>(full, v);
        else if (full == "family.floor")
            c.family_floor = to_double(full, v);
        else if (full == "family.file")
            c.family_file = v;
        else if (full == "output.dir")
            c.output_dir = v;
        else if (full == "output.csv_paths")
            c.csv_paths = to_int<int>(full, v);
        else
            throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + full + "'");
    }
    c.validate();
    return c;
}

RunConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

namespace {

std::string emit(const RunConfig& c, bool with_location)
{
    std::ostringstream os;
    os << "[band]\n"
       << "lower = " << fmt(c.band_lower) << "\n"
       << "upper = " << fmt(c.band_upper) << "\n\n"
       << "[payoff]\n"
       << "expr = " << c.payoff_expr << "\n"
       << "times = " << fmt_list(c.payoff_times) << "\n";
    if (c.lipschitz)
        os << "lipschitz = " << fmt(*c.lipschitz) << "\n";
    if (c.sup_bound)
        os << "sup_bound = " << fmt(*c.sup_bound) << "\n";
    os << "\n[grid]\n"
       << "n_x = " << c.grid.n_x << "\n"
       << "x_max = " << fmt(c.grid.x_max) << "\n"
       << "cfl = " << fmt(c.grid.cfl) << "\n"
       << "store_per_unit = " << c.grid.store_per_unit << "\n\n"
       << "[mc]\n"
       << "paths = " << c.sim.paths << "\n"
       << "steps = " << c.sim.steps << "\n"
       << "seed = " << c.sim.seed << "\n";
    if (with_location)
        os << "threads = " << c.sim.threads << "\n";
    os << "\n[family]\n"
       << "constants = " << c.family_constants << "\n"
       << "random_piecewise = " << c.family_random_piecewise << "\n"
       << "pieces = " << c.family_pieces << "\n"
       << "floor = " << fmt(c.family_floor) << "\n";
    if (!c.family_file.empty())
        os << "file = " << c.family_file << "\n";
    if (with_location)
        os << "\n[output]\n"
           << "dir = " << c.output_dir << "\n"
           << "csv_paths = " << c.csv_paths << "\n";
    else
        os << "csv_paths = " << c.csv_paths << "\n";
    return os.str();
}

} // namespace

std::string emit_config(const RunConfig& config) { return emit(config, true); }

std::string config_fingerprint(const RunConfig& config)
{
    std::string text = emit(config, false);
    if (!config.family_file.empty()) {
        std::ifstream in(config.family_file);
        std::stringstream ss;
        ss << in.rdbuf();
        text += ss.str();
    }
    return fnv1a_hex(text);
}

} // namespace gexp
