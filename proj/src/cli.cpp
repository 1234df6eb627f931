#include "gexp/cli.hpp"
#include "gexp/gpde.hpp"
#include "gexp/qsmc.hpp"
#include "gexp/represent.hpp"
#include "gexp/validate.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <ostream>

namespace gexp {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// Allowed amount by which the PDE value may fall below the dual lower bound
// before the price is flagged, on top of two standard errors.
constexpr double kGridTolerance = 1e-2;

fs::path prepare_dir(const RunConfig& config)
{
    fs::path dir(config.output_dir);
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << text;
}

// Timestamps live only here so that every other output is reproducible.
void write_meta(const fs::path& dir, const std::string& command, const RunConfig& config)
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm);
    json j;
    j["command"] = command;
    j["timestamp"] = stamp;
    j["fingerprint"] = config_fingerprint(config);
    j["threads"] = resolve_threads(config.sim.threads);
    j["config"] = emit_config(config);
    write_text(dir / "meta.json", j.dump(2) + "\n");
}

json payoff_json(const PayoffSpec& p)
{
    json j;
    j["expr"] = p.expr().to_string();
    j["times"] = p.times();
    return j;
}

json convergence_json(const ConvergenceTable& t)
{
    json rows = json::array();
    for (const auto& r : t.rows) {
        json row;
        row["n_x"] = r.n_x;
        row["dx"] = r.dx;
        row["value"] = r.value;
        row["difference"] = std::isfinite(r.difference) ? json(r.difference) : json(nullptr);
        row["order"] = std::isfinite(r.order) ? json(r.order) : json(nullptr);
        rows.push_back(row);
    }
    return rows;
}

template <typename Fn>
int guarded(std::ostream& log, Fn&& fn)
{
    try {
        return fn();
    } catch (const NumericalError& e) {
        log << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        log << "invalid input: " << e.what() << "\n";
        return kExitConfig;
    }
}

// Path-wise statements hold only over the controls actually simulated.
std::string family_scope(const ControlFamily& family)
{
    return "quasi-sure claims certified over a finite family of " + std::to_string(family.size()) + " controls";
}

} // namespace

int cmd_price(const RunConfig& config, std::ostream& log)
{
    return guarded(log, [&] {
        config.validate();
        const Band band = config.band();
        const PayoffSpec payoff = config.payoff();
        const ControlFamily family = config.family();
        const std::string fp = config_fingerprint(config);

        const double value = g_expectation(payoff, band, config.grid, config.sim.threads);
        const DualResult dual = dual_value(payoff, family, config.sim);
        const double gap = value - dual.value;
        const double floor = -(2.0 * dual.se + kGridTolerance);
        const bool breach = gap < floor;

        json table = json::array();
        try {
            table = convergence_json(refine_study(payoff, band, halving_grids(config.grid), config.sim.threads));
        } catch (const std::invalid_argument& e) {
            log << "convergence table skipped: " << e.what() << "\n";
        }

        json j;
        j["fingerprint"] = fp;
        j["payoff"] = payoff_json(payoff);
        j["band"] = {band.lo(), band.hi()};
        j["value"] = value;
        j["dual"] = {{"value", dual.value}, {"se", dual.se}, {"argmax", dual.argmax_label}};
        j["gap"] = gap;
        j["gap_floor"] = floor;
        j["breach"] = breach;
        j["scope"] = family_scope(family);
        j["convergence"] = table;

        const fs::path dir = prepare_dir(config);
        write_text(dir / "price.json", j.dump(2) + "\n");
        write_meta(dir, "price", config);
        log << "value " << value << "  dual " << dual.value << " (se " << dual.se << ", " << dual.argmax_label
            << ")  gap " << gap << (breach ? "  BREACH" : "") << "\n";
        return breach ? kExitBreach : kExitOk;
    });
}

int cmd_represent(const RunConfig& config, std::ostream& log)
{
    return guarded(log, [&] {
        config.validate();
        const Band band = config.band();
        const PayoffSpec payoff = config.payoff();
        const ControlFamily family = config.family();
        const std::string fp = config_fingerprint(config);
        const ValueField field = conditional_expectation(payoff, band, config.grid, config.sim.threads);

        const fs::path dir = prepare_dir(config);
        std::ofstream csv(dir / "decomposition.csv", std::ios::binary);
        csv << "# fingerprint=" << fp << "\n";

        json controls = json::array();
        double min_dk = std::numeric_limits<double>::infinity();
        double sumsq = 0.0;
        for (std::size_t c = 0; c < family.size(); ++c) {
            const PathBundle bundle = simulate(family.controls[c], config.sim);
            const Decomposition dec = extract(payoff, band, field, bundle, family.labels[c]);
            const ResidualSummary res = residual(dec);
            const double mono = monotonicity(dec);
            min_dk = std::min(min_dk, mono);
            sumsq += res.rms * res.rms;
            write_decomposition_csv(dec, csv, config.csv_paths, c == 0);
            controls.push_back({{"label", family.labels[c]},
                                {"residual_rms", res.rms},
                                {"residual_max", res.max},
                                {"min_dk", mono},
                                {"exclusion_rate", dec.exclusion_rate()}});
        }
        const double rms = std::sqrt(sumsq / static_cast<double>(family.size()));
        const GapResult gap = gmartingale_gap(payoff, band, field, family, config.sim);
        const SymmetryEvidence sym = is_symmetric(payoff, band, field, family, config.sim);
        const bool breach = min_dk < -1e-6 || gap.sup > 2.0 * gap.se + kGridTolerance;

        json j;
        j["fingerprint"] = fp;
        j["payoff"] = payoff_json(payoff);
        j["value"] = field.at_origin();
        j["residual_rms"] = rms;
        j["min_dk"] = min_dk;
        j["gap"] = {{"sup", gap.sup},
                    {"se", gap.se},
                    {"argmax", family.labels[gap.argmax]},
                    {"exclusion_rate", gap.exclusion_rate}};
        j["symmetric"] = sym.symmetric;
        j["k_abs_max"] = sym.k_abs_max;
        j["expectation_sum"] = sym.expectation_sum;
        j["breach"] = breach;
        j["scope"] = family_scope(family);
        j["controls"] = controls;
        write_text(dir / "represent.json", j.dump(2) + "\n");
        write_meta(dir, "represent", config);

        log << "residual rms " << rms << "  min dK " << min_dk << "  sup E[-K1] " << gap.sup << " (se " << gap.se
            << ", " << family.labels[gap.argmax] << ")  symmetric " << (sym.symmetric ? "true" : "false")
            << (breach ? "  BREACH" : "") << "\n";
        return breach ? kExitBreach : kExitOk;
    });
}

int cmd_verify(const RunConfig& config, const std::vector<std::string>& suites, std::ostream& log)
{
    if (suites.empty()) {
        log << "no suite given; choose from bdg, apriori, difference, tower, doob, mollify\n";
        return kExitConfig;
    }
    for (const auto& s : suites)
        if (std::find(kSuites.begin(), kSuites.end(), s) == kSuites.end()) {
            log << "unknown suite '" << s << "'\n";
            return kExitConfig;
        }
    return guarded(log, [&] {
        config.validate();
        const Band band = config.band();
        const PayoffSpec payoff = config.payoff();
        const ControlFamily family = config.family();
        const SimConfig& sim = config.sim;
        const SpaceTimeGrid& grid = config.grid;

        std::vector<InequalityReport> reports;
        auto append = [&](std::vector<InequalityReport> r) { reports.insert(reports.end(), r.begin(), r.end()); };
        for (const auto& suite : suites) {
            if (suite == "bdg") {
                for (const auto& h : {Integrand::constant(1.0), Integrand::indicator_before(0.5),
                                      Integrand::smooth_bounded()})
                    append(bdg_check(h, band, family, sim));
            } else if (suite == "apriori") {
                const ValueField field = conditional_expectation(payoff, band, grid, sim.threads);
                append(apriori_check(payoff, band, field, family, sim));
            } else if (suite == "difference") {
                append(difference_check(payoff, payoff.scaled(0.9), band, grid, family, sim));
                append(difference_check(payoff, payoff.shifted(0.1), band, grid, family, sim));
            } else if (suite == "tower") {
                const double t = std::min(0.5, payoff.times().front());
                reports.push_back(tower_check(payoff, band, grid, t, 2e-2, sim.threads));
            } else if (suite == "doob") {
                reports.push_back(doob_check(payoff, 4.0, band, grid, family, sim));
                reports.push_back(lp_consistency_check(payoff, band, grid, family, sim));
            } else if (suite == "mollify") {
                append(mollify_check(band, {0.1, 0.05, 0.025}));
            }
        }

        const std::string fp = config_fingerprint(config);
        const fs::path dir = prepare_dir(config);
        std::string lines;
        bool all = true;
        for (const auto& r : reports) {
            json j = json::parse(r.to_json());
            j["config_fingerprint"] = fp;
            if (!r.name.starts_with("mollify") && !r.name.starts_with("tower"))
                j["scope"] = family_scope(family);
            lines += j.dump() + "\n";
            all = all && r.pass;
        }
        write_text(dir / "reports.jsonl", lines);
        write_meta(dir, "verify", config);
        log << format_report_table(reports);
        return all ? kExitOk : kExitBreach;
    });
}

int run_cli(int argc, const char* const* argv)
{
    CLI::App app{"Sublinear expectation pricer, representation and verification"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir;
    bool quiet = false;
    std::vector<std::string> suites;
    auto* seed_opt = app.add_option("--seed", seed, "Override [mc] seed");
    app.add_option("--config", config_path, "Config file");
    auto* out_opt = app.add_option("--out", out_dir, "Override [output] dir");
    app.add_flag("--quiet", quiet, "Suppress the log");
    auto* price = app.add_subcommand("price", "Value, dual bound and convergence table");
    auto* represent = app.add_subcommand("represent", "Decomposition along simulated paths");
    auto* verify = app.add_subcommand("verify", "Run inequality suites");
    verify->add_option("--suite", suites, "Suites: bdg, apriori, difference, tower, doob, mollify or all")
        ->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    std::ostream null_stream(nullptr);
    std::ostream& log = quiet ? null_stream : std::cerr;

    RunConfig config;
    try {
        if (!config_path.empty())
            config = load_config(config_path);
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    if (*seed_opt)
        config.sim.seed = seed;
    if (*out_opt)
        config.output_dir = out_dir;

    if (price->parsed())
        return cmd_price(config, log);
    if (represent->parsed())
        return cmd_represent(config, log);

    std::vector<std::string> chosen;
    for (const auto& s : suites) {
        if (s == "all")
            chosen.insert(chosen.end(), kSuites.begin(), kSuites.end());
        else if (!s.empty())
            chosen.push_back(s);
    }
    (void)verify;
    return cmd_verify(config, chosen, log);
}

} // namespace gexp
