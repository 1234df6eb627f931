#include "gexp/cli.hpp"
#include "gexp/config.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace gexp;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("gexp_test_" + name);
    fs::remove_all(dir);
    return dir;
}

// Small and quick.
RunConfig quick(const std::string& expr, const std::string& name)
{
    RunConfig c;
    c.payoff_expr = expr;
    c.grid.n_x = 201;
    c.sim.paths = 2000;
    c.sim.steps = 32;
    c.sim.seed = 3;
    c.sim.threads = 1;
    c.family_constants = 5;
    c.csv_paths = 4;
    c.output_dir = scratch(name).string();
    return c;
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

} // namespace

TEST(Config, DefaultsRoundTrip)
{
    const RunConfig c;
    EXPECT_EQ(parse_config(emit_config(c)), c);
}

TEST(Config, ParsesAllSections)
{
    const RunConfig c = parse_config(R"(
# comment
[band]
lower = 0.5
upper = 1.5
[payoff]
expr = sq(x2-x1)
times = 0.5, 1
lipschitz = 4
[grid]
n_x = 301
x_max = 7
cfl = 0.4
store_per_unit = 64
[mc]
paths = 123
steps = 16
seed = 99
threads = 2
[family]
constants = 4
random_piecewise = 2
pieces = 3
floor = 1e-5
[output]
dir = somewhere
csv_paths = 2
)");
    EXPECT_EQ(c.band_lower, 0.5);
    EXPECT_EQ(c.payoff_times, (std::vector<double>{0.5, 1.0}));
    EXPECT_EQ(c.lipschitz.value(), 4.0);
    EXPECT_FALSE(c.sup_bound.has_value());
    EXPECT_EQ(c.grid.n_x, 301);
    EXPECT_EQ(c.sim.seed, 99u);
    EXPECT_EQ(c.family().size(), 6u);
    EXPECT_EQ(c.output_dir, "somewhere");
    EXPECT_EQ(parse_config(emit_config(c)), c);
}

TEST(Config, RejectsBadInput)
{
    for (const char* bad : {"[band]\ncolour = red\n", "[nowhere]\nx = 1\n", "lower = 1\n", "[band]\nlower = abc\n",
                            "[band]\nlower = 3\n", "[grid]\ncfl = 0\n", "[mc]\npaths = 0\n",
                            "[payoff]\nexpr = foo(x1)\n", "[payoff]\ntimes = 1, 0.5\n", "[band]\nlower\n"})
        EXPECT_THROW(parse_config(bad), ConfigError) << bad;
    RunConfig c;
    c.sim.steps = -1;
    EXPECT_THROW(c.validate(), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/gexp.cfg"), ConfigError);
}

TEST(Config, FingerprintIgnoresLocationAndThreads)
{
    RunConfig a;
    RunConfig b = a;
    b.output_dir = "elsewhere";
    b.sim.threads = 7;
    EXPECT_EQ(config_fingerprint(a), config_fingerprint(b));
    b.sim.seed = 2;
    EXPECT_NE(config_fingerprint(a), config_fingerprint(b));
}

TEST(Price, KnownValues)
{
    std::ostringstream log;
    struct Case {
        const char* expr;
        double value;
        double tol;
    };
    for (const Case& k : {Case{"sq(x1)", 2.0, 1e-2}, Case{"const(3)", 3.0, 0.0}, Case{"call(x1,0)", 0.5642, 1e-2}}) {
        const RunConfig c = quick(k.expr, "price");
        ASSERT_EQ(cmd_price(c, log), kExitOk) << log.str();
        const json j = read_json(fs::path(c.output_dir) / "price.json");
        EXPECT_NEAR(j["value"].get<double>(), k.value, k.tol) << k.expr;
        EXPECT_FALSE(j["breach"].get<bool>());
        EXPECT_EQ(j["fingerprint"], config_fingerprint(c));
        EXPECT_FALSE(j["convergence"].empty());
        EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / "meta.json"));
    }
}

TEST(Price, ExitCodes)
{
    std::ostringstream log;
    RunConfig unstable = quick("sq(x1)", "unstable");
    unstable.grid.cfl = 1.5;
    EXPECT_EQ(cmd_price(unstable, log), kExitNumerical);
    RunConfig bad = quick("sq(x1)", "bad");
    bad.band_lower = 5.0;
    EXPECT_EQ(cmd_price(bad, log), kExitConfig);
}

TEST(Represent, LinearQuadraticAndConcave)
{
    std::ostringstream log;
    const RunConfig lin = quick("x1", "rep_lin");
    ASSERT_EQ(cmd_represent(lin, log), kExitOk) << log.str();
    const json a = read_json(fs::path(lin.output_dir) / "represent.json");
    EXPECT_TRUE(a["symmetric"].get<bool>());
    EXPECT_NEAR(a["k_abs_max"].get<double>(), 0.0, 1e-10);

    const RunConfig quad = quick("sq(x1)", "rep_quad");
    ASSERT_EQ(cmd_represent(quad, log), kExitOk) << log.str();
    const json b = read_json(fs::path(quad.output_dir) / "represent.json");
    EXPECT_FALSE(b["symmetric"].get<bool>());
    EXPECT_GE(b["gap"]["sup"].get<double>(), -0.05);
    EXPECT_LE(b["gap"]["sup"].get<double>(), 0.01);

    const RunConfig neg = quick("neg(sq(x1))", "rep_neg");
    ASSERT_EQ(cmd_represent(neg, log), kExitOk) << log.str();
    const json c = read_json(fs::path(neg.output_dir) / "represent.json");
    EXPECT_EQ(c["gap"]["argmax"], "const_1");

    std::istringstream csv(slurp(fs::path(quad.output_dir) / "decomposition.csv"));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "# fingerprint=" + config_fingerprint(quad));
    std::getline(csv, line);
    EXPECT_EQ(line, "control,path_id,t,Y,H,K,int_HdX,residual");
    int rows = 0;
    while (std::getline(csv, line))
        ++rows;
    EXPECT_EQ(rows, 5 * 4 * 33);
}

TEST(Verify, SuitesAndErrors)
{
    std::ostringstream log;
    const RunConfig c = quick("min(abs(x1),1)", "verify");
    EXPECT_EQ(cmd_verify(c, {"bdg", "mollify"}, log), kExitOk) << log.str();
    std::istringstream lines(slurp(fs::path(c.output_dir) / "reports.jsonl"));
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
        const json j = json::parse(line);
        EXPECT_EQ(j["config_fingerprint"], config_fingerprint(c));
        EXPECT_TRUE(j["pass"].get<bool>()) << j["name"];
        if (j["name"].get<std::string>().starts_with("bdg"))
            EXPECT_EQ(j["scope"], "quasi-sure claims certified over a finite family of 5 controls");
        ++n;
    }
    EXPECT_GE(n, 2);
    EXPECT_EQ(cmd_verify(c, {}, log), kExitConfig);
    EXPECT_EQ(cmd_verify(c, {"nonsense"}, log), kExitConfig);
}

TEST(Outputs, ByteIdenticalAcrossRunsAndThreads)
{
    std::ostringstream log;
    RunConfig a = quick("call(x1,0.2)", "det_a");
    RunConfig b = quick("call(x1,0.2)", "det_b");
    b.sim.threads = 3;
    ASSERT_EQ(cmd_represent(a, log), kExitOk);
    ASSERT_EQ(cmd_represent(b, log), kExitOk);
    for (const char* f : {"represent.json", "decomposition.csv"})
        EXPECT_EQ(slurp(fs::path(a.output_dir) / f), slurp(fs::path(b.output_dir) / f)) << f;
}

TEST(RunCli, ArgumentParsing)
{
    const fs::path dir = scratch("cli");
    fs::create_directories(dir);
    const fs::path cfg = dir / "run.cfg";
    RunConfig c = quick("sq(x1)", "cli_out");
    std::ofstream(cfg) << emit_config(c);
    const std::string out = (dir / "out").string();
    const std::string cfg_s = cfg.string();

    const char* price[] = {"gexp", "--quiet", "--config", cfg_s.c_str(), "--out", out.c_str(), "--seed", "5", "price"};
    EXPECT_EQ(run_cli(9, price), kExitOk);
    const json meta = read_json(fs::path(out) / "meta.json");
    EXPECT_EQ(meta["command"], "price");
    c.sim.seed = 5;
    c.output_dir = out;
    EXPECT_EQ(meta["fingerprint"], config_fingerprint(c));

    const char* verify[] = {"gexp", "--quiet", "--config", cfg_s.c_str(), "--out", out.c_str(), "verify", "--suite",
                            "mollify"};
    EXPECT_EQ(run_cli(9, verify), kExitOk);

    const char* none[] = {"gexp", "--quiet"};
    EXPECT_EQ(run_cli(2, none), kExitConfig);
    const char* missing[] = {"gexp", "--quiet", "--config", "/nonexistent.cfg", "price"};
    EXPECT_EQ(run_cli(5, missing), kExitConfig);
    const char* empty[] = {"gexp", "--quiet", "--config", cfg_s.c_str(), "verify"};
    EXPECT_EQ(run_cli(5, empty), kExitConfig);
}
