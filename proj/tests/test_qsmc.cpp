#include "gexp/qsmc.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace gexp;

namespace {

const Band kBand = Band::scalar(1.0, 2.0);

PayoffSpec terminal(const char* text) { return PayoffSpec::terminal(parse_payoff(text)); }

ControlFamily five_constants()
{
    ControlFamily f;
    for (double a : {1.0, 1.25, 1.5, 1.75, 2.0})
        f.add(ControlProcess::constant(a), "a=" + std::to_string(a));
    return f;
}

SimConfig sim(int paths, int steps, std::uint64_t seed, int threads = 1)
{
    SimConfig s;
    s.paths = paths;
    s.steps = steps;
    s.seed = seed;
    s.threads = threads;
    return s;
}

} // namespace

TEST(Controls, ValidationAndLookup)
{
    ControlProcess two;
    two.breakpoints = {0.0, 0.5, 1.0};
    two.values = {1.0, 2.0};
    EXPECT_NO_THROW(two.validate(kBand));
    EXPECT_EQ(two.alpha(0.25), 1.0);
    EXPECT_EQ(two.alpha(0.5), 2.0);
    EXPECT_EQ(two.alpha(1.0), 2.0);
    EXPECT_FALSE(two.is_constant());

    ControlProcess bad = two;
    bad.values = {0.5, 2.0};
    EXPECT_THROW(bad.validate(kBand), std::invalid_argument);
    bad = two;
    bad.breakpoints = {0.0, 0.7, 0.6};
    EXPECT_THROW(bad.validate(kBand), std::invalid_argument);
    bad = ControlProcess::constant(1e-7);
    EXPECT_THROW(bad.validate(Band::scalar(0.0, 2.0)), std::invalid_argument);
    EXPECT_NO_THROW(ControlProcess::constant(1e-6).validate(Band::scalar(0.0, 2.0)));
    EXPECT_THROW(ControlFamily().validate(kBand), std::invalid_argument);
}

TEST(Controls, ConstantGridCoversTheBand)
{
    const ControlFamily f = ControlFamily::constant_grid(kBand, 9);
    ASSERT_EQ(f.size(), 9u);
    EXPECT_EQ(f.controls.front().values[0], 1.0);
    EXPECT_EQ(f.controls.back().values[0], 2.0);
    EXPECT_EQ(f.labels.back(), "const_2");
    const ControlFamily degenerate = ControlFamily::constant_grid(Band::scalar(0.0, 1.0), 3);
    EXPECT_EQ(degenerate.controls.front().values[0], kDefaultFloor);
}

TEST(Controls, FamilyFileRoundTrip)
{
    ControlFamily f = ControlFamily::constant_grid(kBand, 3);
    f.add_random_piecewise(kBand, 2, 4, 17);
    std::stringstream ss;
    write_family(f, ss);
    std::stringstream in("# comment\n\n" + ss.str());
    const ControlFamily g = read_family(in);
    ASSERT_EQ(g.size(), f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        EXPECT_EQ(g.labels[i], f.labels[i]);
        EXPECT_EQ(g.controls[i].breakpoints, f.controls[i].breakpoints);
        EXPECT_EQ(g.controls[i].values, f.controls[i].values);
        EXPECT_EQ(g.controls[i].floor, f.controls[i].floor);
    }
    std::stringstream bad("control x breakpoints=0,1 values=1 colour=red\n");
    EXPECT_THROW(read_family(bad), std::invalid_argument);
}

TEST(Simulate, QuadraticVariationIsAccountedExactly)
{
    const PathBundle c = simulate(ControlProcess::constant(1.5), 10, 64, 3);
    EXPECT_EQ(c.qv()(64), 1.5);
    EXPECT_TRUE((c.paths().row(0).array() == 0.0).all());

    ControlProcess two;
    two.breakpoints = {0.0, 0.5, 1.0};
    two.values = {1.0, 2.0};
    const PathBundle b = simulate(two, 10, 64, 3);
    EXPECT_EQ(b.qv()(64), 1.5);
    EXPECT_EQ(b.qv()(32), 0.5);
}

TEST(Simulate, TerminalVarianceMatchesControl)
{
    const int n = 100000;
    const PathBundle b = simulate(ControlProcess::constant(2.0), n, 8, 21);
    const Eigen::ArrayXd x1 = b.paths().row(8).transpose().array();
    const double mean = x1.mean();
    const double var = (x1 - mean).square().sum() / (n - 1);
    // Var of the sample variance of N(0, 2) is 2 * 2^2 / N.
    EXPECT_NEAR(var, 2.0, 3.0 * std::sqrt(8.0 / n));
}

TEST(Simulate, DeterministicAndThreadIndependent)
{
    const PathBundle a = simulate(ControlProcess::constant(1.3), 500, 16, 99, 1);
    const PathBundle b = simulate(ControlProcess::constant(1.3), 500, 16, 99, 4);
    EXPECT_TRUE((a.paths().array() == b.paths().array()).all());
    const PathBundle c = simulate(ControlProcess::constant(1.3), 500, 16, 100, 1);
    EXPECT_FALSE((a.paths().array() == c.paths().array()).all());
    EXPECT_NE(derive_seed(1, 1), derive_seed(1, 2));
    EXPECT_NE(derive_seed(1, 1), derive_seed(2, 1));
}

TEST(Simulate, StreamedPathsMatchStoredBundles)
{
    const ControlFamily f = five_constants();
    const SimConfig s = sim(300, 32, 5);
    std::vector<PathBundle> bundles;
    for (const auto& c : f.controls)
        bundles.push_back(simulate(c, s));
    bool same = true;
    for_each_path(f, s, [&](std::size_t c, std::size_t p, std::span<const double> x) {
        for (int k = 0; k <= 32; ++k)
            same = same && x[k] == bundles[c].paths()(k, p);
    });
    EXPECT_TRUE(same);
}

TEST(Simulate, CsvExport)
{
    const PathBundle b = simulate(ControlProcess::constant(1.0), 2, 4, 1);
    std::stringstream ss;
    write_bundle_csv(b, ss);
    std::string line;
    std::getline(ss, line);
    EXPECT_EQ(line, "path_id,t,X,qv,alpha");
    int rows = 0;
    while (std::getline(ss, line))
        ++rows;
    EXPECT_EQ(rows, 10);
}

TEST(Estimators, ConstantSamplesAreExact)
{
    const std::vector<double> v(1000, 0.1);
    const MeanEstimate e = estimate_mean(v);
    EXPECT_EQ(e.mean, 0.1);
    EXPECT_EQ(e.se, 0.0);
}

TEST(Dual, ConstantFamilyOracles)
{
    const ControlFamily f = five_constants();
    const SimConfig s = sim(40000, 4, 8);
    const DualResult up = dual_value(terminal("sq(x1)"), f, s);
    EXPECT_NEAR(up.value, 2.0, 3.0 * up.se);
    EXPECT_EQ(up.argmax, 4u);
    const DualResult down = dual_value(terminal("neg(sq(x1))"), f, s);
    EXPECT_NEAR(down.value, -1.0, 3.0 * down.se);
    EXPECT_EQ(down.argmax, 0u);
    const DualResult c = dual_value(terminal("const(3)"), f, s);
    EXPECT_EQ(c.value, 3.0);
    EXPECT_EQ(c.table.size(), 5u);
}

TEST(Dual, LowerBoundAndFamilyEnlargement)
{
    const SimConfig s = sim(20000, 16, 9);
    const PayoffSpec p = terminal("min(abs(x1),1)");
    const double pde = g_expectation(p, kBand, SpaceTimeGrid{});
    ControlFamily small = ControlFamily::constant_grid(kBand, 3);
    const DualResult a = dual_value(p, small, s);
    small.add_random_piecewise(kBand, 6, 4, 2);
    const DualResult b = dual_value(p, small, s);
    EXPECT_GE(b.value, a.value);
    EXPECT_LE(b.value, pde + 2.0 * b.se + 1e-2);
}

TEST(Conditional, ReadsTheField)
{
    const PayoffSpec p = terminal("sq(x1)");
    SpaceTimeGrid grid;
    grid.n_x = 201;
    const ValueField field = conditional_expectation(p, kBand, grid);
    const PathBundle b = simulate(ControlProcess::constant(1.5), 200, 16, 4);
    const PathValues half = conditional_supremum(p, field, b, 0.5);
    for (int q = 0; q < 200; ++q) {
        const double x = b.paths()(8, q);
        EXPECT_NEAR(half.values[q], x * x + 1.0, 1e-2);
    }
    const PathValues end = conditional_supremum(p, field, b, 1.0);
    for (int q = 0; q < 200; ++q)
        EXPECT_EQ(end.values[q], b.paths()(16, q) * b.paths()(16, q));
    const PathValues start = conditional_supremum(p, field, b, 0.0);
    for (int q = 0; q < 200; ++q)
        EXPECT_EQ(start.values[q], field.at_origin());
    EXPECT_THROW(conditional_supremum(p, field, b, 0.3), std::invalid_argument);
}

TEST(Norms, LpNorm)
{
    SpaceTimeGrid grid;
    grid.n_x = 201;
    const ControlFamily f = five_constants();
    const SimConfig s = sim(4000, 16, 10);
    const PayoffSpec one = terminal("const(1)");
    EXPECT_EQ(lp_norm(one, 3.0, f, conditional_expectation(one, kBand, grid), s).value, 1.0);

    const PayoffSpec b1 = terminal("x1");
    const ValueField abs_field = conditional_expectation(b1.absolute(), kBand, grid);
    const NormEstimate n2 = lp_norm(b1, 2.0, f, abs_field, s);
    EXPECT_GE(n2.value, std::sqrt(2.0) - 3.0 * n2.se);
    const NormEstimate n1 = lp_norm(b1, 1.0, f, abs_field, s);
    EXPECT_LE(n1.value, n2.value);
    EXPECT_THROW(lp_norm(b1, 0.5, f, abs_field, s), std::invalid_argument);
}

TEST(Norms, HpAndSp)
{
    std::vector<PathBundle> bundles;
    std::vector<Eigen::MatrixXd> ones, zeros, consts;
    for (double a : {1.0, 1.5, 2.0}) {
        bundles.push_back(simulate(ControlProcess::constant(a), 100, 64, 2));
        ones.push_back(Eigen::MatrixXd::Ones(64, 100));
        zeros.push_back(Eigen::MatrixXd::Zero(65, 100));
        consts.push_back(Eigen::MatrixXd::Constant(65, 100, -0.75));
    }
    const NormEstimate h1 = hp_norm(ones, bundles, 2.0);
    EXPECT_NEAR(h1.value * h1.value, 2.0, 1e-12);
    EXPECT_EQ(h1.argmax, 2u);
    EXPECT_EQ(hp_norm(zeros, bundles, 2.0).value, 0.0);
    EXPECT_EQ(sp_norm(consts, 2.0).value, 0.75);
    EXPECT_THROW(hp_moment(Eigen::MatrixXd::Ones(10, 100), bundles[0], 2.0), std::invalid_argument);
}

TEST(QuadraticVariation, ItoIdentity)
{
    const PathBundle zero(ControlProcess::constant(1.5), 1, Eigen::MatrixXd::Zero(16, 1));
    const QvResidual z = qv_identity_check(zero);
    EXPECT_EQ(z.identity_max, 0.0);
    EXPECT_EQ(z.max_abs, 1.5);

    const PathBundle coarse = simulate(ControlProcess::constant(2.0), 1000, 1024, 12);
    const PathBundle fine = simulate(ControlProcess::constant(2.0), 1000, 4096, 12);
    const QvResidual rc = qv_identity_check(coarse);
    const QvResidual rf = qv_identity_check(fine);
    EXPECT_LE(rf.rms, 5.0 * std::sqrt(1.0 / 4096) * 2.0);
    EXPECT_NEAR(rf.rms / rc.rms, 0.5, 0.15);
    EXPECT_LE(rf.identity_max, 1e-10);
}
