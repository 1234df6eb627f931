#include "gexp/represent.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace gexp;

namespace {

const Band kBand = Band::scalar(1.0, 2.0);

PayoffSpec terminal(const char* text) { return PayoffSpec::terminal(parse_payoff(text)); }

SimConfig sim(int paths, int steps, std::uint64_t seed)
{
    SimConfig s;
    s.paths = paths;
    s.steps = steps;
    s.seed = seed;
    return s;
}

struct Fixture {
    PayoffSpec payoff;
    ValueField field;
    explicit Fixture(const char* text, SpaceTimeGrid grid = {})
        : payoff(terminal(text))
        , field(conditional_expectation(payoff, kBand, grid))
    {}
    Decomposition run(double a, int paths, int steps, std::uint64_t seed = 1) const
    {
        return extract(payoff, kBand, field, simulate(ControlProcess::constant(a), paths, steps, seed));
    }
};

} // namespace

TEST(Extract, QuadraticUnderExtremeControls)
{
    const Fixture f("sq(x1)");
    const Decomposition top = f.run(2.0, 200, 64);
    const Decomposition bottom = f.run(1.0, 200, 64);
    for (int p = 0; p < 200; ++p) {
        EXPECT_NEAR(top.k(64, p), 0.0, 1e-6);
        EXPECT_NEAR(bottom.k(64, p), 1.0, 1e-3);
        EXPECT_EQ(top.k(0, p), 0.0);
    }
}

TEST(Extract, LinearPayoffHasNoK)
{
    const Fixture f("x1");
    const Decomposition d = f.run(1.5, 200, 64);
    EXPECT_LE((d.h.array() - 1.0).abs().maxCoeff(), 1e-10);
    EXPECT_LE(d.k.array().abs().maxCoeff(), 1e-10);
    EXPECT_LE(residual(d).max, 1e-10);
    EXPECT_EQ(monotonicity(d), 0.0);
}

TEST(Extract, TerminalConsistencyAndNonnegativeK)
{
    const Fixture f("min(abs(x1),1)");
    for (double a : {1.0, 1.5, 2.0}) {
        const Decomposition d = f.run(a, 500, 64, 3);
        EXPECT_EQ(d.n_excluded, 0);
        for (int p = 0; p < d.n_paths(); ++p) {
            EXPECT_NEAR(d.y(64, p), d.xi(p), 2e-3);
            EXPECT_GE(d.k(64, p), -1e-12);
        }
        EXPECT_GE(monotonicity(d), -1e-6);
    }
}

TEST(Residual, QuadraticResidualIsTheQuadraticVariationDefect)
{
    // For x^2 the field is exact, so Y - Y0 - int H dX + K reduces to
    // sum dX^2 - alpha t, computed here directly from the paths.
    const Fixture f("sq(x1)");
    const PathBundle b = simulate(ControlProcess::constant(1.5), 300, 256, 7);
    const Decomposition d = extract(f.payoff, kBand, f.field, b);
    const ResidualSummary r = residual(d);
    for (int p = 0; p < 300; ++p) {
        double realized = 0.0, sup = 0.0;
        for (int k = 0; k < 256; ++k) {
            const double dx = b.paths()(k + 1, p) - b.paths()(k, p);
            realized += dx * dx;
            sup = std::max(sup, std::abs(realized - 1.5 * (k + 1) / 256.0));
        }
        EXPECT_NEAR(r.per_path[p], sup, 2e-3);
    }
}

TEST(Residual, ShrinksUnderRefinement)
{
    SpaceTimeGrid coarse_grid;
    coarse_grid.n_x = 201;
    const Fixture coarse("sq(x1)", coarse_grid);
    const Fixture fine("sq(x1)");
    const double rc = residual(coarse.run(1.5, 1000, 256, 9)).rms;
    const double rf = residual(fine.run(1.5, 1000, 1024, 9)).rms;
    EXPECT_LE(rf, 0.75 * rc);
}

TEST(Monotonicity, ConvexPayoffs)
{
    const Fixture f("call(x1,0.3)");
    for (double a : {1.0, 2.0})
        EXPECT_GE(monotonicity(f.run(a, 300, 64)), -1e-8);
}

TEST(Gap, ExtremeControlsAttainZero)
{
    const ControlFamily family = ControlFamily::constant_grid(kBand, 5);
    const SimConfig s = sim(2000, 64, 4);

    const Fixture up("sq(x1)");
    const GapResult g = gmartingale_gap(up.payoff, kBand, up.field, family, s);
    EXPECT_EQ(g.argmax, 4u);
    EXPECT_NEAR(g.sup, 0.0, 1e-6);
    for (std::size_t c = 0; c + 1 < family.size(); ++c)
        EXPECT_LT(g.per_control[c].estimate.mean, -0.1);

    const Fixture down("neg(sq(x1))");
    const GapResult h = gmartingale_gap(down.payoff, kBand, down.field, family, s);
    EXPECT_EQ(h.argmax, 0u);
    EXPECT_NEAR(h.sup, 0.0, 1e-6);

    const Fixture lin("x1");
    const GapResult l = gmartingale_gap(lin.payoff, kBand, lin.field, family, s);
    for (const auto& e : l.per_control)
        EXPECT_NEAR(e.estimate.mean, 0.0, 1e-12);
    EXPECT_EQ(l.exclusion_rate, 0.0);
}

TEST(Symmetry, Classification)
{
    const ControlFamily family = ControlFamily::constant_grid(kBand, 5);
    const SimConfig s = sim(500, 32, 5);
    const Fixture lin("x1");
    const SymmetryEvidence a = is_symmetric(lin.payoff, kBand, lin.field, family, s);
    EXPECT_TRUE(a.symmetric);
    EXPECT_NEAR(a.value, 0.0, 1e-12);
    EXPECT_NEAR(a.expectation_sum, 0.0, 1e-12);

    const Fixture quad("sq(x1)");
    const SymmetryEvidence b = is_symmetric(quad.payoff, kBand, quad.field, family, s);
    EXPECT_FALSE(b.symmetric);
    EXPECT_NEAR(b.expectation_sum, 1.0, 2e-2);

    const Band classical = Band::scalar(1.5, 1.5);
    const ValueField cf = conditional_expectation(quad.payoff, classical, SpaceTimeGrid{});
    const SymmetryEvidence c =
        is_symmetric(quad.payoff, classical, cf, ControlFamily::constant_grid(classical, 1), s);
    EXPECT_TRUE(c.symmetric);
}

TEST(Supermartingale, MeanOfYIsNonIncreasing)
{
    const Fixture f("min(abs(x1),1)");
    for (double a : {1.0, 1.5, 2.0}) {
        const Decomposition d = f.run(a, 4000, 32, 6);
        for (int s = 1; s <= 32; ++s) {
            const Eigen::ArrayXd step = (d.y.row(s) - d.y.row(s - 1)).transpose().array();
            const double mean = step.mean();
            const double se = std::sqrt((step - mean).square().sum() / (step.size() - 1) / step.size());
            EXPECT_LE(mean, 2.0 * se + 1e-3) << "a=" << a << " step " << s;
        }
    }
}

TEST(Supermartingale, MartingaleUnderUpperControlForConvexPayoff)
{
    const Fixture f("call(x1,0)");
    const Decomposition d = f.run(2.0, 20000, 16, 8);
    const double y0 = d.y(0, 0);
    for (int s = 0; s <= 16; ++s) {
        const Eigen::ArrayXd row = d.y.row(s).transpose().array();
        const double se = std::sqrt((row - row.mean()).square().sum() / (row.size() - 1) / row.size());
        EXPECT_NEAR(row.mean(), y0, 3.0 * se + 2e-3);
    }
}

TEST(Decomposition, CsvExport)
{
    const Fixture f("x1");
    Decomposition d = f.run(1.0, 3, 4);
    d.label = "const_1";
    std::stringstream ss;
    write_decomposition_csv(d, ss, 2);
    std::string line;
    std::getline(ss, line);
    EXPECT_EQ(line, "control,path_id,t,Y,H,K,int_HdX,residual");
    int rows = 0;
    while (std::getline(ss, line)) {
        EXPECT_EQ(line.rfind("const_1,", 0), 0u);
        ++rows;
    }
    EXPECT_EQ(rows, 2 * 5);
}
