#include "gexp/validate.hpp"

#include <gtest/gtest.h>

#include <cmath>

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

SpaceTimeGrid small_grid()
{
    SpaceTimeGrid g;
    g.n_x = 201;
    return g;
}

const InequalityReport& find(const std::vector<InequalityReport>& rs, const std::string& prefix)
{
    for (const auto& r : rs)
        if (r.name.rfind(prefix, 0) == 0)
            return r;
    throw std::runtime_error("no report " + prefix);
}

} // namespace

TEST(Fingerprint, KnownVectorsAndSensitivity)
{
    EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
    EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
    const SimConfig s = sim(100, 16, 1);
    const std::string a = run_fingerprint(kBand, SpaceTimeGrid{}, s);
    EXPECT_EQ(a, run_fingerprint(kBand, SpaceTimeGrid{}, s));
    EXPECT_NE(a, run_fingerprint(kBand, SpaceTimeGrid{}, sim(100, 16, 2)));
    EXPECT_NE(a, run_fingerprint(Band::scalar(1.0, 2.5), SpaceTimeGrid{}, s));
    EXPECT_NE(a, run_fingerprint(kBand, SpaceTimeGrid{}, s, "x"));
}

TEST(Report, MakeAndJson)
{
    const InequalityReport r = InequalityReport::make("demo", 1.0, 0.9, 0.2, 3.0, 0.01, 0.02);
    EXPECT_TRUE(r.pass);
    EXPECT_NEAR(r.margin, 0.1, 1e-15);
    EXPECT_FALSE(InequalityReport::make("demo", 1.0, 0.9, 0.0).pass);
    EXPECT_TRUE(InequalityReport::make("tie", 1.0, 1.0, 0.0).pass);
    const std::string j = r.to_json();
    for (const char* key : {"\"name\"", "\"left\"", "\"right\"", "\"constant\"", "\"slack\"", "\"margin\"",
                            "\"pass\"", "\"se_left\"", "\"se_right\"", "\"fingerprint\""})
        EXPECT_NE(j.find(key), std::string::npos) << key;
    EXPECT_EQ(j.find('\n'), std::string::npos);
    const std::string table = format_report_table({r, r});
    EXPECT_NE(table.find("demo"), std::string::npos);
}

TEST(Bdg, ZeroAndIndicatorIntegrands)
{
    const ControlFamily f = ControlFamily::constant_grid(kBand, 3);
    const auto zero = bdg_check(Integrand::constant(0.0), kBand, f, sim(500, 32, 3));
    ASSERT_EQ(zero.size(), 2u);
    for (const auto& r : zero) {
        EXPECT_TRUE(r.pass);
        EXPECT_EQ(r.left, 0.0);
        EXPECT_EQ(r.right, 0.0);
    }
    // ||1{t<1/2}||_H2^2 = sup_a a/2 = 1.
    const auto ind = bdg_check(Integrand::indicator_before(0.5), kBand, f, sim(4000, 32, 4));
    const auto& lower = find(ind, "bdg.lower");
    EXPECT_NEAR(lower.left, 1.0, 1e-12);
    for (const auto& r : ind)
        EXPECT_TRUE(r.pass) << r.name;
    for (const auto& r : bdg_check(Integrand::smooth_bounded(), kBand, f, sim(4000, 32, 5)))
        EXPECT_TRUE(r.pass) << r.name;
}

TEST(Apriori, QuadraticAndLinear)
{
    const ControlFamily f = ControlFamily::constant_grid(kBand, 5);
    const PayoffSpec q = terminal("sq(x1)");
    const auto rq = apriori_check(q, kBand, conditional_expectation(q, kBand, small_grid()), f, sim(1000, 64, 6));
    ASSERT_EQ(rq.size(), 6u);
    for (const auto& r : rq) {
        EXPECT_TRUE(r.pass) << r.name;
        EXPECT_EQ(r.slack, 0.0);
    }
    EXPECT_EQ(rq.back().name, "apriori.aggregate");
    EXPECT_NEAR(apriori_aggregate_constant(), 4.0 + std::sqrt(54.0), 1e-12);

    const PayoffSpec l = terminal("x1");
    const auto rl = apriori_check(l, kBand, conditional_expectation(l, kBand, small_grid()), f, sim(500, 32, 6));
    for (std::size_t i = 0; i + 1 < rl.size(); ++i)
        EXPECT_NEAR(rl[i].left, 0.0, 1e-18);
}

TEST(Difference, IdenticalPayoffsHaveNoDelta)
{
    const ControlFamily f = ControlFamily::constant_grid(kBand, 3);
    const PayoffSpec p = terminal("min(abs(x1),1)");
    const DifferenceTerms d = difference_terms(p, p, kBand, small_grid(), f, sim(500, 32, 7));
    EXPECT_EQ(d.delta_y, 0.0);
    EXPECT_EQ(d.delta_h, 0.0);
    EXPECT_EQ(d.delta_k, 0.0);
    EXPECT_EQ(d.delta_xi, 0.0);
    EXPECT_GT(d.xi1, 0.0);
}

TEST(Difference, ShiftMovesYOnly)
{
    const ControlFamily f = ControlFamily::constant_grid(kBand, 3);
    const PayoffSpec p = terminal("min(abs(x1),1)");
    const DifferenceTerms d = difference_terms(p, p.shifted(0.1), kBand, small_grid(), f, sim(500, 32, 8));
    EXPECT_NEAR(d.delta_y, 0.1, 1e-6);
    EXPECT_NEAR(d.delta_xi, 0.1, 1e-6);
    EXPECT_NEAR(d.delta_h, 0.0, 1e-6);
    EXPECT_NEAR(d.delta_k, 0.0, 1e-6);
}

TEST(Difference, ScaledCallPassesBothInequalities)
{
    const ControlFamily f = ControlFamily::constant_grid(kBand, 5);
    const PayoffSpec p = terminal("call(x1,0)");
    const auto rs = difference_check(p, p.scaled(0.9), kBand, small_grid(), f, sim(2000, 64, 9));
    ASSERT_EQ(rs.size(), 2u);
    EXPECT_EQ(rs[0].name, "difference.Y");
    EXPECT_EQ(rs[1].name, "difference.HK");
    for (const auto& r : rs)
        EXPECT_TRUE(r.pass) << r.name << " " << r.left << " " << r.right;
}

TEST(Tower, QuadraticIncrementAndConstant)
{
    // E^G[(B_1 - B_1/2)^2] = 1 and E^G_t of it is the constant 1.
    const PayoffSpec inc({0.5, 1.0}, parse_payoff("sq(x2-x1)"));
    const TowerValues v = tower_values(inc, kBand, small_grid(), 0.5);
    EXPECT_NEAR(v.nested, 1.0, 1e-2);
    EXPECT_NEAR(v.refed, 1.0, 1e-2);
    EXPECT_TRUE(tower_check(inc, kBand, small_grid(), 0.5).pass);

    const PayoffSpec c = terminal("const(2)");
    const TowerValues w = tower_values(c, kBand, small_grid(), 0.5);
    EXPECT_NEAR(w.nested, 2.0, 1e-12);
    EXPECT_NEAR(w.refed, 2.0, 1e-12);

    EXPECT_THROW(tower_values(inc, kBand, small_grid(), 0.75), std::invalid_argument);
}

TEST(Doob, ConstantAndBoundedPayoff)
{
    EXPECT_NEAR(doob_constant(4.0), std::sqrt(2.0), 1e-15);
    EXPECT_THROW(doob_constant(2.0), std::invalid_argument);
    const ControlFamily f = ControlFamily::constant_grid(kBand, 3);
    const InequalityReport one = doob_check(terminal("const(1)"), 4.0, kBand, small_grid(), f, sim(500, 16, 10));
    EXPECT_TRUE(one.pass);
    EXPECT_NEAR(one.left, 1.0, 1e-12);
    EXPECT_NEAR(one.right, std::sqrt(2.0), 1e-12);
    EXPECT_TRUE(doob_check(terminal("min(abs(x1),1)"), 4.0, kBand, small_grid(), f, sim(4000, 16, 10)).pass);
}

TEST(LpConsistency, Holds)
{
    const ControlFamily f = ControlFamily::constant_grid(kBand, 5);
    const InequalityReport r =
        lp_consistency_check(terminal("call(x1,0)"), kBand, small_grid(), f, sim(4000, 16, 11));
    EXPECT_EQ(r.name, "lp.consistency");
    EXPECT_TRUE(r.pass);
}

TEST(Mollify, SweepAndCheck)
{
    const auto sweep = mollify_sweep(kBand, {0.1, 0.05}, uniform_grid(-5.0, 5.0, 0.25));
    ASSERT_EQ(sweep.size(), 2u);
    for (const auto& p : sweep) {
        EXPECT_GE(p.min_gap, -1e-12);
        EXPECT_LE(p.max_gap, p.cstar * p.epsilon + 1e-12);
        EXPECT_LE(p.legendre_max, 1e-12);
        EXPECT_GE(p.legendre_min, -p.cstar * p.epsilon - 1e-12);
    }
    const auto rs = mollify_check(kBand, {0.1, 0.05, 0.025});
    for (const auto& r : rs)
        EXPECT_TRUE(r.pass) << r.name;
    EXPECT_EQ(rs.back().name, "mollify.ratio_spread");
    EXPECT_EQ(uniform_grid(0.0, 1.0, 0.25).size(), 5u);
}

TEST(Determinism, ReportsRepeatBitForBit)
{
    const ControlFamily f = ControlFamily::constant_grid(kBand, 3);
    const auto a = bdg_check(Integrand::smooth_bounded(), kBand, f, sim(300, 16, 12));
    const auto b = bdg_check(Integrand::smooth_bounded(), kBand, f, sim(300, 16, 12));
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        EXPECT_EQ(a[i].to_json(), b[i].to_json());
    const auto c = bdg_check(Integrand::smooth_bounded(), kBand, f, sim(300, 16, 13));
    EXPECT_NE(a[0].to_json(), c[0].to_json());
}
