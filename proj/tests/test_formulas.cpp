#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "kacflow/formulas.hpp"
#include "kacflow/oracle.hpp"

using namespace kacflow;

namespace {

SuspensionFlow cycle_flow() {
    auto sys = BaseSystem::cycle(3);
    return SuspensionFlow::exact(sys, RoofFunction::per_state(sys, {1, 2, 3}));
}

SuspensionFlow doubling_with(double c) { return SuspensionFlow::exact(BaseSystem::doubling(), RoofFunction::constant(c)); }

SuspensionFlow wave_rotation() {
    auto tau = RoofFunction::closed_form([](double x) { return 2.0 + std::cos(2.0 * std::numbers::pi * x); }, 1.0, 2.0,
                                         "2+cos(2*pi*x)", 3.0);
    return SuspensionFlow::exact(BaseSystem::rotation(0.6180339887), tau);
}

MonteCarloOptions mc(std::uint64_t seed, std::size_t n = 1'000'000) {
    MonteCarloOptions o;
    o.samples = n;
    o.seed = seed;
    o.workers = 4;
    return o;
}

const CylinderSet kHalf{BaseSet::interval(0.0, 0.5), 0.0, 1.0};
const CylinderSet kCycleA{BaseSet::states({0}), 0.0, 0.5};

GraphSet slanted() {
    return GraphSet::parallel(BaseSet::interval(0.0, 0.5), Height::function([](double x) { return x / 2; }, "x/2"),
                              0.25);
}

} // namespace

TEST(EstimateReport, ZScoreAndValidity) {
    const auto r = make_report("q", 1.1, 0.05, 1.0, 1000, 0);
    EXPECT_NEAR(r.z_score, 2.0, 1e-12);
    EXPECT_TRUE(r.passes());
    EXPECT_FALSE(make_report("q", 1.3, 0.05, 1.0, 1000, 0).passes());
    EXPECT_FALSE(make_report("q", 1.0, 0.05, 1.0, 1000, 1).valid());
    EXPECT_TRUE(make_report("q", 1.0, 0.05, 1.0, 10'000, 9).valid());
    EXPECT_TRUE(make_report("q", 6.0, 0.0, 6.0, 10, 0).passes());
    EXPECT_TRUE(std::isinf(make_report("q", 6.0 + 1e-9, 0.0, 6.0, 10, 0).z_score));
}

TEST(MeanEscape, Examples) {
    EXPECT_EQ(mean_escape_cylinder(CylinderSet{BaseSet::interval(0.0, 1.0), 0.0, 1.0}), 0.5);
    EXPECT_EQ(mean_escape_cylinder(CylinderSet{BaseSet::interval(0.0, 1.0), 0.25, 0.5}), 0.125);
    EXPECT_NEAR(mean_escape_cylinder(CylinderSet{BaseSet::interval(0.0, 1.0), 0.3, 0.3 + 1e-6}), 5e-7, 1e-15);
}

TEST(RhsTheoremA, Examples) {
    EXPECT_DOUBLE_EQ(rhs_theorem_A(doubling_with(1.0), kHalf).value(), 1.5);
    EXPECT_DOUBLE_EQ(constant_roof_full_cylinder(1.0, 0.5), 1.5);
    const CylinderSet deep{BaseSet::prefix("00"), 0.5, 1.5};
    const auto r = rhs_theorem_A(doubling_with(2.0), deep);
    EXPECT_DOUBLE_EQ(r.value(), 7.5);
    EXPECT_NEAR(r.escape_form, r.roof_form, 1e-12 * r.roof_form);
    EXPECT_DOUBLE_EQ(rhs_theorem_A(doubling_with(1.0), CylinderSet{BaseSet::interval(0.0, 1.0), 0.0, 1.0}).value(), 0.5);
    EXPECT_DOUBLE_EQ(rhs_theorem_A(cycle_flow(), kCycleA).value(), 5.75);
    auto sys = BaseSystem::permutation({1, 0, 2}, {0.5, 0.5, 0.0});
    const auto null_flow = SuspensionFlow::exact(sys, RoofFunction::constant(1.0));
    EXPECT_THROW((void)rhs_theorem_A(null_flow, CylinderSet{BaseSet::states({2}), 0, 1}), EmptyProjection);
}

TEST(RhsTheoremA, FormsAgreeEverywhere) {
    RandomStream rng(51);
    for (int i = 0; i < 2000; ++i) {
        const double c = 0.1 + 10.0 * rng.uniform();
        const double lo = 0.9 * rng.uniform();
        const double hi = lo + (1.0 - lo) * (0.01 + 0.99 * rng.uniform());
        const double t1 = c * 0.5 * rng.uniform();
        const double t2 = t1 + (c - t1) * (0.01 + 0.99 * rng.uniform());
        const auto r = rhs_theorem_A(doubling_with(c), CylinderSet{BaseSet::interval(lo, hi), t1, t2});
        ASSERT_TRUE(nearly_equal(r.escape_form, r.roof_form));
    }
}

TEST(McMeanReturn, Examples) {
    const auto a = mc_mean_return(doubling_with(1.0), FlowSet{kHalf}, mc(101));
    EXPECT_EQ(a.analytic_value, 1.5);
    EXPECT_TRUE(a.passes()) << a.mc_estimate << " z=" << a.z_score;
    EXPECT_NEAR(a.mc_stderr, 1.5e-3, 3e-4);

    const auto b = mc_mean_return(cycle_flow(), FlowSet{kCycleA}, mc(102, 200'000));
    EXPECT_EQ(b.analytic_value, 5.75);
    EXPECT_TRUE(b.passes()) << b.mc_estimate;

    const auto c =
        mc_mean_return(doubling_with(1.0), FlowSet{CylinderSet{BaseSet::interval(0.0, 1.0), 0.0, 1.0}}, mc(103, 200'000));
    EXPECT_EQ(c.analytic_value, 0.5);
    EXPECT_TRUE(c.passes()) << c.mc_estimate;
}

TEST(McMeanReturn, DeepCylinderMatchesTheoremA) {
    const CylinderSet deep{BaseSet::prefix("00"), 0.5, 1.5};
    const auto r = mc_mean_return(doubling_with(2.0), FlowSet{deep}, mc(104));
    EXPECT_DOUBLE_EQ(r.analytic_value, 7.5);
    EXPECT_TRUE(r.passes()) << r.mc_estimate << " z=" << r.z_score;
}

TEST(McMeanReturn, NonConstantRoofs) {
    const CylinderSet a{BaseSet::interval(0.1, 0.4), 0.3, 0.95};
    const auto r = mc_mean_return(wave_rotation(), FlowSet{a}, mc(105));
    EXPECT_TRUE(r.passes()) << r.mc_estimate << " vs " << r.analytic_value;

    auto bern = BaseSystem::expanding(2, {0.3, 0.7});
    auto tau = RoofFunction::piecewise(bern, PiecewiseConstant{{{BaseSet::prefix("0"), 0.5}, {BaseSet::prefix("1"), 2.0}}});
    const auto flow = SuspensionFlow::exact(bern, tau);
    const auto s = mc_mean_return(flow, FlowSet{CylinderSet{BaseSet::prefix("01"), 0.0, 0.5}}, mc(106));
    EXPECT_TRUE(s.passes()) << s.mc_estimate << " vs " << s.analytic_value;
}

TEST(McMeanReturn, SameSeedSameBits) {
    const auto a = mc_mean_return(wave_rotation(), FlowSet{CylinderSet{BaseSet::interval(0.1, 0.4), 0.0, 0.9}}, mc(7, 50'000));
    const auto b = mc_mean_return(wave_rotation(), FlowSet{CylinderSet{BaseSet::interval(0.1, 0.4), 0.0, 0.9}}, mc(7, 50'000));
    EXPECT_EQ(a.mc_estimate, b.mc_estimate);
    EXPECT_EQ(a.mc_stderr, b.mc_stderr);
}

TEST(CrossSection, Examples) {
    const auto unit = cross_section_mean_return(doubling_with(1.0), BaseSet::interval(0.0, 0.5), mc(111, 100'000));
    EXPECT_EQ(unit.analytic_value, 2.0);
    EXPECT_TRUE(unit.passes());

    const auto rot = cross_section_mean_return(wave_rotation(), BaseSet::interval(0.0, 0.3), mc(112));
    EXPECT_NEAR(rot.analytic_value, 20.0 / 3.0, 1e-14);
    EXPECT_TRUE(rot.passes()) << rot.mc_estimate << " z=" << rot.z_score;

    const auto cyc = cross_section_mean_return(cycle_flow(), BaseSet::states({0}), mc(113, 1000));
    EXPECT_EQ(cyc.mc_estimate, 6.0);
    EXPECT_EQ(cyc.mc_stderr, 0.0);
    EXPECT_EQ(cyc.analytic_value, 6.0);
    EXPECT_TRUE(cyc.passes());
}

TEST(EntropyQuotient, Examples) {
    const auto q = entropy_quotient(doubling_with(1.0), BaseSet::interval(0.0, 0.5));
    EXPECT_TRUE(nearly_equal(q.quotient, 2.0));
    EXPECT_TRUE(nearly_equal(q.quotient, q.mean_return));
    EXPECT_TRUE(nearly_equal(entropy_quotient(doubling_with(3.0), BaseSet::prefix("0")).quotient, 6.0));

    auto bern = BaseSystem::expanding(2, {0.3, 0.7});
    const auto flow = SuspensionFlow::exact(bern, RoofFunction::constant(1.7));
    for (const char* prefix : {"0", "1", "01", "110"}) {
        const auto e = entropy_quotient(flow, BaseSet::prefix(prefix));
        EXPECT_TRUE(nearly_equal(e.quotient, 1.7 / bern.measure(BaseSet::prefix(prefix))));
        EXPECT_DOUBLE_EQ(e.base_entropy, -0.3 * std::log(0.3) - 0.7 * std::log(0.7));
    }
    EXPECT_THROW((void)entropy_quotient(wave_rotation(), BaseSet::interval(0.0, 0.3)), ZeroEntropyBase);
    EXPECT_THROW((void)entropy_quotient(cycle_flow(), BaseSet::states({0})), ZeroEntropyBase);
}

TEST(TheoremB, ReducesToTheoremAOnConstantHeights) {
    const auto flow = doubling_with(1.0);
    const auto g = GraphSet::between(BaseSet::interval(0.0, 0.5), Height::constant(0.25), Height::constant(0.75));
    const auto b = rhs_theorem_B(flow, g, TheoremBOptions{mc(121), true});
    const double a = rhs_theorem_A(flow, CylinderSet{BaseSet::interval(0.0, 0.5), 0.25, 0.75}).value();
    EXPECT_TRUE(nearly_equal(b.value, a));
    EXPECT_EQ(b.std_error, 0.0);

    // fully sampled terms agree with the same value statistically
    const auto s = rhs_theorem_B(flow, g, TheoremBOptions{mc(122, 400'000), false});
    EXPECT_LE(std::abs(s.value - a), 4.0 * s.std_error + 1e-12);
    EXPECT_NEAR(s.escape.value, 0.25, 1e-12);
}

TEST(TheoremB, ParallelSides) {
    const auto flow = doubling_with(1.0);
    EXPECT_DOUBLE_EQ(parallel_sides_closed_form(flow, slanted()), 1.875);
    const auto ps = parallel_sides_rhs(flow, slanted(), mc(123, 400'000));
    EXPECT_DOUBLE_EQ(ps.value, 1.875);
    EXPECT_TRUE(ps.telescoping.passes()) << ps.telescoping.mc_estimate;

    const auto b = rhs_theorem_B(flow, slanted(), TheoremBOptions{mc(124, 400'000), true});
    EXPECT_LE(std::abs(b.value - 1.875), 4.0 * b.std_error);
    const auto full = rhs_theorem_B(flow, slanted(), TheoremBOptions{mc(125, 400'000), false});
    EXPECT_LE(std::abs(full.value - 1.875), 4.0 * full.std_error);

    // constant h1 gives the cylinder value
    const auto flat = GraphSet::parallel(BaseSet::interval(0.0, 0.5), Height::constant(0.25), 0.5);
    EXPECT_TRUE(nearly_equal(parallel_sides_closed_form(flow, flat),
                             rhs_theorem_A(flow, CylinderSet{BaseSet::interval(0.0, 0.5), 0.25, 0.75}).value()));
    // I the whole space, constant roof 2: c/2 + (2 - c)
    const auto whole = GraphSet::parallel(BaseSet::interval(0.0, 1.0), Height::constant(0.0), 0.5);
    EXPECT_DOUBLE_EQ(parallel_sides_closed_form(doubling_with(2.0), whole), 0.25 + 1.5);
}

TEST(TheoremB, CrossValidationAgainstMonteCarlo) {
    const auto r = theorem_B_cross_check(doubling_with(1.0), slanted(), mc(126));
    // the formula side carries a sampled correction term
    EXPECT_NEAR(r.analytic_value, 1.875, 0.01);
    EXPECT_TRUE(r.passes()) << r.mc_estimate << " z=" << r.z_score;
}

TEST(TheoremB, NonConstantWidth) {
    // h1 = x/4, h2 = 1/2 + x/2 over the rotation with the cosine roof
    const auto flow = wave_rotation();
    const auto g = GraphSet::between(BaseSet::interval(0.2, 0.45), Height::function([](double x) { return x / 4; }, "x/4"),
                                     Height::function([](double x) { return 0.5 + x / 2; }, "0.5+x/2"), 0.75);
    validate(flow, g);
    const auto rhs = rhs_theorem_B(flow, g, TheoremBOptions{mc(127), true});
    const auto lhs = mc_mean_return(flow, FlowSet{g}, mc(128));
    EXPECT_TRUE(std::isnan(lhs.analytic_value));
    const double se = std::hypot(lhs.mc_stderr, rhs.std_error);
    EXPECT_LE(std::abs(lhs.mc_estimate - rhs.value), 4.0 * se) << lhs.mc_estimate << " vs " << rhs.value;
}

TEST(Helmberg, DoublingUnitRoof) {
    const auto flow = doubling_with(1.0);
    const auto rows = helmberg_limit(flow, kHalf, {0.1, 0.05, 0.01}, mc(131));
    ASSERT_EQ(rows.size(), 3u);
    for (const auto& e : rows) {
        EXPECT_EQ(e.report.analytic_value, 0.5);
        EXPECT_DOUBLE_EQ(e.bias_bound, e.s / 4.0);
        EXPECT_TRUE(e.within_bound()) << e.s << ": " << e.report.mc_estimate;
        EXPECT_LE(std::abs(e.report.mc_estimate - e.finite_s_expectation), 4.0 * e.report.mc_stderr);
    }
    EXPECT_THROW((void)helmberg_limit(flow, kHalf, {1.5}, mc(1)), InvalidExitWidth);
}

TEST(Helmberg, FullWidthUnwindsToMeanReturn) {
    const auto flow = doubling_with(1.0);
    const auto rows = helmberg_limit(flow, kHalf, {1.0}, mc(132, 200'000));
    MonteCarloOptions same = mc(132, 200'000);
    const auto m = mc_mean_return(flow, FlowSet{kHalf}, same);
    EXPECT_DOUBLE_EQ(rows[0].report.mc_estimate, m.mc_estimate * bar_mu_of_set(flow, kHalf) / 1.0);
}

TEST(Helmberg, CycleMatchesExactLimit) {
    using namespace kacflow::oracle;
    const RationalFlowModel model({1, 2, 0}, {Rational(1, 3), Rational(1, 3), Rational(1, 3)}, {1, 2, 3});
    const auto suite = oracle_full_identity_suite(model, make_cylinder(model, {0}, 0, Rational(1, 2)));
    Rational limit = -1;
    for (const auto& c : suite.checks) {
        if (c.name == "helmberg_limit") limit = c.lhs;
    }
    ASSERT_EQ(limit, Rational(11, 12));
    const auto rows = helmberg_limit(cycle_flow(), kCycleA, {0.5, 0.1, 0.01}, mc(133, 100'000));
    for (const auto& e : rows) {
        EXPECT_DOUBLE_EQ(e.report.analytic_value, 11.0 / 12.0);
        EXPECT_TRUE(e.within_bound()) << e.report.mc_estimate;
    }
}

TEST(Stat1, Examples) {
    const auto a = stat1_identity_check(doubling_with(1.0), kHalf, mc(141, 400'000));
    EXPECT_DOUBLE_EQ(a.analytic_value, 0.75);
    EXPECT_TRUE(a.passes());
    const auto b = stat1_identity_check(cycle_flow(), kCycleA, mc(142, 100'000));
    EXPECT_DOUBLE_EQ(b.analytic_value, 23.0 / 48.0);
    EXPECT_TRUE(b.passes()) << b.mc_estimate;
    const CylinderSet full{BaseSet::interval(0.0, 1.0), 0.0, 2.0};
    const auto c = stat1_identity_check(doubling_with(2.0), full, mc(143, 100'000));
    EXPECT_DOUBLE_EQ(c.analytic_value, 1.0 * 2.0 / 2.0);
    EXPECT_TRUE(c.passes());
}

TEST(Linearity, Examples) {
    const CylinderSet a{BaseSet::interval(0.0, 0.5), 0.0, 0.5};
    const auto t = linearity_scan(doubling_with(1.0), a, {1.0, 2.0, 3.0});
    EXPECT_TRUE(t.affine());
    EXPECT_DOUBLE_EQ(t.slope, 2.0);
    EXPECT_EQ(t.expected_slope, 2.0);

    const CylinderSet whole{BaseSet::interval(0.0, 1.0), 0.2, 0.9};
    const auto w = linearity_scan(wave_rotation(), whole, {1.0, 1.5, 2.0, 3.0});
    EXPECT_TRUE(w.affine());
    EXPECT_NEAR(w.intercept, 0.35 - 0.7, 1e-12);

    const auto c = linearity_scan(cycle_flow(), kCycleA, {1.0, 1.5, 2.0, 3.0});
    EXPECT_TRUE(c.affine());
    EXPECT_DOUBLE_EQ(c.slope, 3.0);

    EXPECT_THROW((void)linearity_scan(doubling_with(1.0), a, {1.0, 0.4}), ScaleRangeError);
    EXPECT_THROW((void)linearity_scan(doubling_with(1.0), a, {1.0}), ScaleRangeError);
    EXPECT_THROW((void)linearity_scan(doubling_with(1.0), a, {2.0, 2.0}), ScaleRangeError);
}
