#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "kacflow/formulas.hpp"
#include "support/flow_oracles.hpp"

using namespace kacflow;
using kacflow::testing::walk_fibers;

namespace {

SuspensionFlow cycle_flow() {
    auto sys = BaseSystem::cycle(3);
    auto tau = RoofFunction::per_state(sys, {1, 2, 3});
    return SuspensionFlow::exact(sys, tau);
}

SuspensionFlow unit_doubling() { return SuspensionFlow::exact(BaseSystem::doubling(), RoofFunction::constant(1.0)); }

SuspensionFlow wave_rotation() {
    auto tau = RoofFunction::closed_form([](double x) { return 2.0 + std::cos(2.0 * std::numbers::pi * x); }, 1.0, 2.0,
                                         "2+cos(2*pi*x)", 3.0);
    return SuspensionFlow::exact(BaseSystem::rotation(0.6180339887), tau);
}

SuspensionFlow step_bernoulli() {
    auto sys = BaseSystem::expanding(2, {0.3, 0.7});
    auto tau = RoofFunction::piecewise(
        sys, PiecewiseConstant{{{BaseSet::prefix("0"), 0.75}, {BaseSet::prefix("1"), 1.25}}});
    return SuspensionFlow::exact(sys, tau);
}

} // namespace

TEST(Canonicalize, Examples) {
    const auto unit = unit_doubling();
    auto p = unit.canonicalize(0.2, 0.0);
    EXPECT_EQ(p.x, 0.2);
    EXPECT_EQ(p.t, 0.0);
    p = unit.canonicalize(0.2, 1.0);
    EXPECT_DOUBLE_EQ(p.x, 0.4);
    EXPECT_EQ(p.t, 0.0);

    const auto cyc = cycle_flow();
    const auto w = walk_fibers(cyc.base(), cyc.roof(), {0, 0.0}, 2.5);
    p = cyc.canonicalize(0, 2.5);
    EXPECT_EQ(p.x, w.point.x);
    EXPECT_EQ(p.t, w.point.t);
    EXPECT_EQ(p.x, 1);
    EXPECT_EQ(p.t, 1.5);
    EXPECT_THROW((void)cyc.canonicalize(0, -1.0), ConfigurationError);
}

TEST(Evolve, Examples) {
    const auto cyc = cycle_flow();
    const FlowPoint p{0, 0.5};
    const auto q = cyc.evolve(p, 0.0);
    EXPECT_EQ(q.x, p.x);
    EXPECT_EQ(q.t, p.t);

    const auto w = walk_fibers(cyc.base(), cyc.roof(), p, 4.0);
    const auto r = cyc.evolve(p, 4.0);
    EXPECT_EQ(r.x, 2);
    EXPECT_EQ(r.t, 1.5);
    EXPECT_EQ(r.x, w.point.x);
    EXPECT_EQ(r.t, w.point.t);

    const auto d = unit_doubling().evolve({0.2, 0.0}, 2.5);
    EXPECT_DOUBLE_EQ(d.x, 0.8);
    EXPECT_DOUBLE_EQ(d.t, 0.5);
    EXPECT_THROW((void)cyc.evolve(p, -0.1), ConfigurationError);
}

TEST(CrossingCount, Examples) {
    const auto cyc = cycle_flow();
    EXPECT_EQ(cyc.crossing_count({0, 0.5}, 0.25), 0);
    EXPECT_EQ(cyc.crossing_count({0, 0.5}, 4.0), 2);
    const auto unit = unit_doubling();
    for (int n = 0; n < 40; ++n) EXPECT_EQ(unit.crossing_count({0.3, 0.0}, n), n);
}

TEST(CrossingCount, LandingOnATopCrossesIt) {
    const auto cyc = cycle_flow();
    EXPECT_EQ(cyc.crossing_count({0, 0.0}, 1.0), 1);
    const auto p = cyc.evolve({0, 0.0}, 3.0);
    EXPECT_EQ(p.x, 2);
    EXPECT_EQ(p.t, 0.0);
}

TEST(Evolve, AgreesWithFiberWalk) {
    RandomStream rng(31);
    for (const auto& flow : {cycle_flow(), unit_doubling(), wave_rotation(), step_bernoulli()}) {
        FlowMeasureSampler sample(flow);
        for (int i = 0; i < 2000; ++i) {
            const FlowPoint p = sample(rng);
            const double s = 20.0 * rng.uniform();
            const auto q = flow.evolve(p, s);
            const auto w = walk_fibers(flow.base(), flow.roof(), p, s);
            ASSERT_EQ(q.x, w.point.x);
            ASSERT_NEAR(q.t, w.point.t, 1e-12 * (1.0 + s));
            ASSERT_EQ(flow.crossing_count(p, s), w.crossings);
            ASSERT_TRUE(flow.is_canonical(q));
        }
    }
}

TEST(Evolve, SemigroupLaw) {
    RandomStream rng(32);
    int cases = 0;
    for (const auto& flow : {cycle_flow(), unit_doubling(), wave_rotation(), step_bernoulli()}) {
        FlowMeasureSampler sample(flow);
        for (int i = 0; i < 2500; ++i, ++cases) {
            const FlowPoint p = sample(rng);
            const double s = 10.0 * rng.uniform();
            const double u = 10.0 * rng.uniform();
            const auto two = flow.evolve(flow.evolve(p, s), u);
            const auto one = flow.evolve(p, s + u);
            ASSERT_EQ(two.x, one.x) << "p=(" << p.x << "," << p.t << ") s=" << s << " u=" << u;
            ASSERT_NEAR(two.t, one.t, 1e-9 * (1.0 + s + u));
        }
    }
    EXPECT_EQ(cases, 10'000);
}

TEST(FlowMeasure, CylinderMassMatchesFormula) {
    RandomStream rng(33);
    const auto flow = wave_rotation();
    const CylinderSet a{BaseSet::interval(0.2, 0.5), 0.25, 0.9};
    FlowMeasureSampler sample(flow);
    RunningMoments<1> m;
    for (int i = 0; i < 400'000; ++i) m.push({member(flow, FlowSet{a}, sample(rng)) ? 1.0 : 0.0});
    EXPECT_LE(std::abs(m.mean() - bar_mu_of_set(flow, a)), 4.0 * m.stderr_of_mean());
}

TEST(FlowMeasure, Examples) {
    EXPECT_DOUBLE_EQ(bar_mu_of_set(cycle_flow(), CylinderSet{BaseSet::states({0}), 0.0, 0.5}), 1.0 / 12.0);
    EXPECT_DOUBLE_EQ(bar_mu_of_set(unit_doubling(), CylinderSet{BaseSet::interval(0.0, 0.5), 0.0, 1.0}), 0.5);
    RandomStream rng(34);
    const auto flow = step_bernoulli();
    const auto g = GraphSet::parallel(BaseSet::prefix("1"), Height::function([](double x) { return x / 4; }, "x/4"), 0.5);
    EXPECT_DOUBLE_EQ(bar_mu_of_set(flow, g, 0, rng).value, 0.5 * 0.7 / flow.normalizer());
}

TEST(FlowMeasure, WholeSpaceHasMassOne) {
    RandomStream rng(35);
    const auto flow = step_bernoulli();
    const auto tau = flow.roof();
    const auto full = GraphSet::between(BaseSet::interval(0.0, 1.0), Height::constant(0.0),
                                        Height::function([tau](double x) { return tau(x); }, "tau"), 1.25);
    const auto est = bar_mu_of_set(flow, full, 200'000, rng);
    EXPECT_LE(std::abs(est.value - 1.0), 4.0 * est.std_error);

    const auto unit = unit_doubling();
    const auto unit_full = GraphSet::parallel(BaseSet::interval(0.0, 1.0), Height::constant(0.0), 1.0);
    EXPECT_EQ(bar_mu_of_set(unit, unit_full, 0, rng).value, 1.0);
}

TEST(FlowMeasure, InvarianceUnderTheFlow) {
    MonteCarloOptions opts;
    opts.samples = 1'000'000;
    opts.seed = 36;
    opts.workers = 4;
    const CylinderSet a{BaseSet::interval(0.1, 0.35), 0.5, 0.95};
    for (double s : {0.3, 1.7, 6.25}) {
        const auto r = flow_invariance_check(wave_rotation(), a, s, opts);
        EXPECT_TRUE(r.passes()) << "s=" << s << " z=" << r.z_score;
    }
    const CylinderSet b{BaseSet::prefix("01"), 0.1, 0.7};
    const auto r = flow_invariance_check(step_bernoulli(), b, 2.2, opts);
    EXPECT_TRUE(r.passes()) << r.z_score;
}

TEST(FlowMeasure, SupremumChecks) {
    auto sys = BaseSystem::rotation(0.6180339887);
    auto tau = RoofFunction::closed_form([](double x) { return 2.0 + std::cos(2.0 * std::numbers::pi * x); }, 1.0, 2.0,
                                         "2+cos(2*pi*x)");
    // declared supremum too small: caught on evaluation
    const SuspensionFlow tight(sys, tau, 2.0, 2.5);
    EXPECT_THROW((void)tight.tau(0.0), BadSupBound);
    // absurdly loose supremum: acceptance collapses
    const SuspensionFlow loose(sys, tau, 2.0, 1e5);
    FlowMeasureSampler sampler(loose);
    RandomStream rng(37);
    EXPECT_THROW(
        {
            for (int i = 0; i < 100; ++i) (void)sampler(rng);
        },
        BadSupBound);
    // no supremum at all
    const SuspensionFlow none(sys, tau, 2.0);
    EXPECT_THROW(FlowMeasureSampler{none}, BadSupBound);
    EXPECT_THROW(SuspensionFlow(sys, tau, 0.0), ConfigurationError);
}

TEST(SuspensionFlow, Rescaled) {
    const auto flow = cycle_flow().rescaled(2.0);
    EXPECT_EQ(flow.normalizer(), 4.0);
    EXPECT_EQ(flow.tau(2), 6.0);
    const auto p = flow.evolve({0, 0.0}, 3.0);
    EXPECT_EQ(p.x, 1);
    EXPECT_EQ(p.t, 1.0);
}
