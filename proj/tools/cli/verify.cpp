#include "cli/verify.hpp"

#include <cmath>
#include <functional>
#include <numbers>

#include "cli/catalog.hpp"

namespace kacflow::cli {
namespace {

struct NamedFlow {
    std::string name;
    SuspensionFlow flow;
    CylinderSet cylinder;
};

std::vector<NamedFlow> reference_flows() {
    std::vector<NamedFlow> out;
    out.push_back({"doubling", SuspensionFlow::exact(BaseSystem::doubling(), RoofFunction::constant(1.0)),
                   CylinderSet{BaseSet::interval(0.0, 0.5), 0.0, 1.0}});
    {
        auto tau = RoofFunction::closed_form([](double x) { return 2.0 + std::cos(2.0 * std::numbers::pi * x); }, 1.0,
                                             2.0, "2+cos(2*pi*x)", 3.0);
        out.push_back({"golden-rotation", SuspensionFlow::exact(preset("golden-rotation").system, tau),
                       CylinderSet{BaseSet::interval(0.0, 0.3), 0.25, 1.0}});
    }
    {
        const auto& sys = preset("bernoulli-0.3").system;
        auto tau = RoofFunction::piecewise(sys, PiecewiseConstant{{{BaseSet::interval(0.0, 0.5), 0.8},
                                                                   {BaseSet::interval(0.5, 1.0), 1.3}}});
        out.push_back({"bernoulli-0.3", SuspensionFlow::exact(sys, tau),
                       CylinderSet{BaseSet::interval(0.3, 0.9), 0.1, 0.7}});
    }
    {
        const auto& sys = preset("three-cycle").system;
        out.push_back({"three-cycle", SuspensionFlow::exact(sys, RoofFunction::per_state(sys, {1, 2, 3})),
                       CylinderSet{BaseSet::states({0}), 0.0, 0.5}});
    }
    return out;
}

std::string cylinder_label(const CylinderSet& c) { return describe(FlowSet{c}); }

class Suite {
public:
    Suite(const VerifyOptions& opts, std::ostream& diag) : opts_(opts), diag_(diag) {}

    MonteCarloOptions mc() { return MonteCarloOptions{opts_.samples, sub_seed(opts_.seed, k_++), opts_.workers, kDefaultMaxSteps}; }

    void add(const std::string& module, const std::string& invariant, const std::string& system,
             const std::string& roof, const std::string& inputs, EstimateReport r) {
        r.quantity = module + "/" + invariant;
        const RowContext ctx{"verify", system, roof, opts_.seed, opts_.workers};
        ReportRow row = make_row(ctx, inputs, r);
        if (!row.passed) {
            diag_ << "FAIL " << r.quantity << " on " << system << " with roof " << roof << ", inputs " << inputs
                  << ": estimate " << format_number(r.mc_estimate) << " (stderr " << format_number(r.mc_stderr)
                  << ") vs " << format_number(r.analytic_value) << ", z = " << format_number(r.z_score) << '\n';
        }
        result_.all_passed = result_.all_passed && row.passed;
        result_.rows.push_back(std::move(row));
    }

    void add(const std::string& module, const std::string& invariant, const NamedFlow& f, const std::string& inputs,
             EstimateReport r) {
        add(module, invariant, f.name, f.flow.roof().describe(), inputs, std::move(r));
    }

    /// Count of failing cases as a row that passes only at zero.
    void add_count(const std::string& module, const std::string& invariant, const NamedFlow& f,
                   const std::string& inputs, std::size_t failures, std::size_t cases, std::size_t discarded = 0) {
        add(module, invariant, f, inputs, make_report("", static_cast<double>(failures), 0.0, 0.0, cases, discarded));
    }

    RunResult take() { return std::move(result_); }

    VerifyOptions opts_;

private:
    std::ostream& diag_;
    RunResult result_;
    std::uint64_t k_ = 0;
};

void base_suites(Suite& s, const std::vector<NamedFlow>& flows) {
    for (const auto& f : flows) {
        const auto& sys = f.flow.base();
        const auto& base = f.cylinder.base;
        s.add("base_dynamics", "measure_preservation", f, base.describe(), measure_preservation_check(sys, base, s.mc()));
        s.add("base_dynamics", "kac_integral", f, base.describe(), kac_integral_check(sys, base, s.mc()));
    }
}

void roof_suites(Suite& s, const std::vector<NamedFlow>& flows) {
    CompensatedSum acc;
    for (int i = 0; i < 1'000'000; ++i) acc += 0.1;
    s.add("roof", "compensated_sum", "none", "none", "0.1 added 1e6 times",
          make_report("", acc.value(), 0.0, 100'000.0, 0, 0));

    for (const auto& f : flows) {
        RandomStream rng(sub_seed(s.opts_.seed, 0x726f6f66));
        const auto mc = roof_integral(f.flow.roof(), f.flow.base(), IntegrationMode::monte_carlo, s.opts_.samples, rng);
        s.add("roof", "integral", f, "whole base",
              make_report("", mc.value, mc.std_error, f.flow.normalizer(), mc.samples, 0));
    }
}

void suspension_suites(Suite& s, const std::vector<NamedFlow>& flows) {
    const std::size_t cases = 10'000 / flows.size();
    for (const auto& f : flows) {
        RandomStream rng(sub_seed(s.opts_.seed, 0x73656d69));
        FlowMeasureSampler sample(f.flow);
        std::size_t bad = 0;
        for (std::size_t i = 0; i < cases; ++i) {
            const FlowPoint p = sample(rng);
            const double a = 10.0 * rng.uniform();
            const double b = 10.0 * rng.uniform();
            const FlowPoint two = f.flow.evolve(f.flow.evolve(p, a), b);
            const FlowPoint one = f.flow.evolve(p, a + b);
            if (two.x != one.x || std::abs(two.t - one.t) > 1e-9 * (1.0 + a + b)) ++bad;
        }
        s.add_count("suspension", "semigroup", f, "random points, times in [0,10)", bad, cases);
        s.add("suspension", "flow_invariance", f, cylinder_label(f.cylinder) + " after time 2.7",
              flow_invariance_check(f.flow, f.cylinder, 2.7, s.mc()));
    }
}

void recurrence_suites(Suite& s, const std::vector<NamedFlow>& flows) {
    const std::size_t cases = 1000;
    for (const auto& f : flows) {
        RandomStream rng(sub_seed(s.opts_.seed, 0x68697474));
        FlowMeasureSampler sample(f.flow);
        const FlowSet set{f.cylinder};
        const double eps = 1e-6 * f.flow.roof().lower_bound();
        std::size_t missed = 0, early = 0, below_escape = 0, discarded = 0;
        for (std::size_t i = 0; i < cases; ++i) {
            const FlowPoint p = sample(rng);
            double n = 0.0;
            try {
                n = hitting_time(f.flow, set, p);
            } catch (const NonRecurrentWithinBudget&) {
                ++discarded;
                continue;
            }
            const bool landed = member(f.flow, set, f.flow.evolve(p, n)) || member(f.flow, set, f.flow.evolve(p, n + 1e-9));
            if (!landed) ++missed;
            if (member(f.flow, set, p)) {
                if (n < escape_time(f.flow, set, p)) ++below_escape;
            } else if (n > eps && member(f.flow, set, f.flow.evolve(p, n - eps))) {
                ++early;
            }
        }
        const std::string label = cylinder_label(f.cylinder);
        s.add_count("recurrence", "hitting_time_lands_in_set", f, label, missed, cases, discarded);
        s.add_count("recurrence", "no_earlier_entry", f, label, early, cases, discarded);
        s.add_count("recurrence", "return_after_escape", f, label, below_escape, cases, discarded);
    }
}

void formula_suites(Suite& s, const std::vector<NamedFlow>& flows) {
    for (const auto& f : flows) {
        const std::string label = cylinder_label(f.cylinder);
        s.add("formulas", "stat2_mean_return", f, label, mc_mean_return(f.flow, FlowSet{f.cylinder}, s.mc()));
        s.add("formulas", "stat1", f, label, stat1_identity_check(f.flow, f.cylinder, s.mc()));
        s.add("formulas", "cross_section", f, f.cylinder.base.describe(),
              cross_section_mean_return(f.flow, f.cylinder.base, s.mc()));

        const auto a = rhs_theorem_A(f.flow, f.cylinder);
        s.add("formulas", "theorem_A_forms", f, label, make_report("", a.escape_form, 0.0, a.roof_form, 0, 0));

        // the three-term formula, fully sampled, on the cylinder seen as a graph set
        const GraphSet g = GraphSet::parallel(f.cylinder.base, Height::constant(f.cylinder.t1), f.cylinder.height());
        const auto b = rhs_theorem_B(f.flow, g, TheoremBOptions{s.mc(), false});
        s.add("formulas", "theorem_B_reduces_to_A", f, label,
              make_report("", b.value, b.std_error, a.value(), b.n_samples, b.discarded));

        const std::vector<double> widths{f.cylinder.height() / 4, f.cylinder.height() / 16};
        for (const auto& e : helmberg_limit(f.flow, f.cylinder, widths, s.mc())) {
            s.add("formulas", "exit_region_s=" + format_number(e.s), f, label,
                  make_report("", e.report.mc_estimate, e.report.mc_stderr, e.finite_s_expectation,
                              e.report.n_samples, e.report.discarded_samples));
        }

        if (f.flow.base().entropy() > 0.0) {
            const auto q = entropy_quotient(f.flow, f.cylinder.base);
            s.add("formulas", "entropy_quotient", f, f.cylinder.base.describe(),
                  make_report("", q.quotient, 0.0, q.mean_return, 0, 0));
        }
        const auto lin = linearity_scan(f.flow, f.cylinder, {1.0, 1.5, 2.0, 3.0});
        s.add("formulas", "linearity_residual", f, label + ", c in {1,1.5,2,3}",
              make_report("", lin.max_residual < kIdentityTolerance ? 0.0 : lin.max_residual, 0.0, 0.0, 0, 0));
        s.add("formulas", "linearity_slope", f, label + ", c in {1,1.5,2,3}",
              make_report("", lin.slope, 0.0, lin.expected_slope, 0, 0));
    }

    // a graph set with a slanted floor over the doubling map
    const NamedFlow& d = flows.front();
    const GraphSet slanted = GraphSet::parallel(BaseSet::interval(0.0, 0.5),
                                                Height::function([](double x) { return x / 2; }, "x/2"), 0.25);
    s.add("formulas", "theorem_B_cross_check", d, describe(FlowSet{slanted}),
          theorem_B_cross_check(d.flow, slanted, s.mc()));
}

void oracle_suites(Suite& s) {
    using oracle::Rational;
    RandomStream rng(sub_seed(s.opts_.seed, 0x6f726163));
    std::size_t failed = 0, checks = 0;
    for (int m = 0; m < 100; ++m) {
        const auto model = oracle::random_model(rng);
        for (std::size_t x : oracle::support(model)) {
            const auto a = oracle::make_cylinder(model, {x}, Rational(0), model.roof(x) / 2);
            for (const auto& c : oracle::oracle_full_identity_suite(model, a).checks) {
                ++checks;
                if (!c.holds()) ++failed;
            }
        }
    }
    s.add("oracle", "random_models", "100 random permutations", "random rationals", "single-state cylinders [0, tau/2)",
          make_report("", static_cast<double>(failed), 0.0, 0.0, checks, 0));

    const oracle::RationalFlowModel cycle({1, 2, 0}, std::vector<Rational>(3, Rational(1, 3)),
                                          {Rational(1), Rational(2), Rational(3)});
    const auto a = oracle::make_cylinder(cycle, {0}, Rational(0), Rational(1, 2));
    for (const auto& c : oracle::oracle_full_identity_suite(cycle, a).checks) {
        EstimateReport r = make_report("", oracle::to_double(c.lhs), 0.0, oracle::to_double(c.rhs), 0, 0);
        if (!c.holds()) r.z_score = std::numeric_limits<double>::infinity();
        s.add("oracle", c.name, "three-cycle", "[1 2 3]", "{0} x [0, 1/2)", r);
    }
}

} // namespace

RunResult verify_all(const VerifyOptions& opts, std::ostream& diagnostics) {
    if (opts.config_path) {
        Overrides ov;
        ov.seed = opts.seed;
        const auto cfg = load_config(*opts.config_path, ov);
        for (const auto& set : cfg.sets) std::visit([&](const auto& a) { validate(cfg.suspension(), a); }, set.set);
    }
    Suite s(opts, diagnostics);
    const auto flows = reference_flows();
    base_suites(s, flows);
    roof_suites(s, flows);
    suspension_suites(s, flows);
    recurrence_suites(s, flows);
    formula_suites(s, flows);
    oracle_suites(s);
    return s.take();
}

} // namespace kacflow::cli
