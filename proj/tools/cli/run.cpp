#include "cli/run.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>

namespace kacflow::cli {

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t k) {
    RandomStream s = RandomStream::derive(seed, 0x10000 + k);
    return s();
}

namespace {

bool cylinder_only(Quantity q) {
    return q == Quantity::rhs_A || q == Quantity::helmberg || q == Quantity::stat1 || q == Quantity::linearity;
}

std::string where(const SetSpec& s) { return "set '" + s.name + "' (line " + std::to_string(s.line) + ")"; }

GraphSet as_graph(const FlowSet& set) {
    if (const auto* g = std::get_if<GraphSet>(&set)) return *g;
    const auto& c = std::get<CylinderSet>(set);
    return GraphSet::parallel(c.base, Height::constant(c.t1), c.height());
}

const std::vector<std::size_t>& states_of(const BaseSet& base) {
    const auto* st = std::get_if<StateSet>(&base.representation());
    if (!st) throw ConfigurationError("the exact oracle needs a base given as a list of states");
    return st->states;
}

std::vector<oracle::Rational> exact_heights(const std::optional<std::vector<Number>>& h, const std::string& what) {
    if (!h) throw ConfigurationError("the exact oracle needs " + what + " written as exact numbers");
    std::vector<oracle::Rational> out;
    for (const auto& n : *h) {
        if (!n.exact) throw ConfigurationError("the exact oracle needs " + what + " written as exact numbers");
        out.push_back(*n.exact);
    }
    return out;
}

oracle::RationalRegion exact_region(const oracle::RationalFlowModel& model, const SetSpec& s) {
    const auto& states = states_of(projection(s.set));
    if (std::holds_alternative<CylinderSet>(s.set)) {
        if (!s.t1->exact || !s.t2->exact) throw ConfigurationError("the exact oracle needs t1 and t2 written exactly");
        return oracle::make_cylinder(model, states, *s.t1->exact, *s.t2->exact);
    }
    return oracle::make_graph(model, states, exact_heights(s.h1, "h1"), exact_heights(s.h2, "h2"));
}

/// Everything that can be rejected without sampling.
void precheck(const ExperimentConfig& cfg) {
    const auto& flow = cfg.suspension();
    if (cfg.quantities.empty()) throw ConfigurationError("no quantities requested");
    if (cfg.sets.empty()) throw ConfigurationError("no sets given");
    for (const auto& s : cfg.sets) {
        std::visit([&](const auto& set) { validate(flow, set); }, s.set);
    }
    for (Quantity q : cfg.quantities) {
        bool applies = false;
        for (const auto& s : cfg.sets) {
            const auto* cyl = std::get_if<CylinderSet>(&s.set);
            if (cylinder_only(q) && !cyl) continue;
            applies = true;
            try {
                switch (q) {
                case Quantity::rhs_A: (void)rhs_theorem_A(flow, *cyl); break;
                case Quantity::entropy_quotient: (void)entropy_quotient(flow, projection(s.set)); break;
                case Quantity::linearity: (void)linearity_scan(flow, *cyl, cfg.c_list); break;
                case Quantity::helmberg:
                    for (double w : cfg.s_list) (void)exit_region(*cyl, w);
                    break;
                case Quantity::oracle_suite: (void)exact_region(cfg.exact_model(), s); break;
                default:
                    if (!(flow.base().measure(projection(s.set)) > 0.0)) {
                        throw EmptyProjection("base of the set has zero measure");
                    }
                    break;
                }
            } catch (const InvalidSet& e) {
                throw InvalidSet(where(s) + ", " + to_string(q) + ": " + e.what());
            } catch (const InvalidExitWidth& e) {
                throw InvalidExitWidth(where(s) + ", " + to_string(q) + ": " + e.what());
            } catch (const ScaleRangeError& e) {
                throw ScaleRangeError(where(s) + ", " + to_string(q) + ": " + e.what());
            } catch (const ZeroEntropyBase& e) {
                throw ZeroEntropyBase(where(s) + ", " + to_string(q) + ": " + e.what());
            } catch (const EmptyProjection& e) {
                throw EmptyProjection(where(s) + ", " + to_string(q) + ": " + e.what());
            } catch (const ConfigurationError& e) {
                throw ConfigurationError(where(s) + ", " + to_string(q) + ": " + e.what());
            }
        }
        if (!applies) throw ConfigurationError(to_string(q) + " needs at least one cylinder set");
    }
}

EstimateReport exact_row(const std::string& name, const oracle::Rational& lhs, const oracle::Rational& rhs) {
    EstimateReport r;
    r.quantity = "oracle:" + name;
    r.mc_estimate = oracle::to_double(lhs);
    r.analytic_value = oracle::to_double(rhs);
    if (lhs != rhs) {
        r.z_score = lhs > rhs ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    }
    return r;
}

} // namespace

RunResult run_experiment(const ExperimentConfig& cfg, bool record_wall_time) {
    precheck(cfg);
    const auto& flow = cfg.suspension();
    const RowContext ctx{cfg.experiment_id, cfg.system_label, cfg.roof_label, cfg.seed, cfg.workers};
    RunResult out;
    std::uint64_t k = 0;

    for (Quantity q : cfg.quantities) {
        for (const auto& spec : cfg.sets) {
            const auto* cyl = std::get_if<CylinderSet>(&spec.set);
            if (cylinder_only(q) && !cyl) continue;
            const MonteCarloOptions mc{cfg.samples, sub_seed(cfg.seed, k++), cfg.workers, kDefaultMaxSteps};
            const std::string set_label = spec.name;
            const auto started = std::chrono::steady_clock::now();
            std::vector<EstimateReport> reports;

            switch (q) {
            case Quantity::mean_return: {
                const auto* g = std::get_if<GraphSet>(&spec.set);
                if (g && !g->width()) {
                    auto r = theorem_B_cross_check(flow, *g, mc);
                    r.quantity = "mean_return";
                    reports.push_back(r);
                } else {
                    reports.push_back(mc_mean_return(flow, spec.set, mc));
                }
                break;
            }
            case Quantity::rhs_A: {
                const auto r = rhs_theorem_A(flow, *cyl);
                reports.push_back(make_report("rhs_A", r.escape_form, 0.0, r.roof_form, 0, 0));
                break;
            }
            case Quantity::rhs_B: {
                const GraphSet g = as_graph(spec.set);
                reports.push_back(theorem_B_cross_check(flow, g, mc));
                if (g.width()) {
                    MonteCarloOptions o = mc;
                    o.seed = sub_seed(cfg.seed, k++);
                    auto t = parallel_sides_rhs(flow, g, o).telescoping;
                    reports.push_back(t);
                }
                break;
            }
            case Quantity::cross_section:
                reports.push_back(cross_section_mean_return(flow, projection(spec.set), mc));
                break;
            case Quantity::entropy_quotient: {
                const auto e = entropy_quotient(flow, projection(spec.set));
                reports.push_back(make_report("entropy_quotient", e.quotient, 0.0, e.mean_return, 0, 0));
                break;
            }
            case Quantity::helmberg:
                for (const auto& e : helmberg_limit(flow, *cyl, cfg.s_list, mc)) {
                    EstimateReport r = make_report("helmberg(s=" + format_number(e.s) + ")", e.report.mc_estimate, e.report.mc_stderr,
                                                   e.finite_s_expectation, e.report.n_samples,
                                                   e.report.discarded_samples);
                    reports.push_back(r);
                }
                break;
            case Quantity::stat1:
                reports.push_back(stat1_identity_check(flow, *cyl, mc));
                break;
            case Quantity::linearity: {
                const auto t = linearity_scan(flow, *cyl, cfg.c_list);
                for (const auto& row : t.rows) {
                    std::string name = "linearity(c=" + format_number(row.scale) + ")";
                    const double fit = t.intercept + t.slope * row.roof_integral;
                    reports.push_back(make_report(name, row.mean_return, 0.0, fit, 0, 0));
                }
                reports.push_back(make_report("linearity_slope", t.slope, 0.0, t.expected_slope, 0, 0));
                break;
            }
            case Quantity::oracle_suite: {
                const auto model = cfg.exact_model();
                const auto region = exact_region(model, spec);
                const auto suite = cyl ? oracle::oracle_full_identity_suite(model, region)
                                       : oracle::oracle_graph_suite(model, region);
                for (const auto& c : suite.checks) reports.push_back(exact_row(c.name, c.lhs, c.rhs));
                // the floating-point closed form against the exact mean
                const auto* g = std::get_if<GraphSet>(&spec.set);
                if (cyl || g->width()) {
                    const double closed = cyl ? rhs_theorem_A(flow, *cyl).value() : parallel_sides_closed_form(flow, *g);
                    reports.push_back(make_report("oracle:float_vs_exact", closed, 0.0,
                                                  oracle::to_double(oracle::oracle_mean_return(model, region)), 0, 0));
                }
                break;
            }
            }

            const auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started);
            for (const auto& r : reports) {
                ReportRow row = make_row(ctx, set_label, r);
                if (record_wall_time) row.wall_time_ms = elapsed.count();
                out.all_passed = out.all_passed && row.passed;
                out.rows.push_back(std::move(row));
            }
        }
    }
    return out;
}

} // namespace kacflow::cli
