#include "cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "cli/catalog.hpp"

namespace kacflow::cli {

Quantity parse_quantity(const std::string& text) {
    static const std::vector<std::pair<std::string, Quantity>> names{
        {"mean_return", Quantity::mean_return}, {"rhs_A", Quantity::rhs_A},
        {"rhs_B", Quantity::rhs_B},             {"cross_section", Quantity::cross_section},
        {"entropy_quotient", Quantity::entropy_quotient}, {"helmberg", Quantity::helmberg},
        {"stat1", Quantity::stat1},             {"linearity", Quantity::linearity},
        {"oracle_suite", Quantity::oracle_suite}};
    for (const auto& [name, q] : names) {
        if (name == text) return q;
    }
    throw ConfigurationError("unknown quantity '" + text + "'");
}

std::string to_string(Quantity q) {
    switch (q) {
    case Quantity::mean_return: return "mean_return";
    case Quantity::rhs_A: return "rhs_A";
    case Quantity::rhs_B: return "rhs_B";
    case Quantity::cross_section: return "cross_section";
    case Quantity::entropy_quotient: return "entropy_quotient";
    case Quantity::helmberg: return "helmberg";
    case Quantity::stat1: return "stat1";
    case Quantity::linearity: return "linearity";
    case Quantity::oracle_suite: return "oracle_suite";
    }
    return "?";
}

oracle::RationalFlowModel ExperimentConfig::exact_model() const {
    const auto& sys = suspension().base();
    if (!sys.finite()) throw ConfigurationError("exact oracle needs a permutation system, not " + system_label);
    if (!exact_weights || !exact_roof) {
        throw ConfigurationError("exact oracle needs every state weight and roof value written as an exact number");
    }
    return oracle::RationalFlowModel(sys.table(), *exact_weights, *exact_roof);
}

namespace {

class Parser {
public:
    Parser(std::string origin, const Overrides& ov) : origin_(std::move(origin)), ov_(ov) {}

    ExperimentConfig parse(const YAML::Node& root) {
        if (!root.IsMap()) fail(root, "the config must be a mapping of keys to values");
        check_keys(root, {"experiment_id", "system", "roof", "sets", "quantities", "samples", "seed", "workers",
                          "s_list", "c_list", "output"});
        ExperimentConfig cfg;
        if (root["experiment_id"]) cfg.experiment_id = scalar(root["experiment_id"], "experiment_id");
        if (root["samples"]) cfg.samples = static_cast<std::size_t>(unsigned_int(root["samples"], "samples"));
        if (root["seed"]) cfg.seed = unsigned_int(root["seed"], "seed");
        if (root["workers"]) cfg.workers = static_cast<unsigned>(unsigned_int(root["workers"], "workers"));
        if (ov_.samples) cfg.samples = *ov_.samples;
        if (ov_.seed) cfg.seed = *ov_.seed;
        if (ov_.workers) cfg.workers = *ov_.workers;
        if (cfg.samples < 2) fail(root, "samples must be at least 2");
        if (cfg.workers == 0) fail(root, "workers must be at least 1");

        const YAML::Node sys_node = required(root, "system");
        const YAML::Node roof_node = required(root, "roof");
        BaseSystem sys = parse_system(sys_node, cfg);
        cfg.system_label = sys.describe();
        parse_roof(roof_node, sys, cfg);

        if (const auto sets = root["sets"]) {
            if (!sets.IsSequence()) fail(sets, "sets must be a list");
            for (const auto& s : sets) cfg.sets.push_back(parse_set(s, cfg));
        }
        if (const auto qs = root["quantities"]) {
            if (!qs.IsSequence()) fail(qs, "quantities must be a list");
            for (const auto& q : qs) {
                try {
                    cfg.quantities.push_back(parse_quantity(scalar(q, "quantity")));
                } catch (const ConfigurationError& e) {
                    fail(q, e.what());
                }
            }
        }
        if (root["s_list"]) cfg.s_list = number_list(root["s_list"], "s_list");
        if (root["c_list"]) cfg.c_list = number_list(root["c_list"], "c_list");
        if (const auto out = root["output"]) {
            if (!out.IsMap()) fail(out, "output must be a mapping with path and format");
            check_keys(out, {"path", "format"});
            if (out["path"]) cfg.out_path = scalar(out["path"], "output.path");
            if (out["format"]) {
                try {
                    cfg.format = parse_format(scalar(out["format"], "output.format"));
                } catch (const ConfigurationError& e) {
                    fail(out["format"], e.what());
                }
            }
        }
        if (ov_.out_path) cfg.out_path = *ov_.out_path;
        if (ov_.format) cfg.format = *ov_.format;
        return cfg;
    }

private:
    [[noreturn]] void fail(const YAML::Node& n, const std::string& msg) const {
        throw ConfigurationError(where(n) + msg);
    }

    [[nodiscard]] std::string where(const YAML::Node& n) const {
        const auto mark = n.Mark();
        if (mark.is_null()) return origin_ + ": ";
        return origin_ + ":" + std::to_string(mark.line + 1) + ": ";
    }

    /// Runs `fn`, prefixing the location of `n` to any library error while keeping its type.
    template <class Fn>
    auto located(const YAML::Node& n, Fn&& fn) const -> decltype(fn()) {
        const std::string at = where(n);
        const auto tag = [&](const std::exception& e) {
            const std::string msg = e.what();
            return msg.rfind(origin_ + ":", 0) == 0 ? msg : at + msg;
        };
        try {
            return fn();
        } catch (const InvalidSet& e) {
            throw InvalidSet(tag(e));
        } catch (const ConfigurationError& e) {
            throw ConfigurationError(tag(e));
        } catch (const RoofBoundViolation& e) {
            throw RoofBoundViolation(tag(e));
        } catch (const BadSupBound& e) {
            throw BadSupBound(tag(e));
        } catch (const UnsupportedExactIntegration& e) {
            throw UnsupportedExactIntegration(tag(e));
        } catch (const EmptyProjection& e) {
            throw EmptyProjection(tag(e));
        }
    }

    void check_keys(const YAML::Node& map, std::initializer_list<const char*> allowed) const {
        for (const auto& kv : map) {
            const std::string key = kv.first.as<std::string>();
            if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
                std::string list;
                for (const char* a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
                fail(kv.first, "unknown key '" + key + "' (expected one of: " + list + ")");
            }
        }
    }

    YAML::Node required(const YAML::Node& map, const char* key) const {
        const YAML::Node n = map[key];
        if (!n) fail(map, std::string("missing required key '") + key + "'");
        return n;
    }

    std::string scalar(const YAML::Node& n, const std::string& what) const {
        if (!n.IsScalar()) fail(n, what + " must be a single value");
        return n.Scalar();
    }

    std::uint64_t unsigned_int(const YAML::Node& n, const std::string& what) const {
        const std::string s = scalar(n, what);
        std::uint64_t v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) {
            // allow 1e6-style counts
            const Number num = number(n, what);
            if (!(num.value >= 0.0) || num.value != std::floor(num.value) || num.value > 1.8e19) {
                fail(n, what + " must be a non-negative integer, got '" + s + "'");
            }
            return static_cast<std::uint64_t>(num.value);
        }
        return v;
    }

    std::optional<Number> try_number(const YAML::Node& n) const {
        if (!n.IsScalar()) return std::nullopt;
        const std::string s = n.Scalar();
        try {
            const auto r = oracle::parse_rational(s);
            return Number{oracle::to_double(r), r};
        } catch (const ConfigurationError&) {
        }
        double v = 0.0;
        const char* begin = s.data();
        const char* end = s.data() + s.size();
        if (!s.empty() && *begin == '+') ++begin;
        const auto [ptr, ec] = std::from_chars(begin, end, v);
        if (ec == std::errc() && ptr == end) return Number{v, std::nullopt};
        return std::nullopt;
    }

    Number number(const YAML::Node& n, const std::string& what) const {
        if (auto v = try_number(n)) return *v;
        fail(n, what + " must be a number, got '" + (n.IsScalar() ? n.Scalar() : std::string("a non-scalar")) + "'");
    }

    std::vector<double> number_list(const YAML::Node& n, const std::string& what) const {
        if (!n.IsSequence()) fail(n, what + " must be a list of numbers");
        std::vector<double> out;
        for (const auto& e : n) out.push_back(number(e, what).value);
        return out;
    }

    std::vector<Number> exact_list(const YAML::Node& n, const std::string& what) const {
        if (!n.IsSequence()) fail(n, what + " must be a list of numbers");
        std::vector<Number> out;
        for (const auto& e : n) out.push_back(number(e, what));
        return out;
    }

    static std::optional<std::vector<oracle::Rational>> all_exact(const std::vector<Number>& v) {
        std::vector<oracle::Rational> out;
        for (const auto& n : v) {
            if (!n.exact) return std::nullopt;
            out.push_back(*n.exact);
        }
        return out;
    }

    // ---- system ------------------------------------------------------------------

    BaseSystem parse_system(const YAML::Node& n, ExperimentConfig& cfg) const {
        if (n.IsScalar()) return system_preset(n, n.Scalar(), cfg);
        if (!n.IsMap()) fail(n, "system must be a preset name or a mapping");
        check_keys(n, {"preset", "kind", "branches", "weights", "alpha", "table"});
        if (n["preset"]) return system_preset(n["preset"], scalar(n["preset"], "system.preset"), cfg);
        const std::string kind = scalar(required(n, "kind"), "system.kind");
        return located(n, [&]() -> BaseSystem {
            if (kind == "expanding") {
                const int m = static_cast<int>(unsigned_int(required(n, "branches"), "system.branches"));
                std::vector<double> w;
                if (n["weights"]) {
                    for (const auto& x : exact_list(n["weights"], "system.weights")) w.push_back(x.value);
                }
                return BaseSystem::expanding(m, w);
            }
            if (kind == "rotation") return BaseSystem::rotation(number(required(n, "alpha"), "system.alpha").value);
            if (kind == "permutation") {
                std::vector<std::size_t> table;
                const auto t = required(n, "table");
                if (!t.IsSequence()) fail(t, "system.table must be a list of state images");
                for (const auto& e : t) table.push_back(static_cast<std::size_t>(unsigned_int(e, "system.table")));
                std::vector<Number> w;
                if (n["weights"]) {
                    w = exact_list(n["weights"], "system.weights");
                } else {
                    const oracle::Rational each(1, static_cast<long long>(std::max<std::size_t>(table.size(), 1)));
                    w.assign(table.size(), Number{oracle::to_double(each), each});
                }
                cfg.exact_weights = all_exact(w);
                std::vector<double> wd;
                for (const auto& x : w) wd.push_back(x.value);
                return BaseSystem::permutation(table, wd);
            }
            fail(n["kind"], "unknown system kind '" + kind + "' (expected expanding, rotation or permutation)");
        });
    }

    BaseSystem system_preset(const YAML::Node& n, const std::string& name, ExperimentConfig& cfg) const {
        const BaseSystem sys = located(n, [&] { return preset(name).system; });
        if (sys.finite()) {
            cfg.exact_weights = std::vector<oracle::Rational>(
                sys.state_count(), oracle::Rational(1, static_cast<long long>(sys.state_count())));
        }
        return sys;
    }

    // ---- roof --------------------------------------------------------------------

    void parse_roof(const YAML::Node& n, const BaseSystem& sys, ExperimentConfig& cfg) const {
        if (!n.IsMap()) fail(n, "roof must be a mapping");
        check_keys(n, {"form", "value", "values", "pieces", "expr", "lower_bound", "upper_bound", "integral",
                       "integral_samples"});
        const std::string form = scalar(required(n, "form"), "roof.form");
        std::optional<double> sup;
        if (n["upper_bound"]) sup = number(n["upper_bound"], "roof.upper_bound").value;

        located(n, [&] {
            if (form == "constant") {
                const Number c = number(required(n, "value"), "roof.value");
                RoofFunction tau = RoofFunction::constant(c.value);
                if (sys.finite() && c.exact) cfg.exact_roof = std::vector<oracle::Rational>(sys.state_count(), *c.exact);
                cfg.flow.emplace(SuspensionFlow::exact(sys, std::move(tau), sup));
            } else if (form == "piecewise") {
                RoofFunction tau = piecewise_roof(n, sys, cfg);
                cfg.flow.emplace(SuspensionFlow::exact(sys, std::move(tau), sup));
            } else if (form == "expression") {
                cfg.flow.emplace(expression_roof(n, sys, cfg, sup));
            } else {
                fail(n["form"], "unknown roof form '" + form + "' (expected constant, piecewise or expression)");
            }
        });
        cfg.roof_label = cfg.flow->roof().describe();
    }

    RoofFunction piecewise_roof(const YAML::Node& n, const BaseSystem& sys, ExperimentConfig& cfg) const {
        if (n["values"]) {
            const auto values = exact_list(n["values"], "roof.values");
            std::vector<double> v;
            for (const auto& x : values) v.push_back(x.value);
            cfg.exact_roof = all_exact(values);
            return located(n["values"], [&] { return RoofFunction::per_state(sys, v); });
        }
        const auto pieces = required(n, "pieces");
        if (!pieces.IsSequence()) fail(pieces, "roof.pieces must be a list of {base, value}");
        PiecewiseConstant parts;
        for (const auto& p : pieces) {
            if (!p.IsMap()) fail(p, "each roof piece needs base and value");
            check_keys(p, {"base", "value"});
            parts.pieces.emplace_back(parse_base(required(p, "base"), sys), number(required(p, "value"), "roof value").value);
        }
        return located(pieces, [&] { return RoofFunction::piecewise(sys, parts); });
    }

    SuspensionFlow expression_roof(const YAML::Node& n, const BaseSystem& sys, const ExperimentConfig& cfg,
                                   std::optional<double> sup) const {
        const YAML::Node expr_node = required(n, "expr");
        const std::string text = scalar(expr_node, "roof.expr");
        const Expression expr = located(expr_node, [&] { return Expression::parse(text); });
        const double lower = number(required(n, "lower_bound"), "roof.lower_bound").value;
        const YAML::Node integral_node = required(n, "integral");
        std::optional<double> integral;
        if (integral_node.IsScalar() && integral_node.Scalar() == "montecarlo") {
            integral = std::nullopt;
        } else {
            integral = number(integral_node, "roof.integral").value;
        }
        RoofFunction tau = located(n, [&] {
            return RoofFunction::closed_form([expr](double x) { return expr(x); }, lower, integral, text, sup);
        });
        if (integral) return SuspensionFlow(sys, std::move(tau), *integral, sup);
        std::size_t samples = 1'000'000;
        if (n["integral_samples"]) samples = static_cast<std::size_t>(unsigned_int(n["integral_samples"], "roof.integral_samples"));
        RandomStream rng = RandomStream::derive(cfg.seed, 0x726f6f66ull);
        const double norm = located(n, [&] {
            return roof_integral(tau, sys, IntegrationMode::monte_carlo, samples, rng).value;
        });
        return SuspensionFlow(sys, std::move(tau), norm, sup);
    }

    // ---- sets ----------------------------------------------------------------------

    BaseSet parse_base(const YAML::Node& n, const BaseSystem& sys) const {
        if (!n.IsMap()) fail(n, "base must be a mapping with one of: interval, intervals, prefix, states, whole");
        check_keys(n, {"interval", "intervals", "prefix", "states", "whole"});
        BaseSet set = located(n, [&]() -> BaseSet {
            if (n["whole"]) return sys.whole();
            if (n["interval"]) return BaseSet::intervals({interval(n["interval"])});
            if (n["intervals"]) {
                if (!n["intervals"].IsSequence()) fail(n["intervals"], "intervals must be a list of [lo, hi] pairs");
                std::vector<Interval> parts;
                for (const auto& iv : n["intervals"]) parts.push_back(interval(iv));
                return BaseSet::intervals(parts);
            }
            if (n["prefix"]) return BaseSet::prefix(scalar(n["prefix"], "prefix"));
            if (n["states"]) {
                if (!n["states"].IsSequence()) fail(n["states"], "states must be a list of state indices");
                std::vector<std::size_t> ids;
                for (const auto& s : n["states"]) ids.push_back(static_cast<std::size_t>(unsigned_int(s, "state")));
                return BaseSet::states(ids);
            }
            fail(n, "base needs one of: interval, intervals, prefix, states, whole");
        });
        located(n, [&] { sys.check_compatible(set); });
        return set;
    }

    Interval interval(const YAML::Node& n) const {
        if (!n.IsSequence() || n.size() != 2) fail(n, "an interval is written [lo, hi]");
        return Interval{number(n[0], "interval bound").value, number(n[1], "interval bound").value};
    }

    /// A height: a number, an expression in x, or (permutation systems) a per-state list.
    Height height(const YAML::Node& n, const BaseSystem& sys, const std::string& what,
                  std::optional<std::vector<Number>>& exact) const {
        if (n.IsSequence()) {
            if (!sys.finite()) fail(n, what + " lists per-state values, which needs a permutation system");
            auto values = exact_list(n, what);
            if (values.size() != sys.state_count()) fail(n, what + " needs one value per state");
            std::vector<double> v;
            std::ostringstream label;
            label.precision(17);
            for (std::size_t i = 0; i < values.size(); ++i) {
                v.push_back(values[i].value);
                label << (i ? " " : "[") << values[i].value;
            }
            label << ']';
            exact = std::move(values);
            return Height::function([v](Point x) { return v[static_cast<std::size_t>(x)]; }, label.str());
        }
        if (auto num = try_number(n)) {
            if (sys.finite()) exact = std::vector<Number>(sys.state_count(), *num);
            return Height::constant(num->value);
        }
        const std::string text = scalar(n, what);
        const Expression e = located(n, [&] { return Expression::parse(text); });
        if (e.is_constant()) return Height::constant(e(0.0));
        return Height::function([e](Point x) { return e(x); }, text);
    }

    SetSpec parse_set(const YAML::Node& n, const ExperimentConfig& cfg) const {
        if (!n.IsMap()) fail(n, "each set must be a mapping");
        check_keys(n, {"name", "type", "base", "t1", "t2", "h1", "h2", "width", "h_sup"});
        const SuspensionFlow& flow = *cfg.flow;
        const BaseSystem& sys = flow.base();
        const int line = n.Mark().line + 1;
        std::string name = n["name"] ? scalar(n["name"], "set name") : "set" + std::to_string(cfg.sets.size() + 1);
        const std::string type = n["type"] ? scalar(n["type"], "set type") : (n["h1"] ? "graph" : "cylinder");
        const BaseSet base = parse_base(required(n, "base"), sys);
        if (type == "cylinder") {
            const Number t1 = number(required(n, "t1"), "t1");
            const Number t2 = number(required(n, "t2"), "t2");
            CylinderSet c{base, t1.value, t2.value};
            located(n, [&] { validate(flow, c); });
            return SetSpec{std::move(name), FlowSet{std::move(c)}, line, t1, t2, std::nullopt, std::nullopt};
        }
        if (type != "graph") fail(n["type"], "unknown set type '" + type + "' (expected cylinder or graph)");

        std::optional<std::vector<Number>> h1_exact, h2_exact;
        Height h1 = height(required(n, "h1"), sys, "h1", h1_exact);
        std::optional<double> h_sup;
        if (n["h_sup"]) h_sup = number(n["h_sup"], "h_sup").value;
        GraphSet g = located(n, [&] {
            if (n["width"]) {
                if (n["h2"]) fail(n, "give either h2 or width, not both");
                const Number w = number(n["width"], "width");
                if (h1_exact) {
                    h2_exact = *h1_exact;
                    for (auto& v : *h2_exact) {
                        v.value += w.value;
                        if (v.exact && w.exact) {
                            *v.exact += *w.exact;
                        } else {
                            v.exact.reset();
                        }
                    }
                }
                return GraphSet::parallel(base, h1, w.value);
            }
            Height h2 = height(required(n, "h2"), sys, "h2", h2_exact);
            if (!h_sup && h1_exact && h2_exact) {
                // per-state heights: the largest width is known
                double widest = 0.0;
                for (std::size_t i = 0; i < h1_exact->size(); ++i) {
                    widest = std::max(widest, (*h2_exact)[i].value - (*h1_exact)[i].value);
                }
                h_sup = widest;
            }
            return GraphSet::between(base, h1, h2, h_sup);
        });
        located(n, [&] { validate(flow, g); });
        return SetSpec{std::move(name), FlowSet{std::move(g)}, line, std::nullopt, std::nullopt, std::move(h1_exact),
                       std::move(h2_exact)};
    }

    std::string origin_;
    Overrides ov_;
};

} // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& origin, const Overrides& overrides) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigurationError(origin + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    return Parser(origin, overrides).parse(root);
}

ExperimentConfig load_config(const std::string& path, const Overrides& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigurationError("cannot read config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path, overrides);
}

} // namespace kacflow::cli
