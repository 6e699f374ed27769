#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cli/catalog.hpp"
#include "cli/config.hpp"
#include "cli/run.hpp"
#include "cli/verify.hpp"

namespace {

using namespace kacflow;
using namespace kacflow::cli;

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitInvalid = 2;

int emit(const RunResult& result, const std::string& out_path, Format format) {
    if (out_path.empty() || out_path == "-") {
        write_report(std::cout, result.rows, format);
    } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) {
            std::cerr << "error: cannot write " << out_path << '\n';
            return kExitInvalid;
        }
        write_report(out, result.rows, format);
    }
    return result.all_passed ? kExitPass : kExitFail;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Suspension flows and mean return times"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> samples;
    std::optional<unsigned> workers;
    std::string out_path;
    std::string format_text;
    bool wall_time = false;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--seed", seed, "master seed");
        sub->add_option("--samples", samples, "Monte Carlo samples per estimate")->check(CLI::PositiveNumber);
        sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--out", out_path, "report file (stdout when omitted)");
        sub->add_option("--format", format_text, "report format")->check(CLI::IsMember({"csv", "json"}));
    };

    auto* run = app.add_subcommand("run", "run the experiment described by a config file");
    run->add_option("--config", config_path, "experiment config (YAML)")->required();
    common(run);
    run->add_flag("--record-wall-time", wall_time, "fill the wall_time_ms column");

    auto* verify = app.add_subcommand("verify", "run the invariant suites of every module");
    verify->add_option("--config", config_path, "also parse and validate this config");
    common(verify);

    app.add_subcommand("list-systems", "print the catalog of base systems");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInvalid;
    }

    try {
        if (app.got_subcommand("list-systems")) {
            std::cout << format_catalog();
            return kExitPass;
        }
        std::optional<Format> format;
        if (!format_text.empty()) format = parse_format(format_text);

        if (run->parsed()) {
            const Overrides ov{samples, seed, workers,
                               out_path.empty() ? std::nullopt : std::optional<std::string>(out_path), format};
            const ExperimentConfig cfg = load_config(config_path, ov);
            const RunResult result = run_experiment(cfg, wall_time);
            const int code = emit(result, cfg.out_path, cfg.format);
            if (code == kExitFail) std::cerr << "some estimates are more than 4 standard errors from the analytic value\n";
            return code;
        }

        VerifyOptions opts;
        if (seed) opts.seed = *seed;
        if (samples) opts.samples = *samples;
        if (workers) opts.workers = *workers;
        if (!config_path.empty()) opts.config_path = config_path;
        const RunResult result = verify_all(opts, std::cerr);
        return emit(result, out_path, format.value_or(Format::csv));
    } catch (const InvalidSet& e) {
        std::cerr << "invalid set: " << e.what() << '\n';
    } catch (const ConfigurationError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
    } catch (const RoofBoundViolation& e) {
        std::cerr << "RoofBoundViolation: " << e.what() << '\n';
    } catch (const BadSupBound& e) {
        std::cerr << "BadSupBound: " << e.what() << '\n';
    } catch (const ZeroEntropyBase& e) {
        std::cerr << "ZeroEntropyBase: " << e.what() << '\n';
    } catch (const ScaleRangeError& e) {
        std::cerr << "ScaleRangeError: " << e.what() << '\n';
    } catch (const InvalidExitWidth& e) {
        std::cerr << "InvalidExitWidth: " << e.what() << '\n';
    } catch (const EmptyProjection& e) {
        std::cerr << "EmptyProjection: " << e.what() << '\n';
    } catch (const UnsupportedExactIntegration& e) {
        std::cerr << "UnsupportedExactIntegration: " << e.what() << '\n';
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFail;
    }
    return kExitInvalid;
}
