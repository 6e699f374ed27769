#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cli/report.hpp"
#include "kacflow/kacflow.hpp"

namespace kacflow::cli {

enum class Quantity { mean_return, rhs_A, rhs_B, cross_section, entropy_quotient, helmberg, stat1, linearity, oracle_suite };

Quantity parse_quantity(const std::string& text);
std::string to_string(Quantity q);

/// A numeric config value, kept with its exact form when it has one.
struct Number {
    double value = 0.0;
    std::optional<oracle::Rational> exact;
};

struct SetSpec {
    std::string name;
    FlowSet set;
    int line = 0;
    // exact counterparts, present for permutation systems
    std::optional<Number> t1, t2;
    std::optional<std::vector<Number>> h1, h2;
};

struct ExperimentConfig {
    std::string experiment_id = "experiment";
    std::optional<SuspensionFlow> flow;
    std::string system_label;
    std::string roof_label;
    /// Exact weights and roof values, when the system is a permutation and
    /// every number was written exactly.
    std::optional<std::vector<oracle::Rational>> exact_weights;
    std::optional<std::vector<oracle::Rational>> exact_roof;
    std::vector<SetSpec> sets;
    std::vector<Quantity> quantities;
    std::size_t samples = 1'000'000;
    std::uint64_t seed = 0;
    unsigned workers = 1;
    std::vector<double> s_list{0.1, 0.05, 0.01};
    std::vector<double> c_list{1.0, 1.5, 2.0, 3.0};
    std::string out_path;
    Format format = Format::csv;

    [[nodiscard]] const SuspensionFlow& suspension() const { return *flow; }
    /// The exact model of a permutation system; throws ConfigurationError when
    /// the config does not determine one.
    [[nodiscard]] oracle::RationalFlowModel exact_model() const;
};

/// Settings given on the command line win over the config file.
struct Overrides {
    std::optional<std::size_t> samples;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::optional<std::string> out_path;
    std::optional<Format> format;
};

/// Parses the YAML text. Errors are ConfigurationError (or one of its
/// subclasses) and carry "<origin>:<line>:" in front of the message.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>",
                              const Overrides& overrides = {});

ExperimentConfig load_config(const std::string& path, const Overrides& overrides = {});

} // namespace kacflow::cli
