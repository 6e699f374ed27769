#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "kacflow/formulas.hpp"

namespace kacflow::cli {

enum class Format { csv, json };

Format parse_format(const std::string& text);

/// One line of a report. `passed` drives the exit status and is not printed;
/// a failing row is recognisable from its z_score.
struct ReportRow {
    std::string experiment_id;
    std::string system;
    std::string roof;
    std::string set;
    std::string quantity;
    double mc_estimate = 0.0;
    double mc_stderr = 0.0;
    double analytic_value = 0.0;
    double z_score = 0.0;
    std::size_t n_samples = 0;
    std::size_t discarded = 0;
    std::uint64_t seed = 0;
    unsigned workers = 1;
    std::optional<double> wall_time_ms;
    bool passed = true;
};

/// Context shared by every row of one experiment.
struct RowContext {
    std::string experiment_id;
    std::string system;
    std::string roof;
    std::uint64_t seed = 0;
    unsigned workers = 1;
};

ReportRow make_row(const RowContext& ctx, const std::string& set, const EstimateReport& r);

/// Shortest round-trip decimal form; "nan", "inf" and "-inf" otherwise.
std::string format_number(double v);

const std::vector<std::string>& report_columns();

void write_report(std::ostream& os, const std::vector<ReportRow>& rows, Format format);

} // namespace kacflow::cli
