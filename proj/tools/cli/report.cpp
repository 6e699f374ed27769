#include "cli/report.hpp"

#include <charconv>
#include <cmath>

#include <json.hpp>

namespace kacflow::cli {

Format parse_format(const std::string& text) {
    if (text == "csv") return Format::csv;
    if (text == "json") return Format::json;
    throw ConfigurationError("unknown report format '" + text + "' (expected csv or json)");
}

ReportRow make_row(const RowContext& ctx, const std::string& set, const EstimateReport& r) {
    ReportRow row;
    row.experiment_id = ctx.experiment_id;
    row.system = ctx.system;
    row.roof = ctx.roof;
    row.set = set;
    row.quantity = r.quantity;
    row.mc_estimate = r.mc_estimate;
    row.mc_stderr = r.mc_stderr;
    row.analytic_value = r.analytic_value;
    row.z_score = r.z_score;
    row.n_samples = r.n_samples;
    row.discarded = r.discarded_samples;
    row.seed = ctx.seed;
    row.workers = ctx.workers;
    row.passed = r.passes();
    return row;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

const std::vector<std::string>& report_columns() {
    static const std::vector<std::string> cols{
        "experiment_id", "system", "roof",     "set",  "quantity", "mc_estimate", "mc_stderr",
        "analytic_value", "z_score", "n_samples", "discarded", "seed", "workers",  "wall_time_ms"};
    return cols;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::vector<std::string> cells(const ReportRow& r) {
    return {r.experiment_id,
            r.system,
            r.roof,
            r.set,
            r.quantity,
            format_number(r.mc_estimate),
            format_number(r.mc_stderr),
            format_number(r.analytic_value),
            format_number(r.z_score),
            std::to_string(r.n_samples),
            std::to_string(r.discarded),
            std::to_string(r.seed),
            std::to_string(r.workers),
            r.wall_time_ms ? format_number(*r.wall_time_ms) : std::string()};
}

// JSON has no NaN or infinity; those become strings.
nlohmann::ordered_json json_number(double v) {
    if (std::isfinite(v)) return v;
    return format_number(v);
}

} // namespace

void write_report(std::ostream& os, const std::vector<ReportRow>& rows, Format format) {
    if (format == Format::csv) {
        const auto& cols = report_columns();
        for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
        os << '\n';
        for (const auto& r : rows) {
            const auto c = cells(r);
            for (std::size_t i = 0; i < c.size(); ++i) os << (i ? "," : "") << csv_field(c[i]);
            os << '\n';
        }
        return;
    }
    auto out = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json j;
        j["experiment_id"] = r.experiment_id;
        j["system"] = r.system;
        j["roof"] = r.roof;
        j["set"] = r.set;
        j["quantity"] = r.quantity;
        j["mc_estimate"] = json_number(r.mc_estimate);
        j["mc_stderr"] = json_number(r.mc_stderr);
        j["analytic_value"] = json_number(r.analytic_value);
        j["z_score"] = json_number(r.z_score);
        j["n_samples"] = r.n_samples;
        j["discarded"] = r.discarded;
        j["seed"] = r.seed;
        j["workers"] = r.workers;
        j["wall_time_ms"] = r.wall_time_ms ? json_number(*r.wall_time_ms) : nlohmann::ordered_json(nullptr);
        out.push_back(std::move(j));
    }
    os << out.dump(2) << '\n';
}

} // namespace kacflow::cli
