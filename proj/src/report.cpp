#include "maxdiff/report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "maxdiff/csv.hpp"
#include "maxdiff/error.hpp"
#include "maxdiff/json_io.hpp"

namespace maxdiff {

namespace {

std::string fixed(double value, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << value;
    return os.str();
}

std::string footer_line(const FitResult& result, double cutoff) {
    std::ostringstream os;
    os << "chance cutoff: " << format_percent(cutoff) << "% | N: "
       << result.n_respondents << " respondents, " << result.n_observations
       << " observations | converged: " << (result.converged ? "yes" : "no")
       << " (" << result.iterations << " iterations) | lambda: " << result.lambda;
    return os.str();
}

std::string render_text(const FitResult& result, double cutoff) {
    const auto& rows = result.shares.rows;
    std::size_t id_width = 2, label_width = 5;
    for (const auto& row : rows) {
        id_width = std::max(id_width, row.id.size());
        label_width = std::max(label_width, row.label.size());
    }
    std::ostringstream os;
    os << std::left << std::setw(5) << "rank" << "  " << std::setw(static_cast<int>(id_width))
       << "id" << "  " << std::setw(static_cast<int>(label_width)) << "label" << "  "
       << std::right << std::setw(8) << "share" << "  " << std::left << std::setw(17)
       << "95% CI" << "  " << "flag" << "\n";
    for (auto i : result.shares.order_by_rank()) {
        const auto& row = rows[i];
        std::string ci = "-";
        if (row.ci_low && row.ci_high)
            ci = "[" + fixed(*row.ci_low, 2) + ", " + fixed(*row.ci_high, 2) + "]";
        os << std::left << std::setw(5) << row.rank << "  "
           << std::setw(static_cast<int>(id_width)) << row.id << "  "
           << std::setw(static_cast<int>(label_width)) << row.label << "  " << std::right
           << std::setw(7) << fixed(row.share, 2) << "%" << "  " << std::left
           << std::setw(17) << ci << "  " << (row.share >= cutoff ? "* above chance" : "")
           << "\n";
    }
    os << footer_line(result, cutoff) << "\n";
    return os.str();
}

std::string render_csv(const FitResult& result, double cutoff) {
    std::string out = "#" + footer_line(result, cutoff) + "\n";
    out += "rank,id,label,share,ci_low,ci_high,above_chance,ci_above_chance\n";
    auto opt = [](const std::optional<double>& v) {
        if (!v) return std::string();
        std::ostringstream os;
        os << std::setprecision(17) << *v;
        return os.str();
    };
    for (auto i : result.shares.order_by_rank()) {
        const auto& row = result.shares.rows[i];
        const std::string fields[] = {
            std::to_string(row.rank),
            row.id,
            row.label,
            opt(row.share),
            opt(row.ci_low),
            opt(row.ci_high),
            row.share >= cutoff ? "true" : "false",
            row.ci_low ? (*row.ci_low >= cutoff ? "true" : "false") : ""};
        out += csv::format_row(fields);
    }
    return out;
}

std::string render_json(const FitResult& result, double cutoff) {
    json::Json j;
    json::Json items = json::Json::array();
    const auto rows = json::to_json(result.shares);
    for (auto i : result.shares.order_by_rank()) {
        auto row = rows[i];
        row["above_chance"] = result.shares.rows[i].share >= cutoff;
        items.push_back(std::move(row));
    }
    j["items"] = std::move(items);
    j["chance_cutoff"] = cutoff;
    j["n_respondents"] = result.n_respondents;
    j["n_observations"] = result.n_observations;
    j["converged"] = result.converged;
    j["iterations"] = result.iterations;
    j["lambda"] = result.lambda;
    return j.dump(2) + "\n";
}

}  // namespace

ReportFormat parse_report_format(std::string_view name) {
    if (name == "text") return ReportFormat::text;
    if (name == "csv") return ReportFormat::csv;
    if (name == "json") return ReportFormat::json;
    throw Error(ErrorKind::invalid_input, "unknown format '" + std::string(name) + "'");
}

std::string format_percent(double value) {
    const double tenths = value * 10.0;
    if (std::abs(tenths - std::round(tenths)) < 1e-9) return fixed(value, 1);
    return fixed(value, 2);
}

std::string render_report(const FitResult& result, double chance_cutoff,
                          ReportFormat format) {
    switch (format) {
        case ReportFormat::text: return render_text(result, chance_cutoff);
        case ReportFormat::csv: return render_csv(result, chance_cutoff);
        case ReportFormat::json: return render_json(result, chance_cutoff);
    }
    return {};
}

}  // namespace maxdiff
