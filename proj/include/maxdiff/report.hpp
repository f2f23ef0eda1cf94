#pragma once

#include <string>
#include <string_view>

#include "maxdiff/estimator.hpp"

namespace maxdiff {

enum class ReportFormat { text, csv, json };

ReportFormat parse_report_format(std::string_view name);

// Items in descending share order with above-chance items flagged; the
// footer carries the cutoff, sample size, convergence state and lambda.
// Text columns: rank, id, label, share, CI, flag.
std::string render_report(const FitResult& result, double chance_cutoff,
                          ReportFormat format);

// "5.0" for whole tenths, otherwise two decimals ("5.56").
std::string format_percent(double value);

}  // namespace maxdiff
