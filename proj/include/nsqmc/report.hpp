#pragma once

#include "nsqmc/experiment.hpp"

#include <string>
#include <vector>

namespace nsqmc {

/// Files written per report (method = qmc | mc):
///   <prefix>_<method>_shifts.csv    functional,N,shift,Q
///   <prefix>_<method>_summary.csv   functional,N,R,Q_bar,std_error
///   <prefix>_<method>_plotdata.csv  functional,N,log_N,std_error,log_std_error
///   <prefix>_<method>_rates.csv     functional,rate
///   <prefix>_<method>_config.txt    config snapshot + provenance comments
///   <prefix>_<method>_h1diag.csv    per-sample ||exp Z_s||_H1 (diagnostics on)
/// Floats are printed with 17 significant digits, so re-importing reproduces
/// the values bitwise.
void export_report(const ErrorReport& report, const ExperimentConfig& cfg,
                   const std::string& prefix);

struct SummaryRow {
    std::string functional;
    int N = 0;
    int R = 0;
    double Q_bar = 0.0;
    double std_error = 0.0;
};

std::vector<SummaryRow> import_summary(const std::string& path);

/// Per-functional rate regression over an imported summary.
std::vector<std::pair<std::string, double>> rates_from_summary(
    const std::vector<SummaryRow>& rows);

} // namespace nsqmc
