#include "nsqmc/report.hpp"

#include "nsqmc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace nsqmc {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("export_report: cannot open " + path);
    return out;
}

} // namespace

void export_report(const ErrorReport& report, const ExperimentConfig& cfg,
                   const std::string& prefix) {
    const std::string base = prefix + "_" + report.method;

    {
        auto out = open_out(base + "_shifts.csv");
        out << "functional,N,shift,Q\n";
        for (const auto& row : report.rows)
            for (size_t r = 0; r < row.Q_r.size(); ++r)
                out << row.functional << ',' << row.N << ',' << r << ','
                    << fmt(row.Q_r[r]) << '\n';
    }
    {
        auto out = open_out(base + "_summary.csv");
        out << "functional,N,R,Q_bar,std_error\n";
        for (const auto& row : report.rows)
            out << row.functional << ',' << row.N << ',' << row.Q_r.size() << ','
                << fmt(row.Q_bar) << ',' << fmt(row.std_error) << '\n';
    }
    {
        auto out = open_out(base + "_plotdata.csv");
        out << "functional,N,log_N,std_error,log_std_error\n";
        for (const auto& row : report.rows) {
            const double log_e = row.std_error > 0.0
                                     ? std::log(row.std_error)
                                     : std::numeric_limits<double>::quiet_NaN();
            out << row.functional << ',' << row.N << ','
                << fmt(std::log(static_cast<double>(row.N))) << ','
                << fmt(row.std_error) << ',' << fmt(log_e) << '\n';
        }
    }
    {
        auto out = open_out(base + "_rates.csv");
        out << "functional,rate\n";
        for (const auto& [name, rate] : report.rates)
            out << name << ',' << fmt(rate) << '\n';
    }
    {
        auto out = open_out(base + "_config.txt");
        out << cfg.canonical();
        out << "# provenance\n";
        out << "# method=" << report.method << '\n';
        out << "# seed=" << report.seed << '\n';
        char buf[32];
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(report.config_hash));
        out << "# config_hash=" << buf << '\n';
        for (const auto& [N, zh] : report.z_hash) {
            std::snprintf(buf, sizeof buf, "%016llx",
                          static_cast<unsigned long long>(zh));
            out << "# z_hash_N" << N << '=' << buf << '\n';
        }
        // Measured standard errors estimate the quadrature component of the
        // error only; mesh, time-step and truncation contributions are fixed
        // by the configuration.
        out << "# error_component=quadrature_only\n";
        if (cfg.assumed_k > 0.0)
            out << "# expected_truncation_rate_exponent="
                << fmt(-(cfg.assumed_k / 2.0 - 1.0)) << '\n';
        if (report.partial) out << "# partial=1\n";
    }
    if (!report.h1_diagnostics.empty()) {
        auto out = open_out(base + "_h1diag.csv");
        out << "N,sample,exp_field_h1\n";
        for (const auto& d : report.h1_diagnostics)
            out << static_cast<long>(d[0]) << ',' << static_cast<long>(d[1])
                << ',' << fmt(d[2]) << '\n';
    }
}

std::vector<SummaryRow> import_summary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("import_summary: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "functional,N,R,Q_bar,std_error")
        throw ConfigError("import_summary: unexpected header in " + path);
    std::vector<SummaryRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        SummaryRow row;
        std::string field;
        if (!std::getline(ss, row.functional, ',') || !std::getline(ss, field, ','))
            throw ConfigError("import_summary: malformed row in " + path);
        row.N = std::stoi(field);
        if (!std::getline(ss, field, ','))
            throw ConfigError("import_summary: malformed row in " + path);
        row.R = std::stoi(field);
        if (!std::getline(ss, field, ','))
            throw ConfigError("import_summary: malformed row in " + path);
        row.Q_bar = std::strtod(field.c_str(), nullptr);
        if (!std::getline(ss, field, ','))
            throw ConfigError("import_summary: malformed row in " + path);
        row.std_error = std::strtod(field.c_str(), nullptr);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<std::pair<std::string, double>> rates_from_summary(
    const std::vector<SummaryRow>& rows) {
    std::vector<std::string> names;
    for (const auto& row : rows)
        if (std::find(names.begin(), names.end(), row.functional) == names.end())
            names.push_back(row.functional);
    std::vector<std::pair<std::string, double>> rates;
    for (const auto& name : names) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& row : rows)
            if (row.functional == name) pts.emplace_back(row.N, row.std_error);
        rates.emplace_back(name, estimate_rate(pts));
    }
    return rates;
}

} // namespace nsqmc
