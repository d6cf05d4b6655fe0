#include "imit/cli/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "imit/core/error.hpp"

namespace imit {

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
}

EvalReport make_eval_report(std::string metric_name, double tolerance,
                            std::vector<EvalRecord> records) {
    require(!records.empty(), "make_eval_report: no records");
    EvalReport rep;
    rep.metric_name = std::move(metric_name);
    rep.tolerance = tolerance;
    rep.records = std::move(records);

    double sum = 0.0;
    std::size_t within = 0;
    std::vector<double> vals;
    vals.reserve(rep.records.size());
    for (const EvalRecord& r : rep.records) {
        sum += r.metric;
        if (r.metric <= tolerance) ++within;
        vals.push_back(r.metric);
    }
    std::sort(vals.begin(), vals.end());
    const std::size_t n = vals.size();
    rep.mean = sum / static_cast<double>(n);
    rep.median = (n % 2 == 1) ? vals[n / 2]
                              : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
    rep.fraction_within = static_cast<double>(within) / static_cast<double>(n);
    return rep;
}

std::string format_eval_report(const EvalReport& report) {
    std::ostringstream out;
    out << "metric: " << report.metric_name << "\n";
    out << "episodes: " << report.records.size() << "\n";
    out << "mean: " << format_real(report.mean) << "\n";
    out << "median: " << format_real(report.median) << "\n";
    out << "tolerance: " << format_real(report.tolerance) << "\n";
    out << "fraction_within_tolerance: " << format_real(report.fraction_within)
        << "\n";
    return out.str();
}

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "write_csv: cannot open " + path);
    out << header << "\n";
    for (const std::vector<double>& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ",";
            out << format_real(row[i]);
        }
        out << "\n";
    }
    out.flush();
    require(out.good(), "write_csv: write failed for " + path);
}

}  // namespace imit
