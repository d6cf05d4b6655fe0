#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace imit {

// One evaluated trajectory: its index in the evaluation set, the task
// parameter it demonstrates (target speed or flattened target index), and the
// imitation metric value.
struct EvalRecord {
    std::size_t id = 0;
    double task = 0.0;
    double metric = 0.0;
};

struct EvalReport {
    std::string metric_name;
    double tolerance = 0.0;
    std::vector<EvalRecord> records;
    // Aggregates; always recomputable from the records.
    double mean = 0.0;
    double median = 0.0;
    double fraction_within = 0.0;
};

// Fills the aggregates from the records (even-length medians average the two
// middle order statistics).
EvalReport make_eval_report(std::string metric_name, double tolerance,
                            std::vector<EvalRecord> records);

std::string format_eval_report(const EvalReport& report);

// CSV with %.17g reals so logs round-trip and re-runs diff byte-for-byte.
void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<double>>& rows);

std::string format_real(double v);

}  // namespace imit
