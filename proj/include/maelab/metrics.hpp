#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "maelab/labels.hpp"

namespace maelab {

// Predictions and ground truth for one evaluated configuration.
// A sample is predicted positive for a label when its probability is
// strictly greater than the threshold.
struct EvalBatch {
    std::vector<std::array<double, kNumLabels>> probabilities;
    std::vector<LabelSet> labels;
    double threshold = 0.5;
};

struct LabelCounts {
    long tp = 0, fp = 0, fn = 0, tn = 0;
};

std::array<LabelCounts, kNumLabels> per_label_counts(const EvalBatch& batch);

// Full panel. Macro metrics are unweighted means of per-label binary
// metrics; micro F1 pools counts; AUC uses the Mann-Whitney rank
// statistic with midrank ties, pooled over every (sample, label) pair
// for the micro variant. Per-label F1 (and precision/recall) fall back
// to 0 on empty denominators. A single-class label column is excluded
// from the macro AUC mean with a warning recorded in the report.
struct MetricsReport {
    double macro_f1 = 0.0;
    double macro_auc = 0.0;
    double macro_accuracy = 0.0;
    double micro_f1 = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double micro_auc = 0.0;
    std::vector<std::string> warnings;
};

MetricsReport metric_panel(const EvalBatch& batch);

// Mann-Whitney AUC with midrank tie handling; nullopt when the labels
// are single-class.
std::optional<double> rank_auc(const std::vector<double>& scores,
                               const std::vector<bool>& labels);

// Mean and sample standard deviation (divisor k-1) over repeated runs,
// formatted "0.xxx ± 0.yyy". Requires at least two reports.
struct MetricAggregate {
    double mean = 0.0;
    double stddev = 0.0;
    std::string formatted;
};

struct ReportAggregate {
    MetricAggregate macro_f1, macro_auc, macro_accuracy, micro_f1, macro_precision, macro_recall,
        micro_auc;
};

ReportAggregate seed_aggregate(const std::vector<MetricsReport>& reports);

std::string format_mean_std(double mean, double stddev);

// CSV emission with the fixed column order shared by every report.
inline constexpr const char* kCsvHeader =
    "model,macro_f1,macro_auc,macro_accuracy,micro_f1,macro_precision,macro_recall,micro_auc";

std::string csv_row(const std::string& model, const MetricsReport& report);
std::string csv_row(const std::string& model, const ReportAggregate& aggregate);

}  // namespace maelab
