#include "maelab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "maelab/errors.hpp"

namespace maelab {

namespace {

void validate(const EvalBatch& batch) {
    if (batch.probabilities.size() != batch.labels.size()) {
        throw TensorError("metrics: probability/label row counts differ");
    }
    if (batch.probabilities.empty()) throw TensorError("metrics: empty batch");
    for (const auto& row : batch.probabilities) {
        for (double p : row) {
            if (!std::isfinite(p)) throw TensorError("metrics: non-finite probability");
        }
    }
}

double safe_div(double num, double den) { return den > 0.0 ? num / den : 0.0; }

double f1_from(double precision, double recall) {
    return (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

}  // namespace

std::array<LabelCounts, kNumLabels> per_label_counts(const EvalBatch& batch) {
    validate(batch);
    std::array<LabelCounts, kNumLabels> counts{};
    for (size_t i = 0; i < batch.probabilities.size(); ++i) {
        for (int k = 0; k < kNumLabels; ++k) {
            const bool predicted = batch.probabilities[i][k] > batch.threshold;
            const bool actual = batch.labels[i][k];
            if (predicted && actual) ++counts[k].tp;
            else if (predicted && !actual) ++counts[k].fp;
            else if (!predicted && actual) ++counts[k].fn;
            else ++counts[k].tn;
        }
    }
    return counts;
}

std::optional<double> rank_auc(const std::vector<double>& scores,
                               const std::vector<bool>& labels) {
    const size_t n = scores.size();
    size_t n_pos = 0;
    for (bool b : labels) n_pos += b ? 1 : 0;
    const size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // Midranks over tie groups, 1-based.
    double positive_rank_sum = 0.0;
    size_t lo = 0;
    while (lo < n) {
        size_t hi = lo + 1;
        while (hi < n && scores[order[hi]] == scores[order[lo]]) ++hi;
        const double midrank = 0.5 * (static_cast<double>(lo + 1) + static_cast<double>(hi));
        for (size_t i = lo; i < hi; ++i) {
            if (labels[order[i]]) positive_rank_sum += midrank;
        }
        lo = hi;
    }
    const double np = static_cast<double>(n_pos);
    return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

MetricsReport metric_panel(const EvalBatch& batch) {
    const auto counts = per_label_counts(batch);
    MetricsReport report;

    double f1_sum = 0.0, precision_sum = 0.0, recall_sum = 0.0, accuracy_sum = 0.0;
    long pooled_tp = 0, pooled_fp = 0, pooled_fn = 0;
    double auc_sum = 0.0;
    int auc_terms = 0;

    const size_t n = batch.probabilities.size();
    for (int k = 0; k < kNumLabels; ++k) {
        const LabelCounts& c = counts[k];
        const double precision = safe_div(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
        const double recall = safe_div(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
        f1_sum += f1_from(precision, recall);
        precision_sum += precision;
        recall_sum += recall;
        accuracy_sum += static_cast<double>(c.tp + c.tn) / static_cast<double>(n);
        pooled_tp += c.tp;
        pooled_fp += c.fp;
        pooled_fn += c.fn;

        std::vector<double> scores(n);
        std::vector<bool> truth(n);
        for (size_t i = 0; i < n; ++i) {
            scores[i] = batch.probabilities[i][k];
            truth[i] = batch.labels[i][k];
        }
        if (auto auc = rank_auc(scores, truth)) {
            auc_sum += *auc;
            ++auc_terms;
        } else {
            report.warnings.push_back(std::string("label '") + kLabelNames[k] +
                                      "' is single-class: AUC undefined, excluded from macro AUC");
        }
    }

    report.macro_f1 = f1_sum / kNumLabels;
    report.macro_precision = precision_sum / kNumLabels;
    report.macro_recall = recall_sum / kNumLabels;
    report.macro_accuracy = accuracy_sum / kNumLabels;
    report.macro_auc = auc_terms > 0 ? auc_sum / auc_terms
                                     : std::numeric_limits<double>::quiet_NaN();

    const double micro_precision =
        safe_div(static_cast<double>(pooled_tp), static_cast<double>(pooled_tp + pooled_fp));
    const double micro_recall =
        safe_div(static_cast<double>(pooled_tp), static_cast<double>(pooled_tp + pooled_fn));
    report.micro_f1 = f1_from(micro_precision, micro_recall);

    std::vector<double> pooled_scores;
    std::vector<bool> pooled_truth;
    pooled_scores.reserve(n * kNumLabels);
    pooled_truth.reserve(n * kNumLabels);
    for (size_t i = 0; i < n; ++i) {
        for (int k = 0; k < kNumLabels; ++k) {
            pooled_scores.push_back(batch.probabilities[i][k]);
            pooled_truth.push_back(batch.labels[i][k]);
        }
    }
    if (auto auc = rank_auc(pooled_scores, pooled_truth)) {
        report.micro_auc = *auc;
    } else {
        report.micro_auc = std::numeric_limits<double>::quiet_NaN();
        report.warnings.push_back("pooled labels are single-class: micro AUC undefined");
    }
    return report;
}

std::string format_mean_std(double mean, double stddev) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f ± %.3f", mean, stddev);
    return buf;
}

namespace {

MetricAggregate aggregate_values(const std::vector<double>& values) {
    const double k = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= k;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    MetricAggregate agg;
    agg.mean = mean;
    agg.stddev = std::sqrt(ss / (k - 1.0));
    agg.formatted = format_mean_std(agg.mean, agg.stddev);
    return agg;
}

std::string fixed3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

}  // namespace

ReportAggregate seed_aggregate(const std::vector<MetricsReport>& reports) {
    if (reports.size() < 2) throw TensorError("seed_aggregate: need at least 2 reports");
    auto collect = [&](double MetricsReport::* field) {
        std::vector<double> values;
        values.reserve(reports.size());
        for (const auto& r : reports) values.push_back(r.*field);
        return aggregate_values(values);
    };
    ReportAggregate agg;
    agg.macro_f1 = collect(&MetricsReport::macro_f1);
    agg.macro_auc = collect(&MetricsReport::macro_auc);
    agg.macro_accuracy = collect(&MetricsReport::macro_accuracy);
    agg.micro_f1 = collect(&MetricsReport::micro_f1);
    agg.macro_precision = collect(&MetricsReport::macro_precision);
    agg.macro_recall = collect(&MetricsReport::macro_recall);
    agg.micro_auc = collect(&MetricsReport::micro_auc);
    return agg;
}

std::string csv_row(const std::string& model, const MetricsReport& r) {
    return model + "," + fixed3(r.macro_f1) + "," + fixed3(r.macro_auc) + "," +
           fixed3(r.macro_accuracy) + "," + fixed3(r.micro_f1) + "," +
           fixed3(r.macro_precision) + "," + fixed3(r.macro_recall) + "," + fixed3(r.micro_auc);
}

std::string csv_row(const std::string& model, const ReportAggregate& a) {
    return model + "," + a.macro_f1.formatted + "," + a.macro_auc.formatted + "," +
           a.macro_accuracy.formatted + "," + a.micro_f1.formatted + "," +
           a.macro_precision.formatted + "," + a.macro_recall.formatted + "," +
           a.micro_auc.formatted;
}

}  // namespace maelab
