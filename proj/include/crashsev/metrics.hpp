#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace crashsev::metrics {

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
    std::size_t n_classes = 0;
    std::vector<std::size_t> counts;  // n_classes * n_classes, row-major

    std::size_t at(std::size_t truth, std::size_t pred) const {
        return counts[truth * n_classes + pred];
    }
    std::size_t& at(std::size_t truth, std::size_t pred) {
        return counts[truth * n_classes + pred];
    }
    std::size_t total() const;
    std::size_t row_sum(std::size_t truth) const;
    std::size_t col_sum(std::size_t pred) const;
};

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct EvaluationReport {
    ConfusionMatrix confusion;
    std::vector<ClassMetrics> per_class;
    double accuracy = 0.0;
    std::vector<std::string> class_names;
};

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred,
                          std::size_t n_classes);

// One-vs-rest precision/recall/F1 for one class. Degenerate 0/0 cases
// return 0.
ClassMetrics class_metrics(const ConfusionMatrix& cm, std::size_t class_index);

// trace / total.
double accuracy(const ConfusionMatrix& cm);

// Default class names follow the severity scale, most severe first.
const std::vector<std::string>& severity_class_names();

EvaluationReport report(std::span<const int> y_true, std::span<const int> y_pred,
                        std::size_t n_classes,
                        std::vector<std::string> class_names = {});

// Text table: one row per class (Precision, Recall, F1 score) plus an
// accuracy line, values rounded to 3 decimals.
std::string render_text(const EvaluationReport& rep);

}  // namespace crashsev::metrics
