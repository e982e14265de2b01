#include "crashsev/metrics.hpp"

#include <cstdio>
#include <numeric>
#include <sstream>

#include "crashsev/errors.hpp"

namespace crashsev::metrics {

std::size_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

std::size_t ConfusionMatrix::row_sum(std::size_t truth) const {
    std::size_t s = 0;
    for (std::size_t p = 0; p < n_classes; ++p) s += at(truth, p);
    return s;
}

std::size_t ConfusionMatrix::col_sum(std::size_t pred) const {
    std::size_t s = 0;
    for (std::size_t t = 0; t < n_classes; ++t) s += at(t, pred);
    return s;
}

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred,
                          std::size_t n_classes) {
    if (y_true.size() != y_pred.size())
        throw ContractError("confusion: y_true and y_pred lengths differ");
    ConfusionMatrix cm;
    cm.n_classes = n_classes;
    cm.counts.assign(n_classes * n_classes, 0);
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int t = y_true[i], p = y_pred[i];
        if (t < 0 || static_cast<std::size_t>(t) >= n_classes || p < 0 ||
            static_cast<std::size_t>(p) >= n_classes)
            throw ContractError("confusion: label out of range at row " + std::to_string(i));
        ++cm.at(static_cast<std::size_t>(t), static_cast<std::size_t>(p));
    }
    return cm;
}

ClassMetrics class_metrics(const ConfusionMatrix& cm, std::size_t class_index) {
    if (class_index >= cm.n_classes) throw ContractError("class_metrics: class index out of range");
    const double tp = static_cast<double>(cm.at(class_index, class_index));
    const double fp = static_cast<double>(cm.col_sum(class_index)) - tp;
    const double fn = static_cast<double>(cm.row_sum(class_index)) - tp;
    ClassMetrics m;
    m.precision = (tp + fp) > 0.0 ? tp / (tp + fp) : 0.0;
    m.recall = (tp + fn) > 0.0 ? tp / (tp + fn) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

double accuracy(const ConfusionMatrix& cm) {
    const std::size_t total = cm.total();
    if (total == 0) throw ContractError("accuracy: empty confusion matrix");
    std::size_t trace = 0;
    for (std::size_t c = 0; c < cm.n_classes; ++c) trace += cm.at(c, c);
    return static_cast<double>(trace) / static_cast<double>(total);
}

const std::vector<std::string>& severity_class_names() {
    static const std::vector<std::string> names = {
        "Fatal", "Serious injury", "Minor injury", "Possible injury", "No injury/PDO"};
    return names;
}

EvaluationReport report(std::span<const int> y_true, std::span<const int> y_pred,
                        std::size_t n_classes, std::vector<std::string> class_names) {
    EvaluationReport rep;
    rep.confusion = confusion(y_true, y_pred, n_classes);
    for (std::size_t c = 0; c < n_classes; ++c)
        rep.per_class.push_back(class_metrics(rep.confusion, c));
    rep.accuracy = accuracy(rep.confusion);
    if (class_names.empty() && n_classes == severity_class_names().size())
        class_names = severity_class_names();
    while (class_names.size() < n_classes)
        class_names.push_back("Class " + std::to_string(class_names.size()));
    rep.class_names = std::move(class_names);
    return rep;
}

std::string render_text(const EvaluationReport& rep) {
    std::size_t name_w = std::string("Crash severity class").size();
    for (const auto& n : rep.class_names) name_w = std::max(name_w, n.size());

    auto fmt3 = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3f", v);
        return std::string(buf);
    };

    std::ostringstream os;
    os << "Crash severity class" << std::string(name_w - 20 + 2, ' ')
       << "Precision  Recall  F1 score\n";
    for (std::size_t c = 0; c < rep.per_class.size(); ++c) {
        const auto& m = rep.per_class[c];
        const std::string& name = rep.class_names[c];
        os << name << std::string(name_w - name.size() + 2, ' ') << fmt3(m.precision)
           << "      " << fmt3(m.recall) << "   " << fmt3(m.f1) << "\n";
    }
    os << "Accuracy" << std::string(name_w - 8 + 2, ' ') << fmt3(rep.accuracy) << "\n";
    return os.str();
}

}  // namespace crashsev::metrics
