#include "protonesy/metrics.hpp"

#include <sstream>
#include <stdexcept>

namespace protonesy {

std::int64_t ConfusionMatrix::total() const {
    std::int64_t t = 0;
    for (std::int64_t c : counts) t += c;
    return t;
}

std::string ConfusionMatrix::to_csv() const {
    std::ostringstream out;
    out << "truth\\pred";
    for (int c = 0; c < num_classes; ++c) out << ',' << c;
    out << '\n';
    for (int r = 0; r < num_classes; ++r) {
        out << r;
        for (int c = 0; c < num_classes; ++c) out << ',' << at(r, c);
        out << '\n';
    }
    return out.str();
}

std::string MetricReport::to_csv_row(std::uint64_t seed) const {
    std::ostringstream out;
    out.precision(17);
    out << seed << ',' << acc_c << ',' << f1_c << ',' << acc_y << ',' << f1_y << ',' << cls_c;
    return out.str();
}

double accuracy(const ConfusionMatrix& cm) {
    const std::int64_t total = cm.total();
    if (total == 0) throw std::invalid_argument("accuracy: empty confusion matrix");
    std::int64_t diag = 0;
    for (int c = 0; c < cm.num_classes; ++c) diag += cm.at(c, c);
    return static_cast<double>(diag) / static_cast<double>(total);
}

void precision_recall(const ConfusionMatrix& cm, std::vector<double>& precision,
                      std::vector<double>& recall) {
    const int h = cm.num_classes;
    precision.assign(static_cast<std::size_t>(h), 0.0);
    recall.assign(static_cast<std::size_t>(h), 0.0);
    for (int c = 0; c < h; ++c) {
        std::int64_t row = 0, col = 0;
        for (int j = 0; j < h; ++j) {
            row += cm.at(c, j);
            col += cm.at(j, c);
        }
        const std::int64_t tp = cm.at(c, c);
        precision[static_cast<std::size_t>(c)] = col > 0 ? static_cast<double>(tp) / col : 0.0;
        recall[static_cast<std::size_t>(c)] = row > 0 ? static_cast<double>(tp) / row : 0.0;
    }
}

double macro_f1(const ConfusionMatrix& cm) {
    std::vector<double> precision, recall;
    precision_recall(cm, precision, recall);
    double sum = 0.0;
    int present = 0;
    for (int c = 0; c < cm.num_classes; ++c) {
        std::int64_t row = 0;
        for (int j = 0; j < cm.num_classes; ++j) row += cm.at(c, j);
        if (row == 0) continue;  // absent from ground truth
        ++present;
        const double p = precision[static_cast<std::size_t>(c)];
        const double r = recall[static_cast<std::size_t>(c)];
        sum += (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    }
    if (present == 0) throw std::invalid_argument("macro_f1: no ground-truth classes");
    return sum / static_cast<double>(present);
}

double concept_collapse(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw std::invalid_argument("concept_collapse: empty confusion matrix");
    int present = 0, covered = 0;
    for (int c = 0; c < cm.num_classes; ++c) {
        std::int64_t row = 0, col = 0;
        for (int j = 0; j < cm.num_classes; ++j) {
            row += cm.at(c, j);
            col += cm.at(j, c);
        }
        if (row > 0) {
            ++present;
            if (col > 0) ++covered;
        }
    }
    return 1.0 - static_cast<double>(covered) / static_cast<double>(present);
}

EvalResult evaluate_predictions(const EvalInputs& inputs) {
    if (inputs.concept_truth.size() != inputs.concept_pred.size())
        throw std::invalid_argument("evaluate_predictions: concept length mismatch");
    if (inputs.label_truth.size() != inputs.label_pred.size())
        throw std::invalid_argument("evaluate_predictions: label length mismatch");

    EvalResult result;
    result.concept_confusion = ConfusionMatrix(inputs.concept_classes);
    for (std::size_t i = 0; i < inputs.concept_truth.size(); ++i)
        result.concept_confusion.add(inputs.concept_truth[i], inputs.concept_pred[i]);

    result.label_confusion = ConfusionMatrix(inputs.label_classes);
    for (std::size_t i = 0; i < inputs.label_truth.size(); ++i)
        result.label_confusion.add(inputs.label_truth[i], inputs.label_pred[i]);

    MetricReport& r = result.report;
    r.acc_c = accuracy(result.concept_confusion);
    r.f1_c = macro_f1(result.concept_confusion);
    r.acc_y = accuracy(result.label_confusion);
    r.f1_y = macro_f1(result.label_confusion);
    r.cls_c = concept_collapse(result.concept_confusion);
    precision_recall(result.concept_confusion, r.concept_precision, r.concept_recall);
    return result;
}

}  // namespace protonesy
