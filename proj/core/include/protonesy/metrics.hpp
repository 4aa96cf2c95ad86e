#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace protonesy {

// Rows = ground truth, columns = prediction.
struct ConfusionMatrix {
    int num_classes = 0;
    std::vector<std::int64_t> counts;  // row-major, num_classes^2

    explicit ConfusionMatrix(int classes = 0)
        : num_classes(classes),
          counts(static_cast<std::size_t>(classes) * static_cast<std::size_t>(classes), 0) {}

    std::int64_t& at(int truth, int pred) {
        return counts[static_cast<std::size_t>(truth) * num_classes + pred];
    }
    std::int64_t at(int truth, int pred) const {
        return counts[static_cast<std::size_t>(truth) * num_classes + pred];
    }
    std::int64_t total() const;
    void add(int truth, int pred) { ++at(truth, pred); }

    std::string to_csv() const;
};

struct MetricReport {
    double acc_c = 0.0;
    double f1_c = 0.0;   // macro, over classes present in ground truth
    double acc_y = 0.0;
    double f1_y = 0.0;
    double cls_c = 0.0;  // concept collapse, see concept_collapse()
    std::vector<double> concept_precision;  // per concept class
    std::vector<double> concept_recall;

    std::string to_csv_row(std::uint64_t seed) const;
};

// Accuracy and macro F1 from one confusion matrix. Per-class F1 is 0 when
// precision + recall is 0; the macro average runs over classes with at
// least one ground-truth instance.
double accuracy(const ConfusionMatrix& cm);
double macro_f1(const ConfusionMatrix& cm);
void precision_recall(const ConfusionMatrix& cm, std::vector<double>& precision,
                      std::vector<double>& recall);

// Concept collapse Cls(C): the fraction of ground-truth-present classes the
// predictor never outputs,
//   1 - |{c : truth(c) > 0 and predicted(c) > 0}| / |{c : truth(c) > 0}|.
// This is an artifact definition (the paper defers to its benchmark suite
// without restating the formula); it is 0 exactly when the prediction map
// covers every ground-truth class.
double concept_collapse(const ConfusionMatrix& cm);

// Full report over aligned concept and label predictions. Concept entries
// are flattened over all groups/slots; labels are per datapoint.
struct EvalInputs {
    std::vector<int> concept_truth;
    std::vector<int> concept_pred;
    int concept_classes = 0;
    std::vector<int> label_truth;
    std::vector<int> label_pred;
    int label_classes = 0;
};

struct EvalResult {
    MetricReport report;
    ConfusionMatrix concept_confusion;
    ConfusionMatrix label_confusion;
};

EvalResult evaluate_predictions(const EvalInputs& inputs);

}  // namespace protonesy
