#pragma once

#include "patcls/dataset.hpp"
#include "patcls/matrix.hpp"
#include "patcls/taxonomy.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace patcls {

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
    std::vector<std::string> class_names;
    std::vector<std::uint64_t> counts;  // C x C, row-major

    std::size_t size() const { return class_names.size(); }
    std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts[truth * size() + pred]; }
    std::uint64_t row_sum(std::size_t truth) const;
    std::uint64_t total() const;
    std::uint64_t trace() const;

    bool operator==(const ConfusionMatrix&) const = default;
};

/// Throws ValidationError on length mismatch or out-of-range indices.
ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred,
                                 std::vector<std::string> class_names);

/// Each non-empty row scaled to sum to 100; empty rows stay zero.
Matrix row_normalize(const ConfusionMatrix& cm);

/// Recall of each class; nullopt for classes without test samples.
std::vector<std::optional<double>> per_class_accuracy(const ConfusionMatrix& cm);

/// Mean per-class recall over classes with at least one test sample.
/// Throws ValidationError "no test samples" when every row is empty.
double macro_accuracy(const ConfusionMatrix& cm);

/// trace / total. Throws ValidationError on an empty matrix.
double micro_accuracy(const ConfusionMatrix& cm);

struct EvalReport {
    Task task = Task::image_type;
    std::optional<Granularity> granularity;  // perspective task only
    ConfusionMatrix confusion;
    Matrix confusion_percent;
    std::vector<std::optional<double>> per_class;
    double macro_top1 = 0.0;
    double micro_top1 = 0.0;
    std::uint64_t n_test = 0;
    std::vector<std::string> excluded_classes;  // no test samples
};

EvalReport make_report(Task task, std::optional<Granularity> granularity, ConfusionMatrix cm);

/// Reports at C7, C4 and C2 (in that order) from one set of leaf-level labels.
/// Coarser levels coarsen both truths and predictions before scoring.
std::array<EvalReport, 3> hierarchical_report(std::span<const int> y_true_c7,
                                              std::span<const int> y_pred_c7);

/// Maps leaf indices (perspective_labels() order) to class indices at `level`.
std::vector<int> coarsen_indices(std::span<const int> leaves, Granularity level);

enum class ReportFormat { json, csv };

std::string report_json(const EvalReport& report);
/// Header `true\predicted,<class names>` then one row per true class, in percent.
std::string confusion_csv(const EvalReport& report);
/// `metric,value` rows: task, granularity, n_test, macro_top1, micro_top1 and
/// one `accuracy:<class>` row per class.
std::string metrics_csv(const EvalReport& report);

/// JSON: writes `path`. CSV: writes the matrix to `path` and the scalar
/// metrics next to it as `<stem>_metrics.csv`.
void emit_report(const EvalReport& report, const std::string& path, ReportFormat format);

/// Fixed-width text table of row-normalized percentages, two decimals.
std::string render_confusion_table(const EvalReport& report);

} // namespace patcls
