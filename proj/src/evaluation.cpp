#include "patcls/evaluation.hpp"

#include "patcls/binary_io.hpp"
#include "patcls/csv.hpp"
#include "patcls/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>

namespace patcls {

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const {
    std::uint64_t s = 0;
    for (std::size_t j = 0; j < size(); ++j) s += at(truth, j);
    return s;
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
}

std::uint64_t ConfusionMatrix::trace() const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < size(); ++i) s += at(i, i);
    return s;
}

ConfusionMatrix confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred,
                                 std::vector<std::string> class_names) {
    if (y_true.size() != y_pred.size()) {
        throw ValidationError("confusion_matrix: " + std::to_string(y_true.size()) + " labels vs " +
                              std::to_string(y_pred.size()) + " predictions");
    }
    const std::size_t c = class_names.size();
    ConfusionMatrix cm{std::move(class_names), std::vector<std::uint64_t>(c * c, 0)};
    for (std::size_t k = 0; k < y_true.size(); ++k) {
        const int t = y_true[k];
        const int p = y_pred[k];
        if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= c || static_cast<std::size_t>(p) >= c) {
            throw ValidationError("confusion_matrix: index out of range at position " +
                                  std::to_string(k));
        }
        ++cm.counts[static_cast<std::size_t>(t) * c + static_cast<std::size_t>(p)];
    }
    return cm;
}

Matrix row_normalize(const ConfusionMatrix& cm) {
    const std::size_t c = cm.size();
    Matrix pct(c, c);
    for (std::size_t i = 0; i < c; ++i) {
        const auto sum = cm.row_sum(i);
        if (sum == 0) continue;
        for (std::size_t j = 0; j < c; ++j) {
            pct(i, j) = 100.0 * static_cast<double>(cm.at(i, j)) / static_cast<double>(sum);
        }
    }
    return pct;
}

std::vector<std::optional<double>> per_class_accuracy(const ConfusionMatrix& cm) {
    std::vector<std::optional<double>> out(cm.size());
    for (std::size_t i = 0; i < cm.size(); ++i) {
        const auto sum = cm.row_sum(i);
        if (sum > 0) out[i] = static_cast<double>(cm.at(i, i)) / static_cast<double>(sum);
    }
    return out;
}

double macro_accuracy(const ConfusionMatrix& cm) {
    double sum = 0.0;
    std::size_t present = 0;
    for (const auto& acc : per_class_accuracy(cm)) {
        if (!acc) continue;
        sum += *acc;
        ++present;
    }
    if (present == 0) throw ValidationError("no test samples");
    return sum / static_cast<double>(present);
}

double micro_accuracy(const ConfusionMatrix& cm) {
    const auto total = cm.total();
    if (total == 0) throw ValidationError("no test samples");
    return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

EvalReport make_report(Task task, std::optional<Granularity> granularity, ConfusionMatrix cm) {
    EvalReport r;
    r.task = task;
    r.granularity = granularity;
    r.confusion_percent = row_normalize(cm);
    r.per_class = per_class_accuracy(cm);
    r.macro_top1 = macro_accuracy(cm);
    r.micro_top1 = micro_accuracy(cm);
    r.n_test = cm.total();
    for (std::size_t i = 0; i < cm.size(); ++i) {
        if (!r.per_class[i]) r.excluded_classes.push_back(cm.class_names[i]);
    }
    r.confusion = std::move(cm);
    return r;
}

std::vector<int> coarsen_indices(std::span<const int> leaves, Granularity level) {
    std::vector<int> out(leaves.size());
    for (std::size_t k = 0; k < leaves.size(); ++k) {
        if (leaves[k] < 0 || static_cast<std::size_t>(leaves[k]) >= kPerspectiveCount) {
            throw ValidationError("leaf index out of range at position " + std::to_string(k));
        }
        out[k] = coarsen_index(static_cast<Perspective>(leaves[k]), level);
    }
    return out;
}

std::array<EvalReport, 3> hierarchical_report(std::span<const int> y_true_c7,
                                              std::span<const int> y_pred_c7) {
    std::array<EvalReport, 3> out;
    const std::array<Granularity, 3> levels{Granularity::C7, Granularity::C4, Granularity::C2};
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const auto truth = coarsen_indices(y_true_c7, levels[i]);
        const auto pred = coarsen_indices(y_pred_c7, levels[i]);
        out[i] = make_report(Task::perspective, levels[i],
                             confusion_matrix(truth, pred, granularity_level(levels[i]).class_names));
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    binio::write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

} // namespace

std::string report_json(const EvalReport& report) {
    using nlohmann::ordered_json;
    const std::size_t c = report.confusion.size();
    ordered_json j;
    j["task"] = to_string(report.task);
    j["granularity"] = report.granularity ? ordered_json(to_string(*report.granularity)) : ordered_json();
    j["class_names"] = report.confusion.class_names;
    j["n_test"] = report.n_test;
    auto counts = ordered_json::array();
    auto percent = ordered_json::array();
    for (std::size_t i = 0; i < c; ++i) {
        auto crow = ordered_json::array();
        auto prow = ordered_json::array();
        for (std::size_t k = 0; k < c; ++k) {
            crow.push_back(report.confusion.at(i, k));
            prow.push_back(report.confusion_percent(i, k));
        }
        counts.push_back(std::move(crow));
        percent.push_back(std::move(prow));
    }
    j["confusion_counts"] = std::move(counts);
    j["confusion_percent"] = std::move(percent);
    auto per_class = ordered_json::object();
    for (std::size_t i = 0; i < c; ++i) {
        const auto& acc = report.per_class[i];
        per_class[report.confusion.class_names[i]] = acc ? ordered_json(*acc) : ordered_json();
    }
    j["per_class_accuracy"] = std::move(per_class);
    j["macro_top1"] = report.macro_top1;
    j["micro_top1"] = report.micro_top1;
    j["excluded_classes"] = report.excluded_classes;
    return j.dump(2) + "\n";
}

std::string confusion_csv(const EvalReport& report) {
    const auto& names = report.confusion.class_names;
    std::vector<std::string> header{"true\\predicted"};
    header.insert(header.end(), names.begin(), names.end());
    std::string out = csv::join(header) + "\n";
    for (std::size_t i = 0; i < names.size(); ++i) {
        std::vector<std::string> row{names[i]};
        for (std::size_t k = 0; k < names.size(); ++k) {
            row.push_back(format_number(report.confusion_percent(i, k)));
        }
        out += csv::join(row) + "\n";
    }
    return out;
}

std::string metrics_csv(const EvalReport& report) {
    std::string out = "metric,value\n";
    out += "task," + std::string(to_string(report.task)) + "\n";
    out += "granularity," +
           (report.granularity ? std::string(to_string(*report.granularity)) : std::string()) + "\n";
    out += "n_test," + std::to_string(report.n_test) + "\n";
    out += "macro_top1," + format_number(report.macro_top1) + "\n";
    out += "micro_top1," + format_number(report.micro_top1) + "\n";
    for (std::size_t i = 0; i < report.per_class.size(); ++i) {
        const auto& acc = report.per_class[i];
        out += csv::escape("accuracy:" + report.confusion.class_names[i]) + "," +
               (acc ? format_number(*acc) : std::string()) + "\n";
    }
    return out;
}

void emit_report(const EvalReport& report, const std::string& path, ReportFormat format) {
    if (format == ReportFormat::json) {
        write_text(path, report_json(report));
        return;
    }
    const std::filesystem::path p(path);
    const auto metrics = p.parent_path() / (p.stem().string() + "_metrics.csv");
    write_text(path, confusion_csv(report));
    write_text(metrics.string(), metrics_csv(report));
}

std::string render_confusion_table(const EvalReport& report) {
    const auto& names = report.confusion.class_names;
    std::size_t width = 8;
    for (const auto& n : names) width = std::max(width, n.size() + 1);
    std::string out;
    char cell[64];
    std::snprintf(cell, sizeof cell, "%-*s", static_cast<int>(width), "true\\pred");
    out += cell;
    for (const auto& n : names) {
        std::snprintf(cell, sizeof cell, "%*s", static_cast<int>(width), n.c_str());
        out += cell;
    }
    out += "\n";
    for (std::size_t i = 0; i < names.size(); ++i) {
        std::snprintf(cell, sizeof cell, "%-*s", static_cast<int>(width), names[i].c_str());
        out += cell;
        for (std::size_t k = 0; k < names.size(); ++k) {
            std::snprintf(cell, sizeof cell, "%*.2f", static_cast<int>(width),
                          report.confusion_percent(i, k));
            out += cell;
        }
        out += "\n";
    }
    return out;
}

} // namespace patcls
