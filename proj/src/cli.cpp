#include "patcls/cli.hpp"

#include "patcls/binary_io.hpp"
#include "patcls/csv.hpp"
#include "patcls/dataset.hpp"
#include "patcls/error.hpp"
#include "patcls/evaluation.hpp"
#include "patcls/taxonomy.hpp"
#include "patcls/training.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <functional>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace patcls::cli {

namespace fs = std::filesystem;

namespace {

void write_text(const std::string& path, const std::string& text) {
    binio::write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::string one_line(std::string s) {
    for (char& c : s) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    return s;
}

Task parse_task(const std::string& name) {
    const auto t = task_from_name(name);
    if (!t) throw ValidationError("unknown task '" + name + "' (expected image_type or perspective)");
    return *t;
}

void warn_missing(std::ostream& err, Split split, const std::vector<std::string>& missing) {
    if (missing.empty()) return;
    err << "patcls: warning: skipped " << missing.size() << " " << to_string(split)
        << " record(s) without embeddings\n";
}

/// Per-split class counts. Perspective manifests are shown as the class tree
/// with parent rows summing their leaves.
void print_histogram_table(const DatasetManifest& m, std::ostream& out) {
    const std::array<Split, 3> splits{Split::train, Split::val, Split::test};
    std::array<ClassHistogram, 3> hist{class_histogram(m, Split::train),
                                       class_histogram(m, Split::val),
                                       class_histogram(m, Split::test)};
    out << std::left << std::setw(22) << "class";
    for (auto s : splits) out << std::right << std::setw(9) << to_string(s);
    out << "\n";

    auto row = [&](const std::string& label, const std::array<std::size_t, 3>& c) {
        out << std::left << std::setw(22) << label;
        for (auto v : c) out << std::right << std::setw(9) << v;
        out << "\n";
    };

    if (m.task == Task::perspective) {
        const auto& tax = perspective_taxonomy();
        std::function<std::array<std::size_t, 3>(int)> sum = [&](int id) {
            const auto& node = tax.nodes()[static_cast<std::size_t>(id)];
            std::array<std::size_t, 3> c{};
            if (node.children.empty()) {
                for (std::size_t s = 0; s < 3; ++s) c[s] = hist[s].at(node.name);
            }
            for (int child : node.children) {
                const auto sub = sum(child);
                for (std::size_t s = 0; s < 3; ++s) c[s] += sub[s];
            }
            return c;
        };
        std::function<void(int, int)> walk = [&](int id, int depth) {
            const auto& node = tax.nodes()[static_cast<std::size_t>(id)];
            if (depth > 0) row(std::string(2 * static_cast<std::size_t>(depth - 1), ' ') + node.name, sum(id));
            for (int child : node.children) walk(child, depth + 1);
        };
        walk(0, 0);
    } else {
        for (std::size_t c = 0; c < m.class_names.size(); ++c) {
            row(m.class_names[c], {hist[0].counts[c], hist[1].counts[c], hist[2].counts[c]});
        }
    }
    row("total", {hist[0].total(), hist[1].total(), hist[2].total()});
}

// ---------------------------------------------------------------------------

struct BuildManifestArgs {
    std::string captions;
    std::string out;
    std::string task = "perspective";
    std::string rules;
    std::string rejects;
};

int build_manifest(const BuildManifestArgs& a, std::ostream& out, std::ostream& err) {
    if (parse_task(a.task) != Task::perspective) {
        throw ValidationError("caption labeling is only defined for the perspective task");
    }
    auto rules = default_caption_rules();
    std::string rules_path = a.rules;
    if (rules_path.empty()) {
        if (const char* env = std::getenv("PATCLS_RULES"); env && *env) rules_path = env;
    }
    if (!rules_path.empty()) rules = merge_caption_rules(std::move(rules), load_caption_rules(rules_path));
    const CaptionParser parser(std::move(rules));

    std::ifstream in(a.captions, std::ios::binary);
    if (!in) throw IoError(a.captions + ": cannot open captions file");

    DatasetManifest manifest;
    manifest.task = Task::perspective;
    manifest.class_names = task_class_names(Task::perspective);
    std::string rejects;
    std::set<std::string> ids;
    std::size_t rows = 0;

    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (lineno == 1 && line == "id\tsplit\tcaption") continue;
        const auto where = a.captions + ":" + std::to_string(lineno) + ": ";
        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
        if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) {
            throw ValidationError(where + "expected id<TAB>split<TAB>caption");
        }
        ManifestRecord rec;
        rec.id = line.substr(0, t1);
        const std::string split = line.substr(t1 + 1, t2 - t1 - 1);
        rec.caption = line.substr(t2 + 1);
        if (rec.id.empty()) throw ValidationError(where + "empty id");
        const auto s = split_from_name(split);
        if (!s) throw ValidationError(where + "unknown split '" + split + "'");
        rec.split = *s;
        if (!ids.insert(rec.id).second) throw ValidationError(where + "duplicate id '" + rec.id + "'");
        ++rows;

        if (const auto label = parser.parse(rec.caption)) {
            rec.label = std::string(to_string(*label));
            manifest.records.push_back(std::move(rec));
        } else {
            rejects += line + "\n";
        }
    }
    if (in.bad()) throw IoError(a.captions + ": read failed");
    if (rows == 0) err << "patcls: warning: " << a.captions << " contains no captions\n";

    save_manifest(manifest, a.out);
    const std::string rejects_path = a.rejects.empty() ? a.out + ".rejects.tsv" : a.rejects;
    write_text(rejects_path, rejects);

    out << "labeled=" << manifest.records.size() << " rejected=" << rows - manifest.records.size()
        << "\n";
    print_histogram_table(manifest, out);
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string manifest;
    std::string embeddings;
    std::string task;
    std::string out;
    std::string history;
    TrainConfig config;
    bool lenient = false;
};

int train_cmd(const TrainArgs& a, std::ostream& out, std::ostream& err) {
    TrainConfig config = a.config;
    config.strict_join = !a.lenient;
    config.validate();
    const Task task = parse_task(a.task);
    const auto manifest = load_manifest(a.manifest, task);
    const auto store = read_embeddings(a.embeddings);
    const auto mode = config.strict_join ? JoinMode::strict : JoinMode::lenient;

    auto train_join = join(manifest, store, Split::train, mode);
    auto val_join = join(manifest, store, Split::val, mode);
    warn_missing(err, Split::train, train_join.missing_ids);
    warn_missing(err, Split::val, val_join.missing_ids);
    if (train_join.data.size() == 0) throw ValidationError("training split is empty");
    if (val_join.data.size() == 0) throw ValidationError("validation split is empty");
    if (config.normalize_features) {
        l2_normalize_rows(train_join.data.x);
        l2_normalize_rows(val_join.data.x);
    }

    const auto result = train(train_join.data, val_join.data, config);
    const CheckpointMeta meta{task, config.seed, static_cast<std::uint32_t>(result.history.best_epoch)};
    save_checkpoint(result.model, meta, a.out);

    const std::string history_path =
        a.history.empty() ? (fs::path(a.out).parent_path() / "history.csv").string() : a.history;
    write_text(history_path, history_csv(result.history));

    const auto& best = result.history.epochs[static_cast<std::size_t>(result.history.best_epoch)];
    out << "trained " << config.epochs << " epochs on " << train_join.data.size()
        << " samples; best_epoch=" << result.history.best_epoch << " val_loss=" << best.val_loss
        << " val_acc=" << best.val_accuracy << "\n";
    out << "checkpoint: " << a.out << "\nhistory: " << history_path << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string manifest;
    std::string embeddings;
    std::string checkpoint;
    std::string split = "test";
    std::string out;
    std::string granularity;
    std::string task;
    bool normalize = false;
    bool lenient = false;
};

void write_report_files(const EvalReport& report, const fs::path& dir, const std::string& stem,
                        std::ostream& out) {
    emit_report(report, (dir / (stem + ".json")).string(), ReportFormat::json);
    emit_report(report, (dir / (stem + ".csv")).string(), ReportFormat::csv);
    out << "[" << to_string(report.task);
    if (report.granularity) out << " " << to_string(*report.granularity);
    out << "] n_test=" << report.n_test << " macro_top1=" << std::fixed << std::setprecision(4)
        << report.macro_top1 << " micro_top1=" << report.micro_top1 << std::defaultfloat << "\n";
    if (!report.excluded_classes.empty()) {
        out << "classes without test samples (excluded from macro):";
        for (const auto& c : report.excluded_classes) out << " " << c;
        out << "\n";
    }
    out << render_confusion_table(report);
}

int eval_cmd(const EvalArgs& a, std::ostream& out, std::ostream& err) {
    const auto ck = load_checkpoint(a.checkpoint);
    const Task task = ck.meta.task;
    if (!a.task.empty() && parse_task(a.task) != task) {
        throw ValidationError("task mismatch: checkpoint is " + std::string(to_string(task)) +
                              ", --task is " + a.task);
    }
    if (!a.granularity.empty() && task != Task::perspective) {
        throw ValidationError("granularity applies to perspective task only");
    }
    std::vector<Granularity> levels;
    if (task == Task::perspective) {
        const std::string g = a.granularity.empty() ? "all" : a.granularity;
        if (g == "all") {
            levels = {Granularity::C7, Granularity::C4, Granularity::C2};
        } else if (const auto lvl = granularity_from_name(g)) {
            levels = {*lvl};
        } else {
            throw ValidationError("unknown granularity '" + g + "' (expected c7, c4, c2 or all)");
        }
    }
    const auto split = split_from_name(a.split);
    if (!split) throw ValidationError("unknown split '" + a.split + "'");

    if (ck.model.class_names != task_class_names(task)) {
        throw ValidationError("task mismatch: checkpoint classes do not match the " +
                              std::string(to_string(task)) + " label set");
    }
    const auto manifest = load_manifest(a.manifest, task);
    const auto store = read_embeddings(a.embeddings);
    if (store.dim() != ck.model.input_dim()) {
        throw ValidationError("embedding dim " + std::to_string(store.dim()) +
                              " does not match checkpoint input dim " +
                              std::to_string(ck.model.input_dim()));
    }
    auto joined = join(manifest, store, *split, a.lenient ? JoinMode::lenient : JoinMode::strict);
    warn_missing(err, *split, joined.missing_ids);
    if (joined.data.size() == 0) throw ValidationError(a.split + " split has no samples to evaluate");
    if (a.normalize) l2_normalize_rows(joined.data.x);

    const auto pred = predict(ck.model, joined.data.x);
    const fs::path dir(a.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(a.out + ": cannot create output directory");

    if (task == Task::image_type) {
        const auto report =
            make_report(task, std::nullopt, confusion_matrix(joined.data.y, pred, joined.data.class_names));
        write_report_files(report, dir, "report", out);
        return kExitOk;
    }
    const auto reports = hierarchical_report(joined.data.y, pred);
    for (const auto& report : reports) {
        if (std::find(levels.begin(), levels.end(), *report.granularity) == levels.end()) continue;
        std::string stem = "report_" + std::string(to_string(*report.granularity));
        std::transform(stem.begin(), stem.end(), stem.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        write_report_files(report, dir, stem, out);
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
    std::string embeddings;
    std::string checkpoint;
    std::string out;
    bool normalize = false;
};

int predict_cmd(const PredictArgs& a, std::ostream& out) {
    const auto ck = load_checkpoint(a.checkpoint);
    const auto store = read_embeddings(a.embeddings);
    if (store.dim() != ck.model.input_dim()) {
        throw ValidationError("embedding dim " + std::to_string(store.dim()) +
                              " does not match checkpoint input dim " +
                              std::to_string(ck.model.input_dim()));
    }
    std::string text = "id,predicted_label,probability\n";
    constexpr std::size_t kChunk = 4096;
    char prob[32];
    for (std::size_t start = 0; start < store.size(); start += kChunk) {
        const std::size_t n = std::min(kChunk, store.size() - start);
        Matrix x(n, store.dim());
        for (std::size_t i = 0; i < n; ++i) {
            const auto v = store.vector(start + i);
            std::copy(v.begin(), v.end(), x.row(i).begin());
        }
        if (a.normalize) l2_normalize_rows(x);
        const Matrix probs = softmax_rows(infer_logits(ck.model, x));
        const auto pred = argmax_rows(probs);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(pred[i]);
            std::snprintf(prob, sizeof prob, "%.9g", probs(i, c));
            text += csv::join({store.ids()[start + i], ck.model.class_names[c], prob}) + "\n";
        }
    }
    write_text(a.out, text);
    out << "predicted " << store.size() << " ids -> " << a.out << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct InspectArgs {
    std::string embeddings;
    std::string manifest;
    std::string task;
};

int inspect_cmd(const InspectArgs& a, std::ostream& out) {
    if (a.embeddings.empty() == a.manifest.empty()) {
        throw ValidationError("inspect needs exactly one of --embeddings or --manifest");
    }
    if (!a.embeddings.empty()) {
        const auto store = read_embeddings(a.embeddings);
        out << "dim=" << store.dim() << " count=" << store.size() << "\n";
        return kExitOk;
    }
    DatasetManifest m;
    if (!a.task.empty()) {
        m = load_manifest(a.manifest, parse_task(a.task));
    } else {
        try {
            m = load_manifest(a.manifest, Task::perspective);
        } catch (const ValidationError&) {
            m = load_manifest(a.manifest, Task::image_type);
        }
    }
    out << "task=" << to_string(m.task) << " records=" << m.records.size() << "\n";
    print_histogram_table(m, out);
    return kExitOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Patent image classification: MLP heads on frozen image embeddings", "patcls"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    BuildManifestArgs bm;
    auto* bm_cmd = app.add_subcommand("build-manifest", "Weakly label perspective captions into a manifest");
    bm_cmd->add_option("--captions", bm.captions, "TSV file: id<TAB>split<TAB>caption")->required();
    bm_cmd->add_option("--out", bm.out, "Output manifest CSV")->required();
    bm_cmd->add_option("--task", bm.task, "Task (only perspective)")->capture_default_str();
    bm_cmd->add_option("--rules", bm.rules, "Extra caption rules file (default: $PATCLS_RULES)");
    bm_cmd->add_option("--rejects", bm.rejects, "Unmatched captions TSV (default: <out>.rejects.tsv)");

    TrainArgs tr;
    auto* tr_cmd = app.add_subcommand("train", "Train an MLP head on embeddings");
    tr_cmd->add_option("--manifest", tr.manifest, "Manifest CSV")->required();
    tr_cmd->add_option("--embeddings", tr.embeddings, "PEMB embedding file")->required();
    tr_cmd->add_option("--task", tr.task, "image_type or perspective")->required();
    tr_cmd->add_option("--out", tr.out, "Output PMLP checkpoint")->required();
    tr_cmd->add_option("--epochs", tr.config.epochs, "Training epochs")->capture_default_str();
    tr_cmd->add_option("--batch", tr.config.batch_size, "Mini-batch size")->capture_default_str();
    tr_cmd->add_option("--lr", tr.config.lr, "Adam learning rate")->capture_default_str();
    tr_cmd->add_option("--seed", tr.config.seed, "Seed for init and shuffling")->capture_default_str();
    tr_cmd->add_flag("--normalize", tr.config.normalize_features, "L2-normalize features");
    tr_cmd->add_flag("--lenient", tr.lenient, "Skip records without embeddings instead of failing");
    tr_cmd->add_option("--history", tr.history, "History CSV (default: history.csv next to --out)");

    EvalArgs ev;
    auto* ev_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest split");
    ev_cmd->add_option("--manifest", ev.manifest, "Manifest CSV")->required();
    ev_cmd->add_option("--embeddings", ev.embeddings, "PEMB embedding file")->required();
    ev_cmd->add_option("--checkpoint", ev.checkpoint, "PMLP checkpoint")->required();
    ev_cmd->add_option("--split", ev.split, "Split to evaluate")->capture_default_str();
    ev_cmd->add_option("--out", ev.out, "Report directory")->required();
    ev_cmd->add_option("--granularity", ev.granularity,
                       "c7, c4, c2 or all (perspective only; default all)");
    ev_cmd->add_option("--task", ev.task, "Expected task; must match the checkpoint");
    ev_cmd->add_flag("--normalize", ev.normalize, "L2-normalize features (match training)");
    ev_cmd->add_flag("--lenient", ev.lenient, "Skip records without embeddings");

    PredictArgs pr;
    auto* pr_cmd = app.add_subcommand("predict", "Predict a class for every embedding");
    pr_cmd->add_option("--embeddings", pr.embeddings, "PEMB embedding file")->required();
    pr_cmd->add_option("--checkpoint", pr.checkpoint, "PMLP checkpoint")->required();
    pr_cmd->add_option("--out", pr.out, "Output CSV")->required();
    pr_cmd->add_flag("--normalize", pr.normalize, "L2-normalize features (match training)");

    InspectArgs in;
    auto* in_cmd = app.add_subcommand("inspect", "Print statistics of an embedding file or manifest");
    in_cmd->add_option("--embeddings", in.embeddings, "PEMB embedding file");
    in_cmd->add_option("--manifest", in.manifest, "Manifest CSV");
    in_cmd->add_option("--task", in.task, "Manifest task (inferred when omitted)");

    // CLI11 consumes arguments from the back.
    std::vector<std::string> reversed(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(reversed.begin(), reversed.end());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err);  // --help
        err << "patcls: error: " << one_line(e.what()) << "\n";
        return kExitValidation;
    }

    try {
        if (*bm_cmd) return build_manifest(bm, out, err);
        if (*tr_cmd) return train_cmd(tr, out, err);
        if (*ev_cmd) return eval_cmd(ev, out, err);
        if (*pr_cmd) return predict_cmd(pr, out);
        if (*in_cmd) return inspect_cmd(in, out);
    } catch (const IoError& e) {
        err << "patcls: error: " << one_line(e.what()) << "\n";
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        err << "patcls: error: " << one_line(e.what()) << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        err << "patcls: error: " << one_line(e.what()) << "\n";
        return kExitValidation;
    }
    return kExitValidation;
}

} // namespace patcls::cli
