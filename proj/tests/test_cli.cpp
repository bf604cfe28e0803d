#include "patcls/cli.hpp"
#include "patcls/dataset.hpp"
#include "patcls/taxonomy.hpp"
#include "patcls/training.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cstdlib>
#include <sstream>

using namespace patcls;
using testutil::TempDir;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run patcls_run(std::vector<std::string> args) {
    args.insert(args.begin(), "patcls");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

/// Manifest + embeddings over the 7 perspective classes (or the first
/// `classes` image-type classes), clustered so a short run learns them.
void write_dataset(const TempDir& tmp, Task task, std::size_t per_split = 6) {
    const auto class_names = task_class_names(task);
    const std::size_t c = task == Task::perspective ? 7 : 4;
    DatasetManifest m{task, class_names, {}};
    EmbeddingStore store(6);
    std::size_t id = 0;
    for (Split split : {Split::train, Split::val, Split::test}) {
        const auto d = testutil::make_clusters(per_split, c, 6, 0.2, 77, 10 + static_cast<int>(split));
        for (std::size_t i = 0; i < d.size(); ++i, ++id) {
            const auto name = "p" + std::to_string(id);
            m.records.push_back({name, split, class_names[static_cast<std::size_t>(d.y[i])], "", ""});
            std::vector<float> v(d.x.row(i).begin(), d.x.row(i).end());
            store.add(name, v);
        }
    }
    save_manifest(m, tmp.file("manifest.csv"));
    write_embeddings(store, tmp.file("emb.pemb"));
}

Run train_in(const TempDir& tmp, const std::string& task, const std::string& out = "model.pmlp",
             const std::string& epochs = "15") {
    return patcls_run({"train", "--manifest", tmp.file("manifest.csv"), "--embeddings", tmp.file("emb.pemb"),
                       "--task", task, "--out", tmp.file(out), "--epochs", epochs, "--seed", "3"});
}

} // namespace

TEST(Cli, NoSubcommandIsAnError) {
    EXPECT_EQ(patcls_run({}).code, cli::kExitValidation);
    EXPECT_EQ(patcls_run({"frobnicate"}).code, cli::kExitValidation);
}

TEST(Cli, TrainHelpShowsProtocolDefaults) {
    const auto r = patcls_run({"train", "--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("200"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("32"), std::string::npos);
    EXPECT_NE(r.out.find("0.001"), std::string::npos);
}

TEST(Cli, BuildManifestLabelsAndRejects) {
    TempDir tmp;
    testutil::write_text(tmp.file("caps.tsv"), "id\tsplit\tcaption\n"
                                               "a\ttrain\tFIG. 1 is a front view of the chair\n"
                                               "b\tval\tFIG. 2 is a perspective view thereof\n"
                                               "c\ttest\tFIG. 3 is a cross-section\n");
    const auto r = patcls_run({"build-manifest", "--captions", tmp.file("caps.tsv"), "--out", tmp.file("m.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("labeled=2 rejected=1"), std::string::npos) << r.out;
    const auto m = load_manifest(tmp.file("m.csv"), Task::perspective);
    ASSERT_EQ(m.records.size(), 2u);
    EXPECT_EQ(m.records[0].label, "front");
    EXPECT_EQ(m.records[1].label, "perspective_view");
    EXPECT_EQ(m.records[1].split, Split::val);
    EXPECT_EQ(testutil::read_text(tmp.file("m.csv.rejects.tsv")), "c\ttest\tFIG. 3 is a cross-section\n");
}

TEST(Cli, BuildManifestWarnsOnEmptyInput) {
    TempDir tmp;
    testutil::write_text(tmp.file("caps.tsv"), "");
    const auto r = patcls_run({"build-manifest", "--captions", tmp.file("caps.tsv"), "--out", tmp.file("m.csv")});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.err.find("warning"), std::string::npos);
    EXPECT_TRUE(load_manifest(tmp.file("m.csv"), Task::perspective).records.empty());
}

TEST(Cli, BuildManifestMalformedRow) {
    TempDir tmp;
    testutil::write_text(tmp.file("caps.tsv"), "a\ttrain\tfront view\nb only two\tfields\n");
    const auto r = patcls_run({"build-manifest", "--captions", tmp.file("caps.tsv"), "--out", tmp.file("m.csv")});
    EXPECT_EQ(r.code, cli::kExitValidation);
    EXPECT_NE(r.err.find(":2:"), std::string::npos) << r.err;
    EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, BuildManifestRulesFileExtendsTable) {
    TempDir tmp;
    testutil::write_text(tmp.file("caps.tsv"), "a\ttrain\tFIG. 4 is a three-quarter view\n");
    testutil::write_text(tmp.file("rules.tsv"), "# extra phrasing\n5\tthree-quarter view\tperspective_view\n");
    const auto r = patcls_run({"build-manifest", "--captions", tmp.file("caps.tsv"), "--out", tmp.file("m.csv"),
                               "--rules", tmp.file("rules.tsv")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("labeled=1 rejected=0"), std::string::npos);
}

TEST(Cli, TrainEvalPredictPerspective) {
    TempDir tmp;
    write_dataset(tmp, Task::perspective);
    const auto tr = train_in(tmp, "perspective");
    ASSERT_EQ(tr.code, 0) << tr.err;
    EXPECT_TRUE(std::filesystem::exists(tmp.file("history.csv")));
    const auto history = testutil::read_text(tmp.file("history.csv"));
    EXPECT_EQ(std::count(history.begin(), history.end(), '\n'), 16);

    const auto ev = patcls_run({"eval", "--manifest", tmp.file("manifest.csv"), "--embeddings", tmp.file("emb.pemb"),
                                "--checkpoint", tmp.file("model.pmlp"), "--out", tmp.file("rep"),
                                "--granularity", "all"});
    ASSERT_EQ(ev.code, 0) << ev.err;
    for (const char* level : {"c7", "c4", "c2"}) {
        const auto path = tmp.file(std::string("rep/report_") + level + ".json");
        ASSERT_TRUE(std::filesystem::exists(path)) << path;
        const auto j = nlohmann::json::parse(testutil::read_text(path));
        EXPECT_EQ(j["n_test"], 42);
        EXPECT_TRUE(std::filesystem::exists(tmp.file(std::string("rep/report_") + level + ".csv")));
    }
    const auto c7 = nlohmann::json::parse(testutil::read_text(tmp.file("rep/report_c7.json")));
    const auto c2 = nlohmann::json::parse(testutil::read_text(tmp.file("rep/report_c2.json")));
    EXPECT_GE(c2["micro_top1"].get<double>(), c7["micro_top1"].get<double>());

    const auto pr = patcls_run({"predict", "--embeddings", tmp.file("emb.pemb"), "--checkpoint",
                                tmp.file("model.pmlp"), "--out", tmp.file("pred.csv")});
    ASSERT_EQ(pr.code, 0) << pr.err;
    std::istringstream lines(testutil::read_text(tmp.file("pred.csv")));
    std::string line;
    std::getline(lines, line);
    EXPECT_EQ(line, "id,predicted_label,probability");
    const auto store = read_embeddings(tmp.file("emb.pemb"));
    for (const auto& id : store.ids()) {
        ASSERT_TRUE(std::getline(lines, line));
        const auto first = line.find(',');
        const auto second = line.find(',', first + 1);
        EXPECT_EQ(line.substr(0, first), id);
        EXPECT_TRUE(perspective_from_name(line.substr(first + 1, second - first - 1)).has_value()) << line;
        const double p = std::stod(line.substr(second + 1));
        EXPECT_GE(p, 1.0 / 7.0);
        EXPECT_LE(p, 1.0);
    }
    EXPECT_FALSE(std::getline(lines, line));
}

TEST(Cli, SingleGranularityWritesOneReport) {
    TempDir tmp;
    write_dataset(tmp, Task::perspective);
    ASSERT_EQ(train_in(tmp, "perspective", "model.pmlp", "2").code, 0);
    const auto ev = patcls_run({"eval", "--manifest", tmp.file("manifest.csv"), "--embeddings", tmp.file("emb.pemb"),
                                "--checkpoint", tmp.file("model.pmlp"), "--out", tmp.file("rep"),
                                "--granularity", "c4"});
    ASSERT_EQ(ev.code, 0) << ev.err;
    EXPECT_TRUE(std::filesystem::exists(tmp.file("rep/report_c4.json")));
    EXPECT_FALSE(std::filesystem::exists(tmp.file("rep/report_c7.json")));
}

TEST(Cli, ImageTypeRejectsGranularity) {
    TempDir tmp;
    write_dataset(tmp, Task::image_type);
    ASSERT_EQ(train_in(tmp, "image_type", "model.pmlp", "2").code, 0);
    const auto ev = patcls_run({"eval", "--manifest", tmp.file("manifest.csv"), "--embeddings", tmp.file("emb.pemb"),
                                "--checkpoint", tmp.file("model.pmlp"), "--out", tmp.file("rep"),
                                "--granularity", "c4"});
    EXPECT_EQ(ev.code, cli::kExitValidation);
    EXPECT_NE(ev.err.find("granularity applies to perspective task only"), std::string::npos) << ev.err;

    const auto ok = patcls_run({"eval", "--manifest", tmp.file("manifest.csv"), "--embeddings", tmp.file("emb.pemb"),
                                "--checkpoint", tmp.file("model.pmlp"), "--out", tmp.file("rep")});
    ASSERT_EQ(ok.code, 0) << ok.err;
    const auto j = nlohmann::json::parse(testutil::read_text(tmp.file("rep/report.json")));
    EXPECT_EQ(j["task"], "image_type");
    // Six image-type classes have no test samples in this dataset.
    EXPECT_EQ(j["excluded_classes"].size(), 6u);
}

TEST(Cli, EvalTaskMismatch) {
    TempDir tmp;
    write_dataset(tmp, Task::image_type);
    ASSERT_EQ(train_in(tmp, "image_type", "model.pmlp", "1").code, 0);
    const auto ev = patcls_run({"eval", "--manifest", tmp.file("manifest.csv"), "--embeddings", tmp.file("emb.pemb"),
                                "--checkpoint", tmp.file("model.pmlp"), "--out", tmp.file("rep"), "--task",
                                "perspective"});
    EXPECT_EQ(ev.code, cli::kExitValidation);
    EXPECT_NE(ev.err.find("task mismatch"), std::string::npos);
}

TEST(Cli, TrainWithoutValidationSplitFails) {
    TempDir tmp;
    DatasetManifest m{Task::perspective, task_class_names(Task::perspective), {}};
    EmbeddingStore s(2);
    m.records.push_back({"a", Split::train, "left", "", ""});
    m.records.push_back({"b", Split::test, "top", "", ""});
    s.add("a", std::vector<float>{1, 0});
    s.add("b", std::vector<float>{0, 1});
    save_manifest(m, tmp.file("manifest.csv"));
    write_embeddings(s, tmp.file("emb.pemb"));
    const auto r = train_in(tmp, "perspective");
    EXPECT_EQ(r.code, cli::kExitValidation);
    EXPECT_NE(r.err.find("validation split is empty"), std::string::npos) << r.err;
}

TEST(Cli, MissingEmbeddingsStrictAndLenient) {
    TempDir tmp;
    write_dataset(tmp, Task::perspective, 2);
    auto store = read_embeddings(tmp.file("emb.pemb"));
    EmbeddingStore fewer(store.dim());
    for (std::size_t i = 1; i < store.size(); ++i) fewer.add(store.ids()[i], store.vector(i));
    write_embeddings(fewer, tmp.file("emb.pemb"));
    const auto strict = train_in(tmp, "perspective", "model.pmlp", "1");
    EXPECT_EQ(strict.code, cli::kExitValidation);
    EXPECT_NE(strict.err.find("p0"), std::string::npos) << strict.err;
    const auto lenient = patcls_run({"train", "--manifest", tmp.file("manifest.csv"), "--embeddings",
                                     tmp.file("emb.pemb"), "--task", "perspective", "--out",
                                     tmp.file("model.pmlp"), "--epochs", "1", "--lenient"});
    EXPECT_EQ(lenient.code, 0) << lenient.err;
    EXPECT_NE(lenient.err.find("warning"), std::string::npos);
}

TEST(Cli, TrainingIsByteDeterministic) {
    TempDir tmp;
    write_dataset(tmp, Task::perspective);
    ASSERT_EQ(patcls_run({"train", "--manifest", tmp.file("manifest.csv"), "--embeddings", tmp.file("emb.pemb"),
                          "--task", "perspective", "--out", tmp.file("a.pmlp"), "--history", tmp.file("a.csv"),
                          "--epochs", "10", "--seed", "9"})
                  .code,
              0);
    ASSERT_EQ(patcls_run({"train", "--manifest", tmp.file("manifest.csv"), "--embeddings", tmp.file("emb.pemb"),
                          "--task", "perspective", "--out", tmp.file("b.pmlp"), "--history", tmp.file("b.csv"),
                          "--epochs", "10", "--seed", "9"})
                  .code,
              0);
    EXPECT_EQ(testutil::read_text(tmp.file("a.pmlp")), testutil::read_text(tmp.file("b.pmlp")));
    EXPECT_EQ(testutil::read_text(tmp.file("a.csv")), testutil::read_text(tmp.file("b.csv")));
}

TEST(Cli, InspectEmbeddings) {
    const auto r = patcls_run({"inspect", "--embeddings", testutil::fixture("golden.pemb")});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "dim=4 count=3\n");
}

TEST(Cli, TruncatedEmbeddingsIsAnIoError) {
    TempDir tmp;
    auto text = testutil::read_text(testutil::fixture("golden.pemb"));
    text.resize(text.size() - 3);
    testutil::write_text(tmp.file("t.pemb"), text);
    const auto r = patcls_run({"inspect", "--embeddings", tmp.file("t.pemb")});
    EXPECT_EQ(r.code, cli::kExitIo);
    EXPECT_NE(r.err.find("patcls: error:"), std::string::npos);
}

TEST(Cli, InspectManifestShowsTree) {
    TempDir tmp;
    std::string csv = "id,split,label,caption,path\n";
    for (int i = 0; i < 6140; ++i) csv += "pv" + std::to_string(i) + ",train,perspective_view,,\n";
    for (int i = 0; i < 5; ++i) csv += "l" + std::to_string(i) + ",val,left,,\n";
    for (int i = 0; i < 3; ++i) csv += "r" + std::to_string(i) + ",val,right,,\n";
    testutil::write_text(tmp.file("m.csv"), csv);
    const auto r = patcls_run({"inspect", "--manifest", tmp.file("m.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("task=perspective records=6148"), std::string::npos) << r.out;
    std::istringstream lines(r.out);
    std::string line;
    bool found_pv = false, found_lr = false;
    while (std::getline(lines, line)) {
        std::istringstream f(line);
        std::string name;
        std::size_t train = 0, val = 0, test = 0;
        f >> name >> train >> val >> test;
        if (name == "perspective_view") {
            found_pv = true;
            EXPECT_EQ(train, 6140u);
        }
        if (name == "left_right") {
            found_lr = true;
            EXPECT_EQ(val, 8u);
        }
    }
    EXPECT_TRUE(found_pv);
    EXPECT_TRUE(found_lr);
}

TEST(Cli, BinaryExitCodes) {
    TempDir tmp;
    const std::string exe = PATCLS_CLI_PATH;
    const auto quiet = " >" + tmp.file("o") + " 2>" + tmp.file("e");
    EXPECT_EQ(WEXITSTATUS(std::system((exe + " inspect --embeddings " + testutil::fixture("golden.pemb") + quiet).c_str())), 0);
    EXPECT_EQ(WEXITSTATUS(std::system((exe + " inspect --embeddings " + tmp.file("absent.pemb") + quiet).c_str())), 2);
    EXPECT_EQ(WEXITSTATUS(std::system((exe + " train" + quiet).c_str())), 1);
}
