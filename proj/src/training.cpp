#include "patcls/training.hpp"

#include "patcls/binary_io.hpp"
#include "patcls/error.hpp"
#include "patcls/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace patcls {

void TrainConfig::validate() const {
    if (epochs < 1) throw ValidationError("epochs must be >= 1");
    if (batch_size < 1) throw ValidationError("batch size must be >= 1");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ValidationError("learning rate must be > 0");
}

TrainingDiverged::TrainingDiverged(int epoch_, std::size_t batch_)
    : ValidationError("training diverged (non-finite loss or gradient) at epoch " + std::to_string(epoch_) + ", batch " +
                      std::to_string(batch_)),
      epoch(epoch_),
      batch(batch_) {}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed + static_cast<std::uint64_t>(epoch));
    rng.shuffle(std::span<std::size_t>(order));
    return order;
}

namespace {

bool all_finite(const Gradients& g) {
    const auto finite = [](double v) { return std::isfinite(v); };
    for (std::size_t l = 0; l < g.weight.size(); ++l) {
        if (!std::all_of(g.weight[l].data.begin(), g.weight[l].data.end(), finite) ||
            !std::all_of(g.bias[l].begin(), g.bias[l].end(), finite)) {
            return false;
        }
    }
    return true;
}

void check_compatible(const LabeledDataset& train_set, const LabeledDataset& val_set) {
    if (train_set.size() == 0) throw ValidationError("training split is empty");
    if (val_set.size() == 0) throw ValidationError("validation split is empty");
    if (train_set.dim() != val_set.dim()) {
        throw ValidationError("train/val feature dims differ: " + std::to_string(train_set.dim()) +
                              " vs " + std::to_string(val_set.dim()));
    }
    if (train_set.class_names != val_set.class_names) {
        throw ValidationError("train/val class names differ");
    }
    if (train_set.class_names.size() < 2) throw ValidationError("need at least 2 classes");
}

} // namespace

TrainResult train(const LabeledDataset& train_set, const LabeledDataset& val_set,
                  const TrainConfig& config, const TrainHooks& hooks) {
    config.validate();
    check_compatible(train_set, val_set);

    const std::size_t n = train_set.size();
    const std::size_t dim = train_set.dim();
    MlpModel model = init_mlp(dim, train_set.class_names.size(), config.seed);
    model.class_names = train_set.class_names;
    AdamState adam = AdamState::for_model(model, AdamHyperparameters{.lr = config.lr});

    TrainResult result;
    result.model = model;
    double best_loss = 0.0;

    Matrix batch_x;
    std::vector<int> batch_y;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto order = epoch_order(n, config.seed, epoch);
        if (hooks.on_epoch_order) hooks.on_epoch_order(epoch, order);

        double loss_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < n; start += config.batch_size, ++batch_index) {
            const std::size_t bn = std::min(config.batch_size, n - start);
            batch_x = Matrix(bn, dim);
            batch_y.resize(bn);
            for (std::size_t r = 0; r < bn; ++r) {
                const std::size_t src = order[start + r];
                const auto row = train_set.x.row(src);
                std::copy(row.begin(), row.end(), batch_x.row(r).begin());
                batch_y[r] = train_set.y[src];
            }

            const auto fwd = forward(model, batch_x);
            const double loss = cross_entropy(softmax_rows(fwd.logits), batch_y);
            if (!std::isfinite(loss)) throw TrainingDiverged(epoch, batch_index);
            const auto grads = backward(model, fwd.cache, batch_y);
            // A finite loss can still come with overflowed gradients.
            if (!all_finite(grads)) throw TrainingDiverged(epoch, batch_index);
            adam_step(model, grads, adam);
            loss_sum += loss * static_cast<double>(bn);
        }

        const Matrix val_logits = infer_logits(model, val_set.x);
        EpochStats stats{};
        stats.train_loss = loss_sum / static_cast<double>(n);
        stats.val_loss = cross_entropy(softmax_rows(val_logits), val_set.y);
        if (!std::isfinite(stats.val_loss)) throw TrainingDiverged(epoch, batch_index);
        const auto pred = argmax_rows(val_logits);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == val_set.y[i];
        stats.val_accuracy = static_cast<double>(correct) / static_cast<double>(pred.size());

        result.history.epochs.push_back(stats);
        if (result.history.best_epoch < 0 || stats.val_loss < best_loss) {
            best_loss = stats.val_loss;
            result.history.best_epoch = epoch;
            result.model = model;
        }
        if (hooks.on_epoch_end) hooks.on_epoch_end(epoch, model, stats);
    }
    return result;
}

double evaluate_loss(const MlpModel& model, const LabeledDataset& data) {
    if (data.size() == 0) throw ValidationError("evaluate_loss: empty dataset");
    return cross_entropy(softmax_rows(infer_logits(model, data.x)), data.y);
}

double evaluate_accuracy(const MlpModel& model, const LabeledDataset& data) {
    if (data.size() == 0) throw ValidationError("evaluate_accuracy: empty dataset");
    const auto pred = predict(model, data.x);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == data.y[i];
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> encode_checkpoint(const MlpModel& model, const CheckpointMeta& meta) {
    validate_model(model);
    binio::Writer w;
    w.bytes({kPmlpMagic, 4});
    w.u32(kPmlpVersion);
    w.u8(static_cast<std::uint8_t>(meta.task));
    w.u32(static_cast<std::uint32_t>(model.class_names.size()));
    for (const auto& name : model.class_names) w.short_string(name, "class name");
    const auto dims = model.layer_dims();
    w.u32(static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims) w.u32(static_cast<std::uint32_t>(d));
    w.u64(meta.seed);
    w.u32(meta.best_epoch);
    for (const auto& layer : model.layers) {
        for (double v : layer.weight.data) w.f32(static_cast<float>(v));
        for (double v : layer.bias) w.f32(static_cast<float>(v));
    }
    return w.buffer();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& context) {
    binio::Reader r(bytes, context);
    if (r.bytes(4) != std::string_view(kPmlpMagic, 4)) r.fail("bad magic");
    const auto version = r.u32();
    if (version != kPmlpVersion) r.fail("unsupported version " + std::to_string(version));

    Checkpoint ck;
    const auto tag = r.u8();
    if (tag > 1) r.fail("unknown task tag " + std::to_string(tag));
    ck.meta.task = static_cast<Task>(tag);

    const auto classes = r.u32();
    if (classes < 2) r.fail("class count must be at least 2");
    for (std::uint32_t c = 0; c < classes; ++c) ck.model.class_names.push_back(r.short_string());

    const auto layer_count = r.u32();
    if (layer_count != kAffineLayers + 1) {
        r.fail("expected " + std::to_string(kAffineLayers + 1) + " layer dims, found " +
               std::to_string(layer_count));
    }
    std::vector<std::size_t> dims;
    for (std::uint32_t i = 0; i < layer_count; ++i) {
        dims.push_back(r.u32());
        if (dims.back() == 0) r.fail("layer dim " + std::to_string(i) + " is zero");
    }
    if (dims.back() != classes) r.fail("output layer width does not match the class count");

    ck.meta.seed = r.u64();
    ck.meta.best_epoch = r.u32();

    std::uint64_t expected = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        expected += 4ULL * (static_cast<std::uint64_t>(dims[l]) * dims[l + 1] + dims[l + 1]);
    }
    if (r.remaining() != expected) {
        r.fail("parameter block is " + std::to_string(r.remaining()) + " bytes, layer dims imply " +
               std::to_string(expected));
    }
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        DenseLayer layer{Matrix(dims[l + 1], dims[l]), std::vector<double>(dims[l + 1])};
        for (double& v : layer.weight.data) v = r.f32();
        for (double& v : layer.bias) v = r.f32();
        ck.model.layers.push_back(std::move(layer));
    }
    try {
        validate_model(ck.model);
    } catch (const ValidationError& e) {
        throw IoError(context + ": " + e.what());
    }
    return ck;
}

void save_checkpoint(const MlpModel& model, const CheckpointMeta& meta, const std::string& path) {
    binio::write_file(path, encode_checkpoint(model, meta));
}

Checkpoint load_checkpoint(const std::string& path) {
    return decode_checkpoint(binio::read_file(path), path);
}

MlpModel round_to_float(const MlpModel& model) {
    MlpModel out = model;
    for (auto& layer : out.layers) {
        for (double& v : layer.weight.data) v = static_cast<float>(v);
        for (double& v : layer.bias) v = static_cast<float>(v);
    }
    return out;
}

std::string history_csv(const TrainHistory& history) {
    std::string out = "epoch,train_loss,val_loss,val_acc\n";
    char line[160];
    for (std::size_t e = 0; e < history.epochs.size(); ++e) {
        const auto& s = history.epochs[e];
        std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g\n", e, s.train_loss, s.val_loss,
                      s.val_accuracy);
        out += line;
    }
    return out;
}

} // namespace patcls
