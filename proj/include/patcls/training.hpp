#pragma once

#include "patcls/dataset.hpp"
#include "patcls/error.hpp"
#include "patcls/neuralnet.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace patcls {

struct TrainConfig {
    int epochs = 200;
    std::size_t batch_size = 32;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    bool normalize_features = false;
    bool strict_join = true;

    /// Throws ValidationError unless epochs >= 1, batch_size >= 1, lr > 0.
    void validate() const;
};

struct EpochStats {
    double train_loss;    // sample-weighted mean of the batch losses
    double val_loss;      // full-batch, after the epoch's updates
    double val_accuracy;  // micro top-1 on the validation split

    bool operator==(const EpochStats&) const = default;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;  // first epoch attaining the minimal val_loss

    bool operator==(const TrainHistory&) const = default;
};

/// Optional observation points. They never influence the run.
struct TrainHooks {
    std::function<void(int epoch, std::span<const std::size_t> order)> on_epoch_order;
    std::function<void(int epoch, const MlpModel& model, const EpochStats& stats)> on_epoch_end;
};

struct TrainResult {
    MlpModel model;  // snapshot from history.best_epoch
    TrainHistory history;
};

/// Thrown when a loss or gradient turns non-finite; carries the failing coordinates.
class TrainingDiverged : public ValidationError {
public:
    TrainingDiverged(int epoch, std::size_t batch);
    int epoch;
    std::size_t batch;
};

/// Mini-batch Adam over `train`, validating after every epoch and keeping the
/// parameters of the epoch with the lowest validation loss. Deterministic for
/// a given config.seed. Does not normalize features; callers apply
/// l2_normalize_rows beforehand when config.normalize_features is set.
TrainResult train(const LabeledDataset& train_set, const LabeledDataset& val_set,
                  const TrainConfig& config, const TrainHooks& hooks = {});

/// Permutation of [0, n) used for the given epoch's batches.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch);

/// Mean cross-entropy over the whole dataset in a single pass.
double evaluate_loss(const MlpModel& model, const LabeledDataset& data);
double evaluate_accuracy(const MlpModel& model, const LabeledDataset& data);

// ---------------------------------------------------------------------------
// Checkpoints (PMLP v1)
// ---------------------------------------------------------------------------

struct CheckpointMeta {
    Task task = Task::image_type;
    std::uint64_t seed = 0;
    std::uint32_t best_epoch = 0;

    bool operator==(const CheckpointMeta&) const = default;
};

struct Checkpoint {
    MlpModel model;
    CheckpointMeta meta;
};

inline constexpr char kPmlpMagic[4] = {'P', 'M', 'L', 'P'};
inline constexpr std::uint32_t kPmlpVersion = 1;

/// Parameters are rounded to float on encode.
std::vector<std::uint8_t> encode_checkpoint(const MlpModel& model, const CheckpointMeta& meta);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes,
                             const std::string& context = "checkpoint");
void save_checkpoint(const MlpModel& model, const CheckpointMeta& meta, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// The model as a checkpoint round-trip would return it.
MlpModel round_to_float(const MlpModel& model);

/// `epoch,train_loss,val_loss,val_acc` with round-trip precision.
std::string history_csv(const TrainHistory& history);

} // namespace patcls
