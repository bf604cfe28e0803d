#pragma once

#include "patcls/matrix.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace patcls {

/// Hidden widths of the MLP head.
inline constexpr std::array<std::size_t, 3> kHiddenDims{256, 128, 64};
/// Affine layers in every model: three hidden plus the output layer.
inline constexpr std::size_t kAffineLayers = 4;

struct DenseLayer {
    Matrix weight;              // out x in
    std::vector<double> bias;   // out

    std::size_t in_dim() const { return weight.cols; }
    std::size_t out_dim() const { return weight.rows; }
    bool operator==(const DenseLayer&) const = default;
};

/// Four affine layers with ReLU after the first three. Parameters are kept in
/// double precision; checkpoints store them as float.
struct MlpModel {
    std::vector<DenseLayer> layers;
    std::vector<std::string> class_names;

    /// [input, h1, h2, h3, classes]
    std::vector<std::size_t> layer_dims() const;
    std::size_t input_dim() const { return layers.front().in_dim(); }
    std::size_t class_count() const { return layers.back().out_dim(); }
    std::size_t parameter_count() const;

    bool operator==(const MlpModel&) const = default;
};

/// Model with the [input, 256, 128, 64, classes] architecture. Hidden layers get
/// Kaiming-uniform weights, the output layer Glorot-uniform, biases are zero.
/// Deterministic given the seed. Class names default to "class_<i>".
MlpModel init_mlp(std::size_t input_dim, std::size_t class_count, std::uint64_t seed);

/// Same initialization with arbitrary hidden widths. Used for small models in
/// gradient checks; production code goes through init_mlp.
MlpModel init_mlp(std::size_t input_dim, const std::array<std::size_t, 3>& hidden,
                  std::size_t class_count, std::uint64_t seed);

/// Throws ValidationError if layer shapes do not chain or a parameter is not finite.
void validate_model(const MlpModel& model);

struct ForwardCache {
    Matrix input;
    std::vector<Matrix> pre;   // pre-activations, one per affine layer
    std::vector<Matrix> post;  // ReLU outputs of the hidden layers
};

struct ForwardResult {
    Matrix logits;
    ForwardCache cache;
};

ForwardResult forward(const MlpModel& model, const Matrix& x);
/// Forward pass that keeps no intermediate activations.
Matrix infer_logits(const MlpModel& model, const Matrix& x);

/// Max-shifted softmax of one row.
std::vector<double> softmax(std::span<const double> logits);
Matrix softmax_rows(const Matrix& logits);

/// Probability floor inside the log of the cross-entropy.
inline constexpr double kProbabilityFloor = 1e-12;

/// Mean over rows of -log(max(probs[i, y_i], floor)).
double cross_entropy(const Matrix& probs, std::span<const int> y);

struct Gradients {
    std::vector<Matrix> weight;
    std::vector<std::vector<double>> bias;
};

/// Exact gradient of the mean cross-entropy of softmax(logits) with respect to
/// every weight and bias. The output delta is (softmax - onehot) / batch.
Gradients backward(const MlpModel& model, const ForwardCache& cache, std::span<const int> y);

/// Row-wise argmax of the logits; ties go to the lowest index.
std::vector<int> predict(const MlpModel& model, const Matrix& x);
std::vector<int> argmax_rows(const Matrix& scores);

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamHyperparameters {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamHyperparameters hyper;
    std::uint64_t t = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    /// Zeroed moments for tensors of the given sizes.
    static AdamState for_sizes(std::span<const std::size_t> sizes, AdamHyperparameters hyper = {});
    /// Zeroed moments matching the model's parameter tensors.
    static AdamState for_model(const MlpModel& model, AdamHyperparameters hyper = {});
};

/// One Adam step over flat tensors. Throws ValidationError, leaving params and
/// state untouched, if any gradient entry is non-finite or shapes differ.
void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state);

/// Tensor order: layer 0 weight, layer 0 bias, layer 1 weight, ...
void adam_step(MlpModel& model, const Gradients& grads, AdamState& state);

} // namespace patcls
