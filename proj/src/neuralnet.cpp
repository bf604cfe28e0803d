#include "patcls/neuralnet.hpp"

#include "patcls/error.hpp"
#include "patcls/kernels.hpp"
#include "patcls/random.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace patcls {

std::vector<std::size_t> MlpModel::layer_dims() const {
    std::vector<std::size_t> dims;
    if (layers.empty()) return dims;
    dims.push_back(layers.front().in_dim());
    for (const auto& l : layers) dims.push_back(l.out_dim());
    return dims;
}

std::size_t MlpModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.data.size() + l.bias.size();
    return n;
}

MlpModel init_mlp(std::size_t input_dim, const std::array<std::size_t, 3>& hidden,
                  std::size_t class_count, std::uint64_t seed) {
    if (input_dim == 0) throw ValidationError("input_dim must be positive");
    if (class_count < 2) throw ValidationError("class_count must be at least 2");
    for (auto h : hidden) {
        if (h == 0) throw ValidationError("hidden widths must be positive");
    }

    const std::array<std::size_t, kAffineLayers + 1> dims{input_dim, hidden[0], hidden[1],
                                                         hidden[2], class_count};
    Rng rng(splitmix64(seed));
    MlpModel model;
    for (std::size_t l = 0; l < kAffineLayers; ++l) {
        const std::size_t in = dims[l];
        const std::size_t out = dims[l + 1];
        const bool output_layer = l + 1 == kAffineLayers;
        // Kaiming-uniform (ReLU gain) for hidden layers, Glorot-uniform for the output.
        const double bound = output_layer ? std::sqrt(6.0 / static_cast<double>(in + out))
                                          : std::sqrt(6.0 / static_cast<double>(in));
        DenseLayer layer{Matrix(out, in), std::vector<double>(out, 0.0)};
        for (double& w : layer.weight.data) w = rng.uniform(-bound, bound);
        model.layers.push_back(std::move(layer));
    }
    for (std::size_t c = 0; c < class_count; ++c) {
        model.class_names.push_back("class_" + std::to_string(c));
    }
    return model;
}

MlpModel init_mlp(std::size_t input_dim, std::size_t class_count, std::uint64_t seed) {
    return init_mlp(input_dim, kHiddenDims, class_count, seed);
}

void validate_model(const MlpModel& model) {
    if (model.layers.size() != kAffineLayers) {
        throw ValidationError("model must have " + std::to_string(kAffineLayers) +
                              " affine layers, has " + std::to_string(model.layers.size()));
    }
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& layer = model.layers[l];
        const auto where = "layer " + std::to_string(l) + ": ";
        if (layer.in_dim() == 0 || layer.out_dim() == 0) throw ValidationError(where + "empty");
        if (layer.weight.data.size() != layer.in_dim() * layer.out_dim()) {
            throw ValidationError(where + "weight storage does not match its shape");
        }
        if (layer.bias.size() != layer.out_dim()) throw ValidationError(where + "bias length mismatch");
        if (l > 0 && layer.in_dim() != model.layers[l - 1].out_dim()) {
            throw ValidationError(where + "input width does not match previous layer");
        }
        const auto finite = [](double v) { return std::isfinite(v); };
        if (!std::all_of(layer.weight.data.begin(), layer.weight.data.end(), finite) ||
            !std::all_of(layer.bias.begin(), layer.bias.end(), finite)) {
            throw ValidationError(where + "non-finite parameter");
        }
    }
    if (model.class_names.size() != model.class_count()) {
        throw ValidationError("class_names length does not match the output layer");
    }
}

namespace {

void check_input(const MlpModel& model, const Matrix& x) {
    if (x.cols != model.input_dim()) {
        throw ValidationError("input has " + std::to_string(x.cols) + " columns, model expects " +
                              std::to_string(model.input_dim()));
    }
}

} // namespace

ForwardResult forward(const MlpModel& model, const Matrix& x) {
    check_input(model, x);
    ForwardResult out;
    auto& cache = out.cache;
    cache.input = x;
    cache.pre.resize(model.layers.size());
    cache.post.resize(model.layers.size() - 1);

    const Matrix* input = &cache.input;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& layer = model.layers[l];
        kernels::affine_forward(*input, layer.weight, layer.bias, cache.pre[l]);
        if (l + 1 < model.layers.size()) {
            kernels::relu_forward(cache.pre[l], cache.post[l]);
            input = &cache.post[l];
        }
    }
    out.logits = cache.pre.back();
    return out;
}

Matrix infer_logits(const MlpModel& model, const Matrix& x) {
    check_input(model, x);
    Matrix a = x;
    Matrix z;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        kernels::affine_forward(a, model.layers[l].weight, model.layers[l].bias, z);
        if (l + 1 < model.layers.size()) kernels::relu_forward(z, a);
    }
    return z;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.size());
    if (logits.empty()) return p;
    const double shift = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - shift);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix probs(logits.rows, logits.cols);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const auto p = softmax(logits.row(i));
        std::copy(p.begin(), p.end(), probs.row(i).begin());
    }
    return probs;
}

double cross_entropy(const Matrix& probs, std::span<const int> y) {
    if (probs.rows != y.size()) {
        throw ValidationError("cross_entropy: " + std::to_string(probs.rows) + " rows but " +
                              std::to_string(y.size()) + " labels");
    }
    if (y.empty()) throw ValidationError("cross_entropy: empty batch");
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] < 0 || static_cast<std::size_t>(y[i]) >= probs.cols) {
            throw ValidationError("cross_entropy: label " + std::to_string(y[i]) + " out of range");
        }
        total += -std::log(std::max(probs(i, static_cast<std::size_t>(y[i])), kProbabilityFloor));
    }
    return total / static_cast<double>(y.size());
}

Gradients backward(const MlpModel& model, const ForwardCache& cache, std::span<const int> y) {
    const std::size_t n = cache.input.rows;
    if (y.size() != n) {
        throw ValidationError("backward: cache holds " + std::to_string(n) + " rows but " +
                              std::to_string(y.size()) + " labels given (stale cache)");
    }
    if (cache.pre.size() != model.layers.size() || cache.post.size() + 1 != model.layers.size() ||
        cache.pre.back().cols != model.class_count() || cache.input.cols != model.input_dim()) {
        throw ValidationError("backward: cache does not match the model");
    }
    if (n == 0) throw ValidationError("backward: empty batch");

    const std::size_t classes = model.class_count();
    Matrix delta = softmax_rows(cache.pre.back());
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (y[i] < 0 || static_cast<std::size_t>(y[i]) >= classes) {
            throw ValidationError("backward: label " + std::to_string(y[i]) + " out of range");
        }
        delta(i, static_cast<std::size_t>(y[i])) -= 1.0;
        for (double& d : delta.row(i)) d *= inv_n;
    }

    Gradients grads;
    grads.weight.resize(model.layers.size());
    grads.bias.resize(model.layers.size());
    for (std::size_t l = model.layers.size(); l-- > 0;) {
        const Matrix& input = l == 0 ? cache.input : cache.post[l - 1];
        grads.bias[l].resize(model.layers[l].out_dim());
        kernels::affine_backward_params(delta, input, grads.weight[l], grads.bias[l]);
        if (l > 0) {
            Matrix upstream;
            kernels::affine_backward_input(delta, model.layers[l].weight, upstream);
            kernels::relu_backward(cache.pre[l - 1], upstream);
            delta = std::move(upstream);
        }
    }
    return grads;
}

std::vector<int> argmax_rows(const Matrix& scores) {
    std::vector<int> out(scores.rows, 0);
    for (std::size_t i = 0; i < scores.rows; ++i) {
        const auto row = scores.row(i);
        // max_element returns the first maximum, which is the tie-break rule.
        out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

std::vector<int> predict(const MlpModel& model, const Matrix& x) {
    return argmax_rows(infer_logits(model, x));
}

// ---------------------------------------------------------------------------

AdamState AdamState::for_sizes(std::span<const std::size_t> sizes, AdamHyperparameters hyper) {
    AdamState s;
    s.hyper = hyper;
    for (auto n : sizes) {
        s.m.emplace_back(n, 0.0);
        s.v.emplace_back(n, 0.0);
    }
    return s;
}

AdamState AdamState::for_model(const MlpModel& model, AdamHyperparameters hyper) {
    std::vector<std::size_t> sizes;
    for (const auto& l : model.layers) {
        sizes.push_back(l.weight.data.size());
        sizes.push_back(l.bias.size());
    }
    return for_sizes(sizes, hyper);
}

void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.m.size() ||
        params.size() != state.v.size()) {
        throw ValidationError("adam_step: tensor count mismatch");
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (params[k].size() != grads[k].size() || params[k].size() != state.m[k].size() ||
            params[k].size() != state.v[k].size()) {
            throw ValidationError("adam_step: shape mismatch in tensor " + std::to_string(k));
        }
        for (std::size_t j = 0; j < grads[k].size(); ++j) {
            if (!std::isfinite(grads[k][j])) {
                std::ostringstream msg;
                msg << "adam_step: non-finite gradient at tensor " << k << " index " << j
                    << "; step refused";
                throw ValidationError(msg.str());
            }
        }
    }

    ++state.t;
    const auto& h = state.hyper;
    const double t = static_cast<double>(state.t);
    const kernels::AdamCoefficients coeffs{h.lr, h.beta1, h.beta2, h.epsilon,
                                           1.0 - std::pow(h.beta1, t), 1.0 - std::pow(h.beta2, t)};
    for (std::size_t k = 0; k < params.size(); ++k) {
        kernels::adam_update(params[k], grads[k], state.m[k], state.v[k], coeffs);
    }
}

void adam_step(MlpModel& model, const Gradients& grads, AdamState& state) {
    if (grads.weight.size() != model.layers.size() || grads.bias.size() != model.layers.size()) {
        throw ValidationError("adam_step: gradients do not match the model");
    }
    std::vector<std::span<double>> params;
    std::vector<std::span<const double>> g;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        params.emplace_back(model.layers[l].weight.data);
        g.emplace_back(grads.weight[l].data);
        params.emplace_back(model.layers[l].bias);
        g.emplace_back(grads.bias[l]);
    }
    adam_step(params, g, state);
}

} // namespace patcls
