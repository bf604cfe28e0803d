#include "patcls/error.hpp"
#include "patcls/kernels.hpp"
#include "patcls/neuralnet.hpp"
#include "patcls/random.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

using namespace patcls;

namespace {

Matrix random_inputs(Rng& rng, std::size_t n, std::size_t d) {
    Matrix x(n, d);
    for (double& v : x.data) v = rng.normal();
    return x;
}

std::vector<int> random_labels(Rng& rng, std::size_t n, std::size_t c) {
    std::vector<int> y(n);
    for (int& v : y) v = static_cast<int>(rng.below(c));
    return y;
}

double scalar_adam(double theta, double g, AdamState& state) {
    std::vector<double> p{theta};
    const std::vector<double> grad{g};
    const std::span<double> ps[] = {p};
    const std::span<const double> gs[] = {grad};
    adam_step(ps, gs, state);
    return p[0];
}

} // namespace

// --- initialization --------------------------------------------------------

TEST(Init, ShapesAndParameterCount) {
    const auto m = init_mlp(512, 7, 1);
    EXPECT_EQ(m.layer_dims(), (std::vector<std::size_t>{512, 256, 128, 64, 7}));
    EXPECT_EQ(m.parameter_count(), 512u * 256 + 256 + 256 * 128 + 128 + 128 * 64 + 64 + 64 * 7 + 7);
    EXPECT_EQ(m.class_names.size(), 7u);
    EXPECT_EQ(m.class_names[0], "class_0");
}

TEST(Init, BoundsAndZeroBiases) {
    const auto m = init_mlp(100, 10, 42);
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const auto& layer = m.layers[l];
        const double fan_in = static_cast<double>(layer.in_dim());
        const double fan_out = static_cast<double>(layer.out_dim());
        const double bound = l + 1 < m.layers.size() ? std::sqrt(6.0 / fan_in)
                                                      : std::sqrt(6.0 / (fan_in + fan_out));
        double lo = 0, hi = 0;
        for (double w : layer.weight.data) {
            EXPECT_LE(std::abs(w), bound);
            lo = std::min(lo, w);
            hi = std::max(hi, w);
        }
        // The draws actually spread over the interval.
        EXPECT_LT(lo, -0.5 * bound);
        EXPECT_GT(hi, 0.5 * bound);
        for (double b : layer.bias) EXPECT_EQ(b, 0.0);
    }
}

TEST(Init, DeterministicPerSeed) {
    EXPECT_EQ(init_mlp(16, 3, 9), init_mlp(16, 3, 9));
    EXPECT_NE(init_mlp(16, 3, 9), init_mlp(16, 3, 10));
}

TEST(Init, RejectsDegenerateShapes) {
    EXPECT_THROW(init_mlp(0, 3, 1), ValidationError);
    EXPECT_THROW(init_mlp(4, 1, 1), ValidationError);
    EXPECT_THROW(init_mlp(4, {2, 0, 2}, 3, 1), ValidationError);
}

TEST(Model, ValidateCatchesBrokenChain) {
    auto m = init_mlp(4, {3, 3, 3}, 2, 1);
    EXPECT_NO_THROW(validate_model(m));
    m.layers[2].weight = Matrix(3, 5);
    EXPECT_THROW(validate_model(m), ValidationError);
    auto n = init_mlp(4, {3, 3, 3}, 2, 1);
    n.layers[1].bias[0] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(validate_model(n), ValidationError);
}

TEST(Model, ForwardRejectsWrongWidth) {
    const auto m = init_mlp(4, {3, 3, 3}, 2, 1);
    EXPECT_THROW(forward(m, Matrix(2, 5)), ValidationError);
}

// --- softmax / cross-entropy ----------------------------------------------

TEST(Softmax, KnownValues) {
    const std::vector<double> a{std::numbers::ln2, 0.0};
    const auto p = softmax(a);
    EXPECT_NEAR(p[0], 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(p[1], 1.0 / 3.0, 1e-15);

    const std::vector<double> big{1000.0, 1000.0};
    const auto q = softmax(big);
    EXPECT_EQ(q[0], 0.5);
    EXPECT_EQ(q[1], 0.5);

    const std::vector<double> spread{-1000.0, 0.0, 1000.0};
    const auto r = softmax(spread);
    for (double v : r) EXPECT_TRUE(std::isfinite(v));
    EXPECT_EQ(r[2], 1.0);
}

TEST(Softmax, RowsSumToOneProperty) {
    Rng rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = 1 + rng.below(10);
        std::vector<double> z(n);
        for (double& v : z) v = rng.uniform(-50, 50);
        const auto p = softmax(z);
        double s = 0;
        for (double v : p) {
            EXPECT_GE(v, 0.0);
            s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(CrossEntropy, UniformOverTenClasses) {
    Matrix p(1, 10, 0.1);
    const std::vector<int> y{3};
    EXPECT_NEAR(cross_entropy(p, y), 2.302585, 1e-6);
}

TEST(CrossEntropy, FloorKeepsItFinite) {
    Matrix p(1, 2);
    p.data = {1.0, 0.0};
    const std::vector<int> y{1};
    EXPECT_NEAR(cross_entropy(p, y), -std::log(kProbabilityFloor), 1e-9);
}

TEST(CrossEntropy, RejectsBadLabels) {
    Matrix p(1, 2, 0.5);
    const std::vector<int> y{2};
    EXPECT_THROW(cross_entropy(p, y), ValidationError);
    const std::vector<int> none;
    EXPECT_THROW(cross_entropy(Matrix(0, 2), none), ValidationError);
}

// --- backpropagation -------------------------------------------------------

TEST(Backward, MatchesFiniteDifferencesProperty) {
    Rng rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto d = 1 + rng.below(8);
        const auto c = 2 + rng.below(4);
        const auto n = 1 + rng.below(8);
        const auto model = testutil::random_small_model(rng, d, c);
        const auto x = random_inputs(rng, n, d);
        const auto y = random_labels(rng, n, c);
        const auto fwd = forward(model, x);
        const auto analytic = backward(model, fwd.cache, y);
        const auto numeric = testutil::numeric_gradients(model, x, y, 1e-5);
        const auto check = testutil::compare_gradients(analytic, numeric);
        worst = std::max(worst, check.worst);
        EXPECT_LT(check.worst, 1e-5) << "trial " << trial;
    }
    RecordProperty("worst_relative_error", std::to_string(worst));
}

TEST(Backward, ForwardLossMatchesNaiveLoop) {
    Rng rng(4);
    const auto model = testutil::random_small_model(rng, 5, 3);
    const auto x = random_inputs(rng, 9, 5);
    const auto y = random_labels(rng, 9, 3);
    const auto probs = softmax_rows(forward(model, x).logits);
    EXPECT_NEAR(cross_entropy(probs, y), testutil::naive_loss(model, x, y), 1e-12);
}

TEST(Backward, PerfectPredictionGivesZeroOutputDelta) {
    // Output layer that puts all mass on class 0 regardless of input.
    auto model = init_mlp(2, {2, 2, 2}, 2, 3);
    auto& out = model.layers.back();
    std::fill(out.weight.data.begin(), out.weight.data.end(), 0.0);
    out.bias = {1000.0, -1000.0};
    Matrix x(3, 2, 1.0);
    const std::vector<int> y{0, 0, 0};
    const auto g = backward(model, forward(model, x).cache, y);
    for (const auto& w : g.weight) {
        for (double v : w.data) EXPECT_EQ(v, 0.0);
    }
    for (const auto& b : g.bias) {
        for (double v : b) EXPECT_EQ(v, 0.0);
    }
}

TEST(Backward, DuplicatedBatchGivesSameMeanGradient) {
    Rng rng(6);
    const auto model = testutil::random_small_model(rng, 3, 3);
    const auto x = random_inputs(rng, 4, 3);
    const auto y = random_labels(rng, 4, 3);
    Matrix xx(8, 3);
    std::vector<int> yy;
    for (std::size_t r = 0; r < 8; ++r) {
        std::copy_n(x.row(r % 4).begin(), 3, xx.row(r).begin());
        yy.push_back(y[r % 4]);
    }
    const auto g1 = backward(model, forward(model, x).cache, y);
    const auto g2 = backward(model, forward(model, xx).cache, yy);
    for (std::size_t l = 0; l < g1.weight.size(); ++l) {
        for (std::size_t j = 0; j < g1.weight[l].data.size(); ++j) {
            EXPECT_NEAR(g1.weight[l].data[j], g2.weight[l].data[j], 1e-14);
        }
        for (std::size_t j = 0; j < g1.bias[l].size(); ++j) {
            EXPECT_NEAR(g1.bias[l][j], g2.bias[l][j], 1e-14);
        }
    }
}

TEST(Backward, RejectsStaleCache) {
    const auto model = init_mlp(3, {2, 2, 2}, 2, 1);
    const auto other = init_mlp(4, {2, 2, 2}, 2, 1);
    const auto fwd = forward(other, Matrix(2, 4, 1.0));
    const std::vector<int> y{0, 1};
    EXPECT_THROW(backward(model, fwd.cache, y), ValidationError);
    const auto own = forward(model, Matrix(2, 3, 1.0));
    const std::vector<int> short_y{0};
    EXPECT_THROW(backward(model, own.cache, short_y), ValidationError);
}

TEST(Backward, SerialAndParallelKernelsAgreeBitwise) {
    Rng rng(12);
    const auto model = init_mlp(300, 5, 1);
    const auto x = random_inputs(rng, 64, 300);
    const auto y = random_labels(rng, 64, 5);
    const bool before = kernels::parallel_enabled();
    kernels::set_parallel(false);
    const auto serial = backward(model, forward(model, x).cache, y);
    kernels::set_parallel(true);
    const auto parallel = backward(model, forward(model, x).cache, y);
    kernels::set_parallel(before);
    for (std::size_t l = 0; l < serial.weight.size(); ++l) {
        EXPECT_EQ(serial.weight[l], parallel.weight[l]);
        EXPECT_EQ(serial.bias[l], parallel.bias[l]);
    }
}

// --- prediction ------------------------------------------------------------

TEST(Predict, TiesGoToLowestIndex) {
    Matrix s(3, 3);
    s.data = {1, 1, 0, 0, 2, 2, 5, 5, 5};
    EXPECT_EQ(argmax_rows(s), (std::vector<int>{0, 1, 0}));
}

TEST(Predict, Deterministic) {
    Rng rng(1);
    const auto model = init_mlp(8, 4, 3);
    const auto x = random_inputs(rng, 20, 8);
    EXPECT_EQ(predict(model, x), predict(model, x));
    EXPECT_EQ(infer_logits(model, x), forward(model, x).logits);
}

// --- Adam ------------------------------------------------------------------

TEST(Adam, FirstStepOracle) {
    auto state = AdamState::for_sizes(std::vector<std::size_t>{1});
    EXPECT_NEAR(scalar_adam(0.5, 1.0, state), 0.4990000000099999, 1e-15);
    EXPECT_EQ(state.t, 1u);
}

TEST(Adam, MatchesHighPrecisionTrajectory) {
    auto state = AdamState::for_sizes(std::vector<std::size_t>{1});
    double theta = 0.5;
    for (const auto& row : testutil::read_adam_trajectory()) {
        theta = scalar_adam(theta, row.grad, state);
        EXPECT_NEAR(theta, row.theta, 1e-12) << "step " << row.step;
        EXPECT_NEAR(state.m[0][0], row.m, 1e-15);
        EXPECT_NEAR(state.v[0][0], row.v, 1e-15);
    }
}

TEST(Adam, ZeroGradientLeavesFreshParameter) {
    auto state = AdamState::for_sizes(std::vector<std::size_t>{1});
    EXPECT_EQ(scalar_adam(0.25, 0.0, state), 0.25);
}

TEST(Adam, SignSymmetry) {
    // From theta = 0 the update is the step itself, with no rounding against theta.
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        const double g = rng.uniform(-10, 10);
        auto a = AdamState::for_sizes(std::vector<std::size_t>{1});
        auto b = AdamState::for_sizes(std::vector<std::size_t>{1});
        EXPECT_EQ(scalar_adam(0.0, g, a), -scalar_adam(0.0, -g, b));
    }
}

TEST(Adam, ZeroLearningRateIsIdentityButAdvancesTime) {
    auto state = AdamState::for_sizes(std::vector<std::size_t>{1}, {0.0, 0.9, 0.999, 1e-8});
    double theta = 0.75;
    for (int i = 0; i < 3; ++i) theta = scalar_adam(theta, 1.5, state);
    EXPECT_EQ(theta, 0.75);
    EXPECT_EQ(state.t, 3u);
}

TEST(Adam, RefusesNonFiniteGradientsWithoutSideEffects) {
    auto state = AdamState::for_sizes(std::vector<std::size_t>{2});
    std::vector<double> p{1.0, 2.0};
    const std::vector<double> g{0.5, std::numeric_limits<double>::infinity()};
    const std::span<double> ps[] = {p};
    const std::span<const double> gs[] = {g};
    EXPECT_THROW(adam_step(ps, gs, state), ValidationError);
    EXPECT_EQ(p, (std::vector<double>{1.0, 2.0}));
    EXPECT_EQ(state.t, 0u);
    EXPECT_EQ(state.m[0], (std::vector<double>{0.0, 0.0}));
}

TEST(Adam, ModelStepMovesEveryTensor) {
    Rng rng(3);
    auto model = testutil::random_small_model(rng, 3, 2);
    const auto before = model;
    const auto x = random_inputs(rng, 5, 3);
    const auto y = random_labels(rng, 5, 2);
    auto state = AdamState::for_model(model);
    adam_step(model, backward(model, forward(model, x).cache, y), state);
    EXPECT_EQ(state.t, 1u);
    EXPECT_EQ(state.m.size(), 2 * kAffineLayers);
    EXPECT_NE(model.layers.back().bias, before.layers.back().bias);
    EXPECT_LT(testutil::naive_loss(model, x, y), testutil::naive_loss(before, x, y));
}
