#include <bit>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "grad_util.hpp"
#include "grlnet/nn/adam.hpp"
#include "grlnet/nn/checkpoint.hpp"
#include "grlnet/nn/layers.hpp"
#include "grlnet/nn/loss.hpp"

using namespace grlnet;
using namespace grlnet::nn;
using grlnet::testing::away_from_zero;
using grlnet::testing::layer_grad_error;
using grlnet::testing::random_tensor;

namespace {

constexpr double kGradTol = 1e-4;

// Direct nested-loop reference.
Tensor conv1d_reference(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t pad) {
    const std::size_t B = x.dim(0), Cin = x.dim(1), L = x.dim(2), Cout = w.dim(0), K = w.dim(2);
    const std::size_t Lout = (L + 2 * pad - K) / stride + 1;
    Tensor y({B, Cout, Lout});
    for (std::size_t n = 0; n < B; ++n)
        for (std::size_t o = 0; o < Cout; ++o)
            for (std::size_t t = 0; t < Lout; ++t) {
                double s = b.value[o];
                for (std::size_t c = 0; c < Cin; ++c)
                    for (std::size_t k = 0; k < K; ++k) {
                        const long pos = static_cast<long>(t * stride + k) - static_cast<long>(pad);
                        if (pos >= 0 && pos < static_cast<long>(L)) s += w.value[(o * Cin + c) * K + k] * x.at(n, c, pos);
                    }
                y.at(n, o, t) = s;
            }
    return y;
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

TEST(Tensor, ShapeAndBuffers) {
    Tensor t({2, 3, 4});
    EXPECT_EQ(t.numel(), 24u);
    EXPECT_EQ(t.grad.size(), 24u);
    EXPECT_EQ(t.rank(), 3u);
}

TEST(Tensor, ZeroDimensionRejected) { EXPECT_THROW(Tensor({2, 0}), ValidationError); }

TEST(Tensor, ValueCountMismatchRejected) { EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ValidationError); }

TEST(Tensor, RequireFiniteFlagsNan) {
    Tensor t({2}, std::vector<double>{1.0, std::nan("")});
    EXPECT_THROW(t.require_finite("t"), NumericalError);
}

// ---------------------------------------------------------------------------
// Conv1d
// ---------------------------------------------------------------------------

TEST(Conv1d, OneTapIdentity) {
    std::mt19937_64 rng(0);
    Conv1d conv(1, 1, 1, 1, 0, rng);
    conv.weight.value = {1.0};
    conv.bias.value = {0.0};
    Cache c;
    const auto y = conv.forward(Tensor({1, 1, 4}, std::vector<double>{1, 2, 3, 4}), Mode::eval, c);
    EXPECT_EQ(y.value, (std::vector<double>{1, 2, 3, 4}));
}

TEST(Conv1d, ZeroPaddedSum) {
    std::mt19937_64 rng(0);
    Conv1d conv(1, 1, 3, 1, 1, rng);
    conv.weight.value = {1, 1, 1};
    conv.bias.value = {0};
    Cache c;
    const auto y = conv.forward(Tensor({1, 1, 3}, std::vector<double>{1, 1, 1}), Mode::eval, c);
    EXPECT_EQ(y.value, (std::vector<double>{2, 3, 2}));
}

TEST(Conv1d, MatchesLoopReference) {
    std::mt19937_64 rng(1);
    for (auto [stride, pad, k] : {std::tuple{1u, 0u, 3u}, {2u, 1u, 3u}, {2u, 3u, 7u}, {3u, 2u, 5u}}) {
        Conv1d conv(3, 4, k, stride, pad, rng);
        conv.bias = random_tensor({4}, rng);
        const auto x = random_tensor({2, 3, 17}, rng);
        Cache c;
        const auto y = conv.forward(x, Mode::eval, c);
        const auto ref = conv1d_reference(x, conv.weight, conv.bias, stride, pad);
        ASSERT_EQ(y.shape, ref.shape);
        for (std::size_t i = 0; i < y.numel(); ++i) EXPECT_NEAR(y.value[i], ref.value[i], 1e-12);
    }
}

TEST(Conv1d, GradCheck) {
    std::mt19937_64 rng(2);
    for (auto [cin, cout, k, stride, pad, len] :
         {std::tuple{1u, 2u, 3u, 1u, 1u, 6u}, {2u, 3u, 3u, 2u, 1u, 9u}, {3u, 2u, 5u, 2u, 2u, 11u}, {2u, 2u, 7u, 1u, 3u, 8u}}) {
        Conv1d conv(cin, cout, k, stride, pad, rng);
        conv.bias = random_tensor({cout}, rng);
        EXPECT_LT(layer_grad_error(conv, random_tensor({2, cin, len}, rng), Mode::train, rng), kGradTol);
    }
}

TEST(Conv1d, ZeroGradOutGivesZeroGrads) {
    std::mt19937_64 rng(3);
    Conv1d conv(2, 3, 3, 2, 1, rng);
    const auto x = random_tensor({2, 2, 8}, rng);
    Cache c;
    const auto y = conv.forward(x, Mode::train, c);
    const auto dx = conv.backward(c, y.zeros_like());
    for (double v : dx.value) EXPECT_EQ(v, 0.0);
    for (double v : conv.weight.grad) EXPECT_EQ(v, 0.0);
    for (double v : conv.bias.grad) EXPECT_EQ(v, 0.0);
}

TEST(Conv1d, BackwardIsLinearInGradOut) {
    std::mt19937_64 rng(4);
    Conv1d conv(2, 3, 3, 2, 1, rng);
    const auto x = random_tensor({2, 2, 8}, rng);
    Cache c;
    const auto y = conv.forward(x, Mode::train, c);
    const auto r = random_tensor(y.shape, rng);
    auto r2 = r;
    for (auto& v : r2.value) v *= 2.0;
    const auto dx1 = conv.backward(c, r);
    const auto w1 = conv.weight.grad;
    conv.weight.zero_grad();
    const auto dx2 = conv.backward(c, r2);
    for (std::size_t i = 0; i < dx1.numel(); ++i) EXPECT_NEAR(dx2.value[i], 2.0 * dx1.value[i], 1e-12);
    for (std::size_t i = 0; i < w1.size(); ++i) EXPECT_NEAR(conv.weight.grad[i], 2.0 * w1[i], 1e-12);
}

TEST(Conv1d, WrongChannelsRejected) {
    std::mt19937_64 rng(5);
    Conv1d conv(2, 3, 3, 1, 1, rng);
    Cache c;
    EXPECT_THROW(conv.forward(Tensor({1, 3, 8}), Mode::eval, c), ValidationError);
}

// ---------------------------------------------------------------------------
// ConvTranspose1d
// ---------------------------------------------------------------------------

TEST(ConvTranspose1d, OneTapIdentity) {
    std::mt19937_64 rng(0);
    ConvTranspose1d deconv(1, 1, 1, 1, 0, 0, rng);
    deconv.weight.value = {1.0};
    Cache c;
    EXPECT_EQ(deconv.forward(Tensor({1, 1, 3}, std::vector<double>{5, 6, 7}), Mode::eval, c).value,
              (std::vector<double>{5, 6, 7}));
}

TEST(ConvTranspose1d, AdjointOfConv) {
    std::mt19937_64 rng(6);
    for (auto [stride, pad, k, len] : {std::tuple{1u, 0u, 3u, 9u}, {2u, 1u, 3u, 10u}, {2u, 3u, 7u, 16u}}) {
        Conv1d conv(3, 2, k, stride, pad, rng);
        const auto x = random_tensor({1, 3, len}, rng);
        Cache cc;
        const auto y = conv.forward(x, Mode::eval, cc);
        const std::size_t opad = len - conv_transpose1d_output_length(y.dim(2), k, stride, pad, 0);
        ConvTranspose1d deconv(2, 3, k, stride, pad, opad, rng);
        deconv.weight.value = conv.weight.value;  // [out,in,k] of conv equals [in,out,k] of the transpose
        const auto g = random_tensor(y.shape, rng);
        Cache dc;
        const auto t = deconv.forward(g, Mode::eval, dc);
        const auto dx = conv.backward(cc, g);
        ASSERT_EQ(t.shape, dx.shape);
        for (std::size_t i = 0; i < t.numel(); ++i) EXPECT_NEAR(t.value[i], dx.value[i], 1e-12);
    }
}

TEST(ConvTranspose1d, GradCheck) {
    std::mt19937_64 rng(7);
    for (auto [cin, cout, k, stride, pad, opad, len] :
         {std::tuple{2u, 1u, 3u, 2u, 1u, 1u, 5u}, {3u, 2u, 7u, 2u, 3u, 0u, 4u}, {1u, 3u, 5u, 1u, 2u, 0u, 6u}}) {
        ConvTranspose1d deconv(cin, cout, k, stride, pad, opad, rng);
        deconv.bias = random_tensor({cout}, rng);
        EXPECT_LT(layer_grad_error(deconv, random_tensor({2, cin, len}, rng), Mode::train, rng), kGradTol);
    }
}

// ---------------------------------------------------------------------------
// BatchNorm1d
// ---------------------------------------------------------------------------

TEST(BatchNorm1d, TrainOutputIsStandardized) {
    std::mt19937_64 rng(8);
    BatchNorm1d bn(3);
    bn.eps = 0.0;
    const auto x = random_tensor({4, 3, 10}, rng, -5.0, 7.0);
    Cache c;
    const auto y = bn.forward(x, Mode::train, c);
    for (std::size_t ch = 0; ch < 3; ++ch) {
        double mean = 0.0, var = 0.0;
        for (std::size_t b = 0; b < 4; ++b)
            for (std::size_t l = 0; l < 10; ++l) mean += y.at(b, ch, l);
        mean /= 40.0;
        for (std::size_t b = 0; b < 4; ++b)
            for (std::size_t l = 0; l < 10; ++l) var += (y.at(b, ch, l) - mean) * (y.at(b, ch, l) - mean);
        var /= 40.0;
        EXPECT_LT(std::abs(mean), 1e-6);
        EXPECT_NEAR(var, 1.0, 1e-5);
    }
}

TEST(BatchNorm1d, ConstantChannelGivesZeros) {
    BatchNorm1d bn(2);
    Tensor x({3, 2, 4}, 2.5);
    Cache c;
    for (double v : bn.forward(x, Mode::train, c).value) EXPECT_EQ(v, 0.0);
}

TEST(BatchNorm1d, EvalWithUnitStatsIsIdentity) {
    std::mt19937_64 rng(9);
    BatchNorm1d bn(2);
    bn.eps = 0.0;
    const auto x = random_tensor({2, 2, 5}, rng);
    Cache c;
    const auto y = bn.forward(x, Mode::eval, c);
    for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_DOUBLE_EQ(y.value[i], x.value[i]);
}

TEST(BatchNorm1d, RunningStatisticsFollowModes) {
    std::mt19937_64 rng(10);
    BatchNorm1d bn(2);
    const auto x = random_tensor({4, 2, 6}, rng, 1.0, 3.0);
    Cache c;
    bn.forward(x, Mode::train_frozen_stats, c);
    EXPECT_EQ(bn.running_mean.value, (std::vector<double>{0.0, 0.0}));
    EXPECT_EQ(bn.running_var.value, (std::vector<double>{1.0, 1.0}));
    bn.forward(x, Mode::train, c);
    EXPECT_GT(bn.running_mean.value[0], 0.0);
    for (double v : bn.running_var.value) EXPECT_GE(v, 0.0);
}

TEST(BatchNorm1d, EvalIsDeterministic) {
    std::mt19937_64 rng(11);
    BatchNorm1d bn(3);
    bn.running_mean = random_tensor({3}, rng);
    bn.running_var = random_tensor({3}, rng, 0.5, 2.0);
    const auto x = random_tensor({2, 3, 4}, rng);
    Cache c1, c2;
    EXPECT_EQ(bn.forward(x, Mode::eval, c1).value, bn.forward(x, Mode::eval, c2).value);
}

TEST(BatchNorm1d, GradCheckTrainAndEval) {
    std::mt19937_64 rng(12);
    for (auto shape : {Shape{4, 2, 3}, Shape{3, 3, 5}, Shape{2, 1, 6}, Shape{5, 4}}) {
        BatchNorm1d bn(shape[1]);
        bn.gamma = random_tensor({shape[1]}, rng, 0.5, 1.5);
        bn.beta = random_tensor({shape[1]}, rng);
        EXPECT_LT(layer_grad_error(bn, random_tensor(shape, rng), Mode::train, rng), kGradTol);
        bn.running_var = random_tensor({shape[1]}, rng, 0.5, 2.0);
        EXPECT_LT(layer_grad_error(bn, random_tensor(shape, rng), Mode::eval, rng), kGradTol);
    }
}

TEST(BatchNorm1d, SingleValueTrainingRejected) {
    BatchNorm1d bn(2);
    Cache c;
    EXPECT_THROW(bn.forward(Tensor({1, 2, 1}), Mode::train, c), ValidationError);
}

// ---------------------------------------------------------------------------
// LayerNorm
// ---------------------------------------------------------------------------

TEST(LayerNorm, TwoPoint) {
    LayerNorm ln(2, 0.0);
    Cache c;
    const auto y = ln.forward(Tensor({1, 2}, std::vector<double>{0, 2}), Mode::eval, c);
    EXPECT_NEAR(y.value[0], -1.0, 1e-12);
    EXPECT_NEAR(y.value[1], 1.0, 1e-12);
}

TEST(LayerNorm, ConstantGivesZeros) {
    LayerNorm ln(4);
    Cache c;
    for (double v : ln.forward(Tensor({2, 4}, 3.0), Mode::eval, c).value) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, GradCheck) {
    std::mt19937_64 rng(13);
    for (auto shape : {Shape{2, 5}, Shape{3, 1, 8}, Shape{1, 2, 16}}) {
        LayerNorm ln(shape.back());
        ln.gamma = random_tensor({shape.back()}, rng, 0.5, 1.5);
        ln.beta = random_tensor({shape.back()}, rng);
        EXPECT_LT(layer_grad_error(ln, random_tensor(shape, rng), Mode::train, rng), kGradTol);
    }
}

// ---------------------------------------------------------------------------
// Linear, activations, flatten
// ---------------------------------------------------------------------------

TEST(Linear, IdentityWeights) {
    std::mt19937_64 rng(0);
    Linear lin(3, 3, rng);
    lin.weight.value = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    lin.bias.value = {0, 0, 0};
    Cache c;
    EXPECT_EQ(lin.forward(Tensor({1, 3}, std::vector<double>{4, -5, 6}), Mode::eval, c).value,
              (std::vector<double>{4, -5, 6}));
}

TEST(Linear, GradCheckExact) {
    std::mt19937_64 rng(14);
    for (auto [b, in, out] : {std::tuple{1u, 3u, 2u}, {4u, 5u, 1u}, {2u, 8u, 6u}}) {
        Linear lin(in, out, rng);
        lin.bias = random_tensor({out}, rng);
        EXPECT_LT(layer_grad_error(lin, random_tensor({b, in}, rng), Mode::train, rng), 1e-7);
    }
}

TEST(ReLU, Forward) {
    ReLU relu;
    Cache c;
    EXPECT_EQ(relu.forward(Tensor({3}, std::vector<double>{-1, 0, 2}), Mode::eval, c).value,
              (std::vector<double>{0, 0, 2}));
}

TEST(ReLU, GradCheckAwayFromKink) {
    std::mt19937_64 rng(15);
    for (auto shape : {Shape{2, 3}, Shape{1, 2, 7}, Shape{4, 1, 3}}) {
        ReLU relu;
        EXPECT_LT(layer_grad_error(relu, away_from_zero(shape, rng, 1e-3), Mode::train, rng), kGradTol);
    }
}

TEST(Sigmoid, HalfAtZero) {
    Sigmoid s;
    Cache c;
    EXPECT_EQ(s.forward(Tensor({1}, std::vector<double>{0.0}), Mode::eval, c).value[0], 0.5);
}

TEST(Sigmoid, StrictlyInsideUnitInterval) {
    Sigmoid s;
    Cache c;
    for (double v : s.forward(Tensor({4}, std::vector<double>{-30, -5, 5, 30}), Mode::eval, c).value) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
    }
}

TEST(Sigmoid, GradCheck) {
    std::mt19937_64 rng(16);
    for (auto shape : {Shape{3}, Shape{2, 4}, Shape{2, 2, 3}}) {
        Sigmoid s;
        EXPECT_LT(layer_grad_error(s, random_tensor(shape, rng, -4.0, 4.0), Mode::train, rng), kGradTol);
    }
}

TEST(Flatten, ShapeAndGrad) {
    std::mt19937_64 rng(17);
    Flatten f;
    Cache c;
    const auto x = random_tensor({2, 3, 4}, rng);
    const auto y = f.forward(x, Mode::eval, c);
    EXPECT_EQ(y.shape, (Shape{2, 12}));
    EXPECT_EQ(f.backward(c, y).shape, x.shape);
    EXPECT_LT(layer_grad_error(f, x, Mode::train, rng), 1e-7);
}

TEST(Sequential, GradCheckConvStack) {
    std::mt19937_64 rng(18);
    Sequential net;
    net.layers.emplace_back(Conv1d(2, 3, 3, 2, 1, rng));
    net.layers.emplace_back(BatchNorm1d(3));
    net.layers.emplace_back(Sigmoid{});
    net.layers.emplace_back(ConvTranspose1d(3, 2, 3, 2, 1, 1, rng));
    net.layers.emplace_back(Flatten{});
    net.layers.emplace_back(Linear(16, 1, rng));
    net.layers.emplace_back(Sigmoid{});
    EXPECT_LT(layer_grad_error(net, random_tensor({3, 2, 8}, rng), Mode::train, rng), kGradTol);
}

TEST(Sequential, ParameterNamesAreStable) {
    std::mt19937_64 rng(19);
    Sequential net;
    net.layers.emplace_back(Conv1d(1, 2, 3, 1, 1, rng));
    net.layers.emplace_back(ReLU{});
    net.layers.emplace_back(BatchNorm1d(2));
    std::vector<NamedTensor> params, buffers;
    net.parameters("n.", params);
    net.buffers("n.", buffers);
    ASSERT_EQ(params.size(), 4u);
    EXPECT_EQ(params[0].name, "n.0.weight");
    EXPECT_EQ(params[3].name, "n.2.beta");
    ASSERT_EQ(buffers.size(), 2u);
    EXPECT_EQ(buffers[0].name, "n.2.running_mean");
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

TEST(BceLoss, HalfAgainstOne) {
    EXPECT_NEAR(bce_loss(Tensor({1}, std::vector<double>{0.5}), 1.0).value, std::log(2.0), 1e-12);
}

TEST(BceLoss, PerfectPredictionAtClampFloor) {
    const auto r = bce_loss(Tensor({2}, std::vector<double>{1.0, 0.0}), Tensor({2}, std::vector<double>{1.0, 0.0}));
    EXPECT_LE(r.value, 1e-6 * std::abs(std::log(kBceClamp)));
    EXPECT_TRUE(std::isfinite(r.value));
}

TEST(BceLoss, SaturatedWrongPredictionIsFinite) {
    const auto r = bce_loss(Tensor({1}, std::vector<double>{0.0}), 1.0);
    EXPECT_NEAR(r.value, -std::log(kBceClamp), 1e-9);
}

TEST(BceLoss, TargetOutOfRangeRejected) {
    EXPECT_THROW(bce_loss(Tensor({1}, std::vector<double>{0.5}), 1.5), ValidationError);
}

TEST(BceLoss, GradCheck) {
    std::mt19937_64 rng(20);
    for (auto shape : {Shape{1}, Shape{4, 1}, Shape{3, 5}}) {
        auto pred = random_tensor(shape, rng, 0.05, 0.95);
        const auto target = random_tensor(shape, rng, 0.0, 1.0);
        pred.grad = bce_loss(pred, target).grad.value;
        std::vector<Tensor*> ts{&pred};
        EXPECT_LT(grad_check([&] { return bce_loss(pred, target).value; }, ts), kGradTol);
    }
}

TEST(BceLoss, SigmoidCompositeGradCheck) {
    std::mt19937_64 rng(21);
    for (auto shape : {Shape{2, 1}, Shape{5, 1}, Shape{3, 4}}) {
        auto x = random_tensor(shape, rng, -3.0, 3.0);
        const auto target = random_tensor(shape, rng, 0.0, 1.0);
        Sigmoid s;
        Cache c;
        const auto p = s.forward(x, Mode::train, c);
        x.grad = s.backward(c, bce_loss(p, target).grad).value;
        std::vector<Tensor*> ts{&x};
        auto loss = [&] {
            Cache cc;
            return bce_loss(s.forward(x, Mode::train, cc), target).value;
        };
        EXPECT_LT(grad_check(loss, ts), kGradTol);
    }
}

TEST(MseLoss, Examples) {
    const Tensor p({2}, std::vector<double>{0.3, -1.0});
    EXPECT_EQ(mse_loss(p, p).value, 0.0);
    EXPECT_EQ(mse_loss(Tensor({2}, 0.0), Tensor({2}, 1.0)).value, 1.0);
}

TEST(MseLoss, GradientFormulaAndGradCheck) {
    std::mt19937_64 rng(22);
    for (auto shape : {Shape{3}, Shape{2, 4}, Shape{2, 2, 5}}) {
        auto pred = random_tensor(shape, rng);
        const auto target = random_tensor(shape, rng);
        const auto r = mse_loss(pred, target);
        const double n = static_cast<double>(pred.numel());
        for (std::size_t i = 0; i < pred.numel(); ++i)
            EXPECT_NEAR(r.grad.value[i], 2.0 * (pred.value[i] - target.value[i]) / n, 1e-15);
        pred.grad = r.grad.value;
        std::vector<Tensor*> ts{&pred};
        EXPECT_LT(grad_check([&] { return mse_loss(pred, target).value; }, ts), kGradTol);
    }
}

TEST(MseLoss, ShapeMismatchRejected) { EXPECT_THROW(mse_loss(Tensor({2}), Tensor({3})), ValidationError); }

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

TEST(Adam, FirstStepMovesByLearningRateTimesSign) {
    Tensor w({3}, std::vector<double>{1.0, 1.0, 1.0});
    w.grad = {0.5, -2.0, 1e-3};
    std::vector<NamedTensor> params{{"w", &w}};
    AdamState st(0.01);
    st.init(params);
    adam_step(params, st);
    EXPECT_NEAR(w.value[0], 1.0 - 0.01, 1e-9);
    EXPECT_NEAR(w.value[1], 1.0 + 0.01, 1e-9);
    EXPECT_NEAR(w.value[2], 1.0 - 0.01, 1e-7);
    EXPECT_EQ(st.t, 1u);
}

TEST(Adam, ZeroGradientLeavesParameters) {
    Tensor w({2}, std::vector<double>{0.3, -0.4});
    std::vector<NamedTensor> params{{"w", &w}};
    AdamState st(0.1);
    st.init(params);
    adam_step(params, st);
    EXPECT_EQ(w.value, (std::vector<double>{0.3, -0.4}));
    EXPECT_EQ(st.t, 1u);
}

TEST(Adam, ConvergesOnQuadratic) {
    Tensor w({1}, 0.0);
    std::vector<NamedTensor> params{{"w", &w}};
    AdamState st(0.1);
    st.init(params);
    std::size_t steps = 0;
    for (; steps < 5000 && std::abs(w.value[0] - 3.0) >= 1e-6; ++steps) {
        w.grad[0] = 2.0 * (w.value[0] - 3.0);
        adam_step(params, st);
    }
    EXPECT_LT(std::abs(w.value[0] - 3.0), 1e-6);
}

TEST(Adam, Deterministic) {
    auto run = [] {
        Tensor w({2}, std::vector<double>{0.1, 0.2});
        std::vector<NamedTensor> params{{"w", &w}};
        AdamState st(0.05);
        st.init(params);
        for (int i = 0; i < 50; ++i) {
            w.grad = {std::sin(w.value[0]), w.value[1] * w.value[0]};
            adam_step(params, st);
        }
        return w.value;
    };
    EXPECT_EQ(run(), run());
}

TEST(Adam, UninitializedStateRejected) {
    Tensor w({1});
    std::vector<NamedTensor> params{{"w", &w}};
    AdamState st(0.1);
    EXPECT_THROW(adam_step(params, st), ValidationError);
}

// ---------------------------------------------------------------------------
// Checkpoint
// ---------------------------------------------------------------------------

TEST(Checkpoint, RoundTripIsBitExact) {
    std::mt19937_64 rng(23);
    Checkpoint ck;
    ck.meta["epoch"] = "3";
    ck.tensors.emplace_back("a", random_tensor({2, 3}, rng, -1e10, 1e10));
    ck.tensors.emplace_back("b", Tensor({1}, std::vector<double>{0.1 + 0.2}));
    ck.tensors.emplace_back("c", Tensor({2}, std::vector<double>{5e-324, -0.0}));
    const auto back = parse_checkpoint(serialize_checkpoint(ck));
    EXPECT_EQ(back.require_meta("epoch"), "3");
    ASSERT_EQ(back.tensors.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(back.tensors[i].first, ck.tensors[i].first);
        EXPECT_EQ(back.tensors[i].second.shape, ck.tensors[i].second.shape);
        for (std::size_t j = 0; j < ck.tensors[i].second.numel(); ++j)
            EXPECT_EQ(std::bit_cast<std::uint64_t>(back.tensors[i].second.value[j]),
                      std::bit_cast<std::uint64_t>(ck.tensors[i].second.value[j]));
    }
}

TEST(Checkpoint, RestoreChecksShapes) {
    Checkpoint ck;
    ck.tensors.emplace_back("w", Tensor({2}, std::vector<double>{1, 2}));
    Tensor w({2}), wrong({3});
    std::vector<NamedTensor> ok{{"w", &w}}, bad{{"w", &wrong}}, missing{{"v", &w}};
    restore_tensors(ck, ok);
    EXPECT_EQ(w.value, (std::vector<double>{1, 2}));
    EXPECT_THROW(restore_tensors(ck, bad), ValidationError);
    EXPECT_THROW(restore_tensors(ck, missing), ValidationError);
}

TEST(Checkpoint, MalformedInputsRejected) {
    EXPECT_THROW(parse_checkpoint("nonsense"), ValidationError);
    EXPECT_THROW(parse_checkpoint("grlnet-checkpoint 99\nend\n"), ValidationError);
    EXPECT_THROW(parse_checkpoint("grlnet-checkpoint 1\ntensor w 1 2\n0x1p+0\n"), ValidationError);
    EXPECT_THROW(parse_checkpoint("grlnet-checkpoint 1\ntensor w 1 2\n0x1p+0 zz\nend\n"), ValidationError);
    EXPECT_THROW(parse_checkpoint("grlnet-checkpoint 1\nmeta k v\n"), ValidationError);
}
