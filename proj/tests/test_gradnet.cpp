#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "fsgen/errors.hpp"
#include "fsgen/gradnet.hpp"
#include "oracles.hpp"

using namespace fsgen;

namespace {

Mlp random_net(std::vector<std::size_t> dims, Activation hidden, Activation output,
               std::uint64_t seed) {
    MlpSpec spec;
    spec.layer_dims = std::move(dims);
    spec.hidden = hidden;
    spec.output = output;
    Rng rng(seed);
    return make_mlp(spec, rng);
}

Vec random_vec(std::size_t n, Rng& rng) {
    Vec v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

}  // namespace

TEST_CASE("activation values match their definitions") {
    CHECK(activation_apply(Activation::relu(), {-2.0, 3.5}) == Vec{0.0, 3.5});
    CHECK(activation_apply(Activation::leaky_relu(0.2), {-2.0})[0] == doctest::Approx(-0.4));
    CHECK(activation_apply(Activation::identity(), {1.0, -1.0}) == Vec{1.0, -1.0});
}

TEST_CASE("activation slope matches central differences away from the kink") {
    Rng rng(11);
    const double h = 1e-6;
    for (const Activation& act :
         {Activation::relu(), Activation::leaky_relu(0.2), Activation::identity()}) {
        for (int i = 0; i < 200; ++i) {
            double x = rng.normal();
            if (std::abs(x) <= 1e-3) x = x < 0 ? x - 1e-3 : x + 1e-3;
            const double fd =
                (activation_value(act, x + h) - activation_value(act, x - h)) / (2 * h);
            CHECK(activation_slope_at(act, x) == doctest::Approx(fd).epsilon(1e-6));
        }
    }
}

TEST_CASE("forward pass: all-zero parameters give zero output") {
    Mlp net = random_net({3, 4, 2}, Activation::leaky_relu(), Activation::relu(), 1);
    for (auto& layer : net.layers) {
        std::fill(layer.weights.data.begin(), layer.weights.data.end(), 0.0);
        std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
    }
    CHECK(mlp_forward(net, Vec{1.0, -2.0, 3.0}) == Vec{0.0, 0.0});
}

TEST_CASE("forward pass: single layer with ReLU output") {
    MlpSpec spec;
    spec.layer_dims = {1, 1};
    spec.output = Activation::relu();
    Rng rng(2);
    Mlp net = make_mlp(spec, rng);
    net.layers[0].weights(0, 0) = 2.0;
    net.layers[0].bias[0] = 1.0;
    CHECK(mlp_forward(net, Vec{3.0}) == Vec{7.0});
}

TEST_CASE("forward pass agrees with the naive loop oracle") {
    Rng rng(3);
    for (std::uint64_t seed : {10u, 11u, 12u}) {
        Mlp net = random_net({5, 9, 4}, Activation::leaky_relu(0.2), Activation::relu(), seed);
        const Vec input = random_vec(5, rng);
        const Vec got = mlp_forward(net, input);
        const Vec want = oracles::naive_forward(net, input);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i)
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
}

TEST_CASE("forward pass rejects a mismatched input, naming the layer") {
    Mlp net = random_net({3, 4, 2}, Activation::leaky_relu(), Activation::identity(), 4);
    CHECK_THROWS_WITH_AS(mlp_forward(net, Vec{1.0, 2.0}), doctest::Contains("layer 0"), ShapeError);
}

TEST_CASE("forward pass is affine-linear when all activations are Identity") {
    Mlp net = random_net({4, 6, 3}, Activation::identity(), Activation::identity(), 5);
    Rng rng(6);
    const Vec x = random_vec(4, rng);
    const double alpha = 2.75;
    Vec ax(4);
    for (std::size_t i = 0; i < 4; ++i) ax[i] = alpha * x[i];
    const Vec f_ax = mlp_forward(net, ax);
    const Vec f_x = mlp_forward(net, x);
    const Vec f_0 = mlp_forward(net, Vec(4, 0.0));
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(f_ax[i] == doctest::Approx(alpha * f_x[i] - (alpha - 1.0) * f_0[i]).epsilon(1e-10));
}

TEST_CASE("backward pass: zero upstream gradient gives zero gradients") {
    Mlp net = random_net({3, 5, 2}, Activation::leaky_relu(), Activation::relu(), 7);
    ForwardCache cache;
    Rng rng(8);
    mlp_forward(net, random_vec(3, rng), cache);
    GradBundle grads = GradBundle::zeros_like(net);
    const Vec input_grad = mlp_backward(net, cache, Vec(2, 0.0), grads);
    for (const auto& m : grads.weight_grads)
        for (double v : m.data) CHECK(v == 0.0);
    for (double v : input_grad) CHECK(v == 0.0);
}

TEST_CASE("backward pass: single linear layer has the analytic gradient") {
    MlpSpec spec;
    spec.layer_dims = {3, 2};
    spec.output = Activation::identity();
    Rng rng(9);
    Mlp net = make_mlp(spec, rng);
    const Vec input{0.5, -1.0, 2.0};
    const Vec upstream{2.0, -3.0};
    ForwardCache cache;
    mlp_forward(net, input, cache);
    GradBundle grads = GradBundle::zeros_like(net);
    mlp_backward(net, cache, upstream, grads);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(grads.bias_grads[0][i] == upstream[i]);
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(grads.weight_grads[0](i, j) == doctest::Approx(upstream[i] * input[j]));
    }
}

TEST_CASE("backward pass matches finite differences on random networks") {
    Rng data_rng(13);
    for (std::uint64_t seed : {21u, 22u, 23u}) {
        Mlp net = random_net({6, 17, 32, 3}, Activation::leaky_relu(0.2), Activation::relu(), seed);
        const Vec input = random_vec(6, data_rng);
        const Vec target = random_vec(3, data_rng);

        auto loss = [&] {
            const Vec out = mlp_forward(net, input);
            double sum = 0;
            for (std::size_t i = 0; i < out.size(); ++i)
                sum += 0.5 * (out[i] - target[i]) * (out[i] - target[i]);
            return sum;
        };
        ForwardCache cache;
        const Vec out = mlp_forward(net, input, cache);
        Vec upstream(out.size());
        for (std::size_t i = 0; i < out.size(); ++i) upstream[i] = out[i] - target[i];
        GradBundle grads = GradBundle::zeros_like(net);
        mlp_backward(net, cache, upstream, grads);

        CHECK(grad_check(net, grads, loss, 1e-5) < 1e-5);
    }
}

TEST_CASE("adam: zero gradients with a fresh state leave parameters unchanged") {
    Mlp net = random_net({2, 3}, Activation::identity(), Activation::identity(), 31);
    const Mlp before = net;
    AdamState state = AdamState::zeros_like(net);
    adam_step(net, GradBundle::zeros_like(net), state, 1e-3);
    CHECK(state.step_count == 1);
    for (std::size_t i = 0; i < net.layers[0].weights.data.size(); ++i)
        CHECK(net.layers[0].weights.data[i] == before.layers[0].weights.data[i]);
}

TEST_CASE("adam: first bias-corrected step moves by about lr") {
    MlpSpec spec;
    spec.layer_dims = {1, 1};
    Rng rng(32);
    Mlp net = make_mlp(spec, rng);
    const double w0 = net.layers[0].weights(0, 0);
    GradBundle grads = GradBundle::zeros_like(net);
    grads.weight_grads[0](0, 0) = 0.5;
    AdamState state = AdamState::zeros_like(net);
    adam_step(net, grads, state, 1e-4);
    CHECK(net.layers[0].weights(0, 0) == doctest::Approx(w0 - 1e-4).epsilon(1e-3));
}

TEST_CASE("adam matches the textbook recurrence while minimizing w^2") {
    MlpSpec spec;
    spec.layer_dims = {1, 1};
    Rng rng(33);
    Mlp net = make_mlp(spec, rng);
    net.layers[0].weights(0, 0) = 1.0;
    net.layers[0].bias[0] = 0.0;
    AdamState state = AdamState::zeros_like(net);
    oracles::ScalarAdam oracle;
    double w_oracle = 1.0;
    for (int step = 0; step < 200; ++step) {
        GradBundle grads = GradBundle::zeros_like(net);
        grads.weight_grads[0](0, 0) = 2.0 * net.layers[0].weights(0, 0);
        adam_step(net, grads, state, 0.05);
        w_oracle = oracle.step(w_oracle, 2.0 * w_oracle, 0.05);
        CHECK(net.layers[0].weights(0, 0) == doctest::Approx(w_oracle).epsilon(1e-12));
    }
    CHECK(std::abs(net.layers[0].weights(0, 0)) < 0.05);
}

TEST_CASE("adam is deterministic: identical inputs give bit-identical outputs") {
    auto run = [] {
        Mlp net = random_net({3, 4, 2}, Activation::leaky_relu(), Activation::relu(), 41);
        AdamState state = AdamState::zeros_like(net);
        Rng rng(42);
        for (int step = 0; step < 10; ++step) {
            GradBundle grads = GradBundle::zeros_like(net);
            for (auto& m : grads.weight_grads)
                for (double& v : m.data) v = rng.normal();
            for (auto& b : grads.bias_grads)
                for (double& v : b) v = rng.normal();
            adam_step(net, grads, state, 1e-3);
        }
        return net;
    };
    const Mlp a = run();
    const Mlp b = run();
    for (std::size_t l = 0; l < a.layers.size(); ++l)
        for (std::size_t i = 0; i < a.layers[l].weights.data.size(); ++i)
            CHECK(a.layers[l].weights.data[i] == b.layers[l].weights.data[i]);
}

TEST_CASE("adam rejects non-finite gradients, naming the layer") {
    Mlp net = random_net({2, 2, 1}, Activation::leaky_relu(), Activation::identity(), 51);
    AdamState state = AdamState::zeros_like(net);
    GradBundle grads = GradBundle::zeros_like(net);
    grads.weight_grads[1](0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(adam_step(net, grads, state, 1e-3), doctest::Contains("layer 1"),
                         NumericError);
}

TEST_CASE("grad_check: quadratic in one weight") {
    MlpSpec spec;
    spec.layer_dims = {1, 1};
    Rng rng(61);
    Mlp net = make_mlp(spec, rng);
    net.layers[0].weights(0, 0) = 3.0;
    auto loss = [&] {
        const double w = net.layers[0].weights(0, 0);
        return w * w;
    };
    GradBundle analytic = GradBundle::zeros_like(net);
    analytic.weight_grads[0](0, 0) = 6.0;
    CHECK(grad_check(net, analytic, loss, 1e-5) < 1e-9);
}

TEST_CASE("grad_check: constant loss reports zero error") {
    MlpSpec spec;
    spec.layer_dims = {2, 2};
    Rng rng(62);
    Mlp net = make_mlp(spec, rng);
    auto loss = [] { return 4.25; };
    const GradBundle analytic = GradBundle::zeros_like(net);
    CHECK(grad_check(net, analytic, loss, 1e-5) == 0.0);
}

TEST_CASE("spec validation rejects degenerate layer lists") {
    MlpSpec spec;
    spec.layer_dims = {4};
    CHECK_THROWS_AS(spec.validate(), ContractError);
    spec.layer_dims = {4, 0};
    CHECK_THROWS_AS(spec.validate(), ContractError);
}
