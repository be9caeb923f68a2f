#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "fsgen/matrix.hpp"
#include "fsgen/rng.hpp"

namespace fsgen {

struct Activation {
    enum class Kind { Identity, ReLU, LeakyReLU };

    Kind kind = Kind::Identity;
    double slope = 0.2;  // negative-branch slope, LeakyReLU only

    static Activation identity() { return {Kind::Identity, 0.0}; }
    static Activation relu() { return {Kind::ReLU, 0.0}; }
    static Activation leaky_relu(double slope = 0.2) { return {Kind::LeakyReLU, slope}; }
};

double activation_value(const Activation& act, double x);
// Derivative at x; the kink at 0 uses the x >= 0 branch.
double activation_slope_at(const Activation& act, double x);
Vec activation_apply(const Activation& act, const Vec& x);

struct LinearLayer {
    Matrix weights;  // out_dim x in_dim
    Vec bias;        // out_dim
};

struct MlpSpec {
    std::vector<std::size_t> layer_dims;  // >= 2 entries, all >= 1
    Activation hidden = Activation::leaky_relu();
    Activation output = Activation::identity();

    std::size_t layer_count() const { return layer_dims.empty() ? 0 : layer_dims.size() - 1; }
    void validate() const;  // ContractError on bad dims
};

struct Mlp {
    MlpSpec spec;
    std::vector<LinearLayer> layers;

    std::size_t input_dim() const { return spec.layer_dims.front(); }
    std::size_t output_dim() const { return spec.layer_dims.back(); }
    std::size_t parameter_count() const;
};

// Weights uniform in [-1/sqrt(in_dim), +1/sqrt(in_dim)], biases zero.
Mlp make_mlp(const MlpSpec& spec, Rng& rng);

struct ForwardCache {
    Vec input;
    std::vector<Vec> pre;   // per-layer pre-activation
    std::vector<Vec> post;  // per-layer post-activation
};

Vec mlp_forward(const Mlp& net, std::span<const double> input);
Vec mlp_forward(const Mlp& net, std::span<const double> input, ForwardCache& cache);

struct GradBundle {
    std::vector<Matrix> weight_grads;
    std::vector<Vec> bias_grads;

    static GradBundle zeros_like(const Mlp& net);
    void scale(double s);
    void add(const GradBundle& other);
};

// Accumulates parameter gradients into `grads` and returns the gradient with
// respect to the input, enabling chained networks.
Vec mlp_backward(const Mlp& net, const ForwardCache& cache, std::span<const double> upstream_grad,
                 GradBundle& grads);

struct AdamState {
    std::vector<Matrix> weight_m, weight_v;
    std::vector<Vec> bias_m, bias_v;
    std::uint64_t step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState zeros_like(const Mlp& net);
};

// Standard Adam with bias correction; increments step_count by exactly one.
void adam_step(Mlp& net, const GradBundle& grads, AdamState& state, double lr);

// Max over parameters of |analytic - central_fd| / max(1e-12, |analytic| + |central_fd|).
// `loss` evaluates the scalar loss at the current parameter values of `net`;
// parameters are perturbed in place and restored.
double grad_check(Mlp& net, const GradBundle& analytic, const std::function<double()>& loss,
                  double h);

}  // namespace fsgen
