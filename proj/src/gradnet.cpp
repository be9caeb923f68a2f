#include "fsgen/gradnet.hpp"

#include <cmath>
#include <string>

#include "fsgen/errors.hpp"

namespace fsgen {

double activation_value(const Activation& act, double x) {
    switch (act.kind) {
        case Activation::Kind::Identity: return x;
        case Activation::Kind::ReLU: return x > 0.0 ? x : 0.0;
        case Activation::Kind::LeakyReLU: return x >= 0.0 ? x : act.slope * x;
    }
    return x;
}

double activation_slope_at(const Activation& act, double x) {
    switch (act.kind) {
        case Activation::Kind::Identity: return 1.0;
        case Activation::Kind::ReLU: return x >= 0.0 ? 1.0 : 0.0;
        case Activation::Kind::LeakyReLU: return x >= 0.0 ? 1.0 : act.slope;
    }
    return 1.0;
}

Vec activation_apply(const Activation& act, const Vec& x) {
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = activation_value(act, x[i]);
    return out;
}

void MlpSpec::validate() const {
    if (layer_dims.size() < 2) throw ContractError("MlpSpec: needs at least 2 layer dims");
    for (std::size_t d : layer_dims) {
        if (d < 1) throw ContractError("MlpSpec: all layer dims must be >= 1");
    }
}

std::size_t Mlp::parameter_count() const {
    std::size_t count = 0;
    for (const auto& layer : layers) count += layer.weights.data.size() + layer.bias.size();
    return count;
}

Mlp make_mlp(const MlpSpec& spec, Rng& rng) {
    spec.validate();
    Mlp net;
    net.spec = spec;
    net.layers.reserve(spec.layer_count());
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        const std::size_t in = spec.layer_dims[l];
        const std::size_t out = spec.layer_dims[l + 1];
        LinearLayer layer{Matrix(out, in), Vec(out, 0.0)};
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        for (double& w : layer.weights.data) w = (2.0 * rng.uniform() - 1.0) * bound;
        net.layers.push_back(std::move(layer));
    }
    return net;
}

namespace {

const Activation& layer_activation(const Mlp& net, std::size_t layer_index) {
    return layer_index + 1 == net.layers.size() ? net.spec.output : net.spec.hidden;
}

void check_layer_input(const Mlp& net, std::size_t layer_index, std::size_t got) {
    const std::size_t want = net.layers[layer_index].weights.cols;
    if (got != want) {
        throw ShapeError("mlp_forward: layer " + std::to_string(layer_index) + " expects input of dim " +
                         std::to_string(want) + ", got " + std::to_string(got));
    }
}

}  // namespace

Vec mlp_forward(const Mlp& net, std::span<const double> input) {
    Vec current(input.begin(), input.end());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        check_layer_input(net, l, current.size());
        const LinearLayer& layer = net.layers[l];
        Vec pre = matvec(layer.weights, current);
        for (std::size_t i = 0; i < pre.size(); ++i) pre[i] += layer.bias[i];
        const Activation& act = layer_activation(net, l);
        for (double& v : pre) v = activation_value(act, v);
        current = std::move(pre);
    }
    return current;
}

Vec mlp_forward(const Mlp& net, std::span<const double> input, ForwardCache& cache) {
    cache.input.assign(input.begin(), input.end());
    cache.pre.assign(net.layers.size(), {});
    cache.post.assign(net.layers.size(), {});
    std::span<const double> current = input;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        check_layer_input(net, l, current.size());
        const LinearLayer& layer = net.layers[l];
        Vec pre = matvec(layer.weights, current);
        for (std::size_t i = 0; i < pre.size(); ++i) pre[i] += layer.bias[i];
        const Activation& act = layer_activation(net, l);
        Vec post(pre.size());
        for (std::size_t i = 0; i < pre.size(); ++i) post[i] = activation_value(act, pre[i]);
        cache.pre[l] = std::move(pre);
        cache.post[l] = std::move(post);
        current = cache.post[l];
    }
    return cache.post.back();
}

GradBundle GradBundle::zeros_like(const Mlp& net) {
    GradBundle g;
    g.weight_grads.reserve(net.layers.size());
    g.bias_grads.reserve(net.layers.size());
    for (const auto& layer : net.layers) {
        g.weight_grads.emplace_back(layer.weights.rows, layer.weights.cols);
        g.bias_grads.emplace_back(layer.bias.size(), 0.0);
    }
    return g;
}

void GradBundle::scale(double s) {
    for (auto& m : weight_grads)
        for (double& v : m.data) v *= s;
    for (auto& b : bias_grads)
        for (double& v : b) v *= s;
}

void GradBundle::add(const GradBundle& other) {
    if (other.weight_grads.size() != weight_grads.size())
        throw ShapeError("GradBundle::add: layer count mismatch");
    for (std::size_t l = 0; l < weight_grads.size(); ++l) {
        if (!weight_grads[l].same_shape(other.weight_grads[l]) ||
            bias_grads[l].size() != other.bias_grads[l].size())
            throw ShapeError("GradBundle::add: shape mismatch at layer " + std::to_string(l));
        for (std::size_t i = 0; i < weight_grads[l].data.size(); ++i)
            weight_grads[l].data[i] += other.weight_grads[l].data[i];
        for (std::size_t i = 0; i < bias_grads[l].size(); ++i)
            bias_grads[l][i] += other.bias_grads[l][i];
    }
}

Vec mlp_backward(const Mlp& net, const ForwardCache& cache, std::span<const double> upstream_grad,
                 GradBundle& grads) {
    const std::size_t num_layers = net.layers.size();
    if (cache.pre.size() != num_layers || cache.post.size() != num_layers)
        throw ShapeError("mlp_backward: cache does not match network");
    if (grads.weight_grads.size() != num_layers)
        throw ShapeError("mlp_backward: grad bundle does not match network");
    if (upstream_grad.size() != net.output_dim())
        throw ShapeError("mlp_backward: upstream gradient has wrong dimension");

    Vec g_post(upstream_grad.begin(), upstream_grad.end());
    for (std::size_t l = num_layers; l-- > 0;) {
        const LinearLayer& layer = net.layers[l];
        const Activation& act = layer_activation(net, l);
        const Vec& pre = cache.pre[l];
        if (g_post.size() != pre.size())
            throw ShapeError("mlp_backward: gradient dim mismatch at layer " + std::to_string(l));

        Vec g_pre(pre.size());
        for (std::size_t i = 0; i < pre.size(); ++i)
            g_pre[i] = g_post[i] * activation_slope_at(act, pre[i]);

        const std::span<const double> layer_input =
            l == 0 ? std::span<const double>(cache.input) : std::span<const double>(cache.post[l - 1]);
        if (layer_input.size() != layer.weights.cols)
            throw ShapeError("mlp_backward: cached input dim mismatch at layer " + std::to_string(l));

        add_outer(grads.weight_grads[l], g_pre, layer_input);
        for (std::size_t i = 0; i < g_pre.size(); ++i) grads.bias_grads[l][i] += g_pre[i];

        g_post = matvec_transposed(layer.weights, g_pre);
    }
    return g_post;  // gradient w.r.t. the network input
}

AdamState AdamState::zeros_like(const Mlp& net) {
    AdamState s;
    for (const auto& layer : net.layers) {
        s.weight_m.emplace_back(layer.weights.rows, layer.weights.cols);
        s.weight_v.emplace_back(layer.weights.rows, layer.weights.cols);
        s.bias_m.emplace_back(layer.bias.size(), 0.0);
        s.bias_v.emplace_back(layer.bias.size(), 0.0);
    }
    return s;
}

namespace {

void adam_update_span(std::span<double> params, std::span<const double> grads, std::span<double> m,
                      std::span<double> v, const AdamState& state, double lr, double bc1, double bc2) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
        v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

}  // namespace

void adam_step(Mlp& net, const GradBundle& grads, AdamState& state, double lr) {
    if (!(lr > 0.0)) throw ContractError("adam_step: lr must be positive");
    if (grads.weight_grads.size() != net.layers.size() || state.weight_m.size() != net.layers.size())
        throw ShapeError("adam_step: shape mismatch");
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        if (!all_finite(grads.weight_grads[l].data) || !all_finite(grads.bias_grads[l]))
            throw NumericError("adam_step: non-finite gradient in layer " + std::to_string(l));
    }
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        adam_update_span(net.layers[l].weights.data, grads.weight_grads[l].data,
                         state.weight_m[l].data, state.weight_v[l].data, state, lr, bc1, bc2);
        adam_update_span(net.layers[l].bias, grads.bias_grads[l], state.bias_m[l], state.bias_v[l],
                         state, lr, bc1, bc2);
    }
}

namespace {

double central_difference(double& param, const std::function<double()>& loss, double h) {
    const double saved = param;
    param = saved + h;
    const double up = loss();
    param = saved - h;
    const double down = loss();
    param = saved;
    if (!std::isfinite(up) || !std::isfinite(down))
        throw NumericError("grad_check: loss returned a non-finite value");
    return (up - down) / (2.0 * h);
}

double relative_error(double analytic, double fd) {
    const double denom = std::abs(analytic) + std::abs(fd);
    return std::abs(analytic - fd) / (denom > 1e-12 ? denom : 1e-12);
}

}  // namespace

double grad_check(Mlp& net, const GradBundle& analytic, const std::function<double()>& loss,
                  double h) {
    if (!(h > 0.0)) throw ContractError("grad_check: h must be positive");
    double max_err = 0.0;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        for (std::size_t i = 0; i < net.layers[l].weights.data.size(); ++i) {
            const double fd = central_difference(net.layers[l].weights.data[i], loss, h);
            max_err = std::max(max_err, relative_error(analytic.weight_grads[l].data[i], fd));
        }
        for (std::size_t i = 0; i < net.layers[l].bias.size(); ++i) {
            const double fd = central_difference(net.layers[l].bias[i], loss, h);
            max_err = std::max(max_err, relative_error(analytic.bias_grads[l][i], fd));
        }
    }
    return max_err;
}

}  // namespace fsgen
