#include "oasis/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "oasis/error.hpp"

namespace oasis {

namespace {

void validate_topology(const std::vector<int>& widths, int latent_index, int frozen_boundary)
{
    if (widths.size() < 4)
        fail(ErrorKind::Configuration, "model needs at least three layers so that 1 < latent_index < L");
    for (int w : widths)
        if (w <= 0)
            fail(ErrorKind::Configuration, "layer widths must be positive");
    const int depth = static_cast<int>(widths.size()) - 1;
    if (latent_index <= 1 || latent_index >= depth)
        fail(ErrorKind::Configuration,
             "latent_index must satisfy 1 < latent_index < " + std::to_string(depth) + ", got " +
                 std::to_string(latent_index));
    if (frozen_boundary < 0 || frozen_boundary > depth)
        fail(ErrorKind::Configuration, "frozen_boundary must lie in [0, " + std::to_string(depth) + "]");
}

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv_mix(std::uint64_t& h, const double* data, std::size_t n)
{
    for (std::size_t i = 0; i < n; ++i) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, data + i, sizeof(double));
        for (unsigned char b : bytes) {
            h ^= b;
            h *= kFnvPrime;
        }
    }
}

} // namespace

Model::Model(std::vector<int> widths, int latent_index, int frozen_boundary)
    : widths_(std::move(widths)), latent_index_(latent_index), frozen_boundary_(frozen_boundary)
{
    validate_topology(widths_, latent_index_, frozen_boundary_);
    layers_.reserve(widths_.size() - 1);
    for (std::size_t l = 1; l < widths_.size(); ++l)
        layers_.push_back({Matrix::Zero(widths_[l], widths_[l - 1]), Vector::Zero(widths_[l])});
}

Model Model::initialized(std::vector<int> widths, int latent_index, int frozen_boundary, Rng& rng)
{
    Model model(std::move(widths), latent_index, frozen_boundary);
    for (auto& layer : model.layers_) {
        const double limit = std::sqrt(6.0 / static_cast<double>(layer.weights.rows() + layer.weights.cols()));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
            for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
                layer.weights(r, c) = dist(rng);
    }
    return model;
}

void Model::check_input(const Vector& x) const
{
    if (x.size() != input_dim())
        fail(ErrorKind::Configuration, "input has dimension " + std::to_string(x.size()) + ", model expects " +
                                           std::to_string(input_dim()));
}

ForwardTrace Model::trace(const Vector& x) const
{
    check_input(x);
    ForwardTrace t;
    t.activations.reserve(layers_.size() + 1);
    t.activations.push_back(x);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Vector z = layers_[l].weights * t.activations.back() + layers_[l].bias;
        if (l + 1 == layers_.size())
            t.activations.push_back(softmax(z));
        else
            t.activations.push_back(z.array().tanh().matrix());
    }
    return t;
}

ProbVector Model::forward(const Vector& x) const
{
    return head(latent(x));
}

Vector Model::latent(const Vector& x) const
{
    check_input(x);
    Vector a = x;
    for (int l = 0; l < latent_index_; ++l)
        a = (layers_[static_cast<std::size_t>(l)].weights * a + layers_[static_cast<std::size_t>(l)].bias)
                .array()
                .tanh()
                .matrix();
    return a;
}

ProbVector Model::head(const Vector& latent) const
{
    if (latent.size() != latent_dim())
        fail(ErrorKind::Configuration, "latent vector has wrong dimension");
    Vector a = latent;
    for (std::size_t l = static_cast<std::size_t>(latent_index_); l < layers_.size(); ++l) {
        Vector z = layers_[l].weights * a + layers_[l].bias;
        if (l + 1 == layers_.size())
            return softmax(z);
        a = z.array().tanh().matrix();
    }
    return a; // unreachable: latent_index < depth
}

void Model::backward(const ForwardTrace& trace, const Vector* logit_grad, const Vector* latent_grad,
                     ParameterSet& grads) const
{
    check_same_shape(layers_, grads);
    const int depth = this->depth();
    // delta holds dL/dz for the layer currently being visited.
    Vector delta;
    int top = depth;
    if (logit_grad) {
        if (logit_grad->size() != output_dim())
            fail(ErrorKind::Configuration, "logit gradient has wrong dimension");
        delta = *logit_grad;
    } else if (latent_grad) {
        top = latent_index_;
        const Vector& a = trace.activations[static_cast<std::size_t>(latent_index_)];
        delta = latent_grad->cwiseProduct((1.0 - a.array().square()).matrix());
    } else {
        return;
    }

    for (int l = top; l >= 1; --l) {
        const auto idx = static_cast<std::size_t>(l - 1);
        const Vector& input = trace.activations[idx];
        grads[idx].weights.noalias() += delta * input.transpose();
        grads[idx].bias += delta;
        if (l == 1)
            break;
        Vector g = layers_[idx].weights.transpose() * delta;
        if (l - 1 == latent_index_ && latent_grad && logit_grad)
            g += *latent_grad;
        delta = g.cwiseProduct((1.0 - input.array().square()).matrix());
    }
}

ParameterSet Model::zero_gradients() const
{
    ParameterSet g;
    g.reserve(layers_.size());
    for (const auto& layer : layers_)
        g.push_back({Matrix::Zero(layer.weights.rows(), layer.weights.cols()), Vector::Zero(layer.bias.size())});
    return g;
}

bool Model::operator==(const Model& other) const
{
    if (widths_ != other.widths_ || latent_index_ != other.latent_index_ ||
        frozen_boundary_ != other.frozen_boundary_)
        return false;
    for (std::size_t l = 0; l < layers_.size(); ++l)
        if (layers_[l].weights != other.layers_[l].weights || layers_[l].bias != other.layers_[l].bias)
            return false;
    return true;
}

ProbVector softmax(const Vector& logits)
{
    const double m = logits.maxCoeff();
    Vector e = (logits.array() - m).exp().matrix();
    return e / e.sum();
}

double entropy(const ProbVector& q)
{
    double h = 0.0;
    for (Eigen::Index c = 0; c < q.size(); ++c)
        if (q[c] > 0.0)
            h -= q[c] * std::log(q[c]);
    return std::max(h, 0.0);
}

double cross_entropy(const ProbVector& q, int label)
{
    if (label < 0 || label >= q.size())
        fail(ErrorKind::InvalidLabel, "label " + std::to_string(label) + " is not a seen class");
    return -std::log(std::max(q[label], kLogClamp));
}

double class_loss_gradient(const Model& model, const Vector& x, int label, ParameterSet& grads)
{
    const ForwardTrace t = model.trace(x);
    const ProbVector& q = t.activations.back();
    const double loss = cross_entropy(q, label);
    Vector dlogits = q;
    dlogits[label] -= 1.0;
    model.backward(t, &dlogits, nullptr, grads);
    return loss;
}

void check_same_shape(const ParameterSet& a, const ParameterSet& b)
{
    bool ok = a.size() == b.size();
    for (std::size_t l = 0; ok && l < a.size(); ++l)
        ok = a[l].weights.rows() == b[l].weights.rows() && a[l].weights.cols() == b[l].weights.cols() &&
             a[l].bias.size() == b[l].bias.size();
    if (!ok)
        fail(ErrorKind::Configuration, "gradient shape does not match model parameters");
}

void apply_gradient(Model& model, const ParameterSet& grads, double learning_rate, UpdateScope scope)
{
    auto& params = model.parameters();
    check_same_shape(params, grads);
    for (std::size_t l = 0; l < params.size(); ++l) {
        if (scope == UpdateScope::LearnableOnly && model.is_frozen(static_cast<int>(l) + 1))
            continue;
        params[l].weights -= learning_rate * grads[l].weights;
        params[l].bias -= learning_rate * grads[l].bias;
    }
}

Adam::Adam(const Model& model, Options options)
    : options_(options), first_(model.zero_gradients()), second_(model.zero_gradients())
{
}

void Adam::step(Model& model, const ParameterSet& grads, UpdateScope scope)
{
    auto& params = model.parameters();
    check_same_shape(params, grads);
    check_same_shape(params, first_);
    ++steps_;
    const double b1 = options_.beta1;
    const double b2 = options_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    const double lr = options_.learning_rate;
    const double eps = options_.epsilon;

    auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
        p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };

    for (std::size_t l = 0; l < params.size(); ++l) {
        if (scope == UpdateScope::LearnableOnly && model.is_frozen(static_cast<int>(l) + 1))
            continue;
        update(params[l].weights, first_[l].weights, second_[l].weights, grads[l].weights);
        update(params[l].bias, first_[l].bias, second_[l].bias, grads[l].bias);
    }
}

std::size_t parameter_count(const ParameterSet& params)
{
    std::size_t n = 0;
    for (const auto& layer : params)
        n += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
    return n;
}

std::vector<double> flatten(const ParameterSet& params)
{
    std::vector<double> out;
    out.reserve(parameter_count(params));
    for (const auto& layer : params) {
        out.insert(out.end(), layer.weights.data(), layer.weights.data() + layer.weights.size());
        out.insert(out.end(), layer.bias.data(), layer.bias.data() + layer.bias.size());
    }
    return out;
}

void unflatten(std::span<const double> values, ParameterSet& params)
{
    if (values.size() != parameter_count(params))
        fail(ErrorKind::Configuration, "flat parameter vector has wrong length");
    std::size_t pos = 0;
    for (auto& layer : params) {
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), layer.weights.size(), layer.weights.data());
        pos += static_cast<std::size_t>(layer.weights.size());
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), layer.bias.size(), layer.bias.data());
        pos += static_cast<std::size_t>(layer.bias.size());
    }
}

std::uint64_t frozen_checksum(const Model& model)
{
    std::uint64_t h = kFnvOffset;
    const auto& params = model.parameters();
    for (std::size_t l = 0; l < params.size(); ++l) {
        if (!model.is_frozen(static_cast<int>(l) + 1))
            continue;
        fnv_mix(h, params[l].weights.data(), static_cast<std::size_t>(params[l].weights.size()));
        fnv_mix(h, params[l].bias.data(), static_cast<std::size_t>(params[l].bias.size()));
    }
    return h;
}

std::uint64_t parameter_checksum(const Model& model)
{
    std::uint64_t h = kFnvOffset;
    for (const auto& layer : model.parameters()) {
        fnv_mix(h, layer.weights.data(), static_cast<std::size_t>(layer.weights.size()));
        fnv_mix(h, layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
    }
    return h;
}

} // namespace oasis
