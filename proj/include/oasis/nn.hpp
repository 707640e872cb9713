#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "oasis/rng.hpp"

namespace oasis {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Softmax output over the seen classes.
using ProbVector = Eigen::VectorXd;

struct DenseLayer {
    Matrix weights; // out x in
    Vector bias;
};

/// Parameters and gradients share one layout.
using ParameterSet = std::vector<DenseLayer>;

enum class UpdateScope { All, LearnableOnly };

/// Activations recorded by a forward pass, consumed by backward().
struct ForwardTrace {
    std::vector<Vector> activations; // activations[0] = input, activations[L] = probabilities
};

/// Feed-forward classifier: tanh hidden layers and a softmax head.
///
/// Layers are numbered 1..L. The output of layer `latent_index` is the
/// representation used by the contrastive loss and the class statistics.
/// Layers numbered <= `frozen_boundary` form the frozen part f; the rest
/// form the learnable part l that post-training may touch.
class Model {
public:
    /// `widths` lists input width, hidden widths, output width.
    Model(std::vector<int> widths, int latent_index, int frozen_boundary);

    /// Glorot-uniform weights, zero biases.
    static Model initialized(std::vector<int> widths, int latent_index, int frozen_boundary, Rng& rng);

    int input_dim() const noexcept { return widths_.front(); }
    int output_dim() const noexcept { return widths_.back(); }
    int latent_dim() const noexcept { return widths_[static_cast<std::size_t>(latent_index_)]; }
    int depth() const noexcept { return static_cast<int>(layers_.size()); }
    int latent_index() const noexcept { return latent_index_; }
    int frozen_boundary() const noexcept { return frozen_boundary_; }
    const std::vector<int>& widths() const noexcept { return widths_; }

    /// Layer numbers are 1-based.
    bool is_frozen(int layer_number) const noexcept { return layer_number <= frozen_boundary_; }

    const ParameterSet& parameters() const noexcept { return layers_; }
    ParameterSet& parameters() noexcept { return layers_; }

    ProbVector forward(const Vector& x) const;
    Vector latent(const Vector& x) const;
    /// Applies layers latent_index+1..L to a latent vector.
    ProbVector head(const Vector& latent) const;

    ForwardTrace trace(const Vector& x) const;

    /// Accumulates parameter gradients into `grads`. `logit_grad` is dL/dlogits
    /// of the output layer, `latent_grad` is dL/d(latent activation); either may
    /// be null.
    void backward(const ForwardTrace& trace, const Vector* logit_grad, const Vector* latent_grad,
                  ParameterSet& grads) const;

    ParameterSet zero_gradients() const;

    bool operator==(const Model& other) const;

private:
    void check_input(const Vector& x) const;

    std::vector<int> widths_;
    int latent_index_;
    int frozen_boundary_;
    ParameterSet layers_;
};

/// Max-subtracted softmax.
ProbVector softmax(const Vector& logits);

/// Shannon entropy in nats, with 0 ln 0 = 0.
double entropy(const ProbVector& q);

inline constexpr double kLogClamp = 1e-12;

/// -ln q(y), q clamped below at 1e-12.
double cross_entropy(const ProbVector& q, int label);

/// Cross-entropy of forward(x) against `label`; adds its gradient to `grads`.
double class_loss_gradient(const Model& model, const Vector& x, int label, ParameterSet& grads);

/// Plain gradient step p <- p - lr * g on the parameters selected by `scope`.
void apply_gradient(Model& model, const ParameterSet& grads, double learning_rate, UpdateScope scope);

/// Adam with bias correction. Moment state exists for every layer but is
/// only advanced for layers the step actually updates.
class Adam {
public:
    struct Options {
        double learning_rate = 1e-4;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double epsilon = 1e-8;
    };

    Adam(const Model& model, Options options);

    void step(Model& model, const ParameterSet& grads, UpdateScope scope);

    const Options& options() const noexcept { return options_; }
    std::int64_t steps() const noexcept { return steps_; }

private:
    Options options_;
    ParameterSet first_;
    ParameterSet second_;
    std::int64_t steps_ = 0;
};

void check_same_shape(const ParameterSet& a, const ParameterSet& b);

std::size_t parameter_count(const ParameterSet& params);
std::vector<double> flatten(const ParameterSet& params);
void unflatten(std::span<const double> values, ParameterSet& params);

/// FNV-1a over the raw bytes of the frozen layers' parameters.
std::uint64_t frozen_checksum(const Model& model);
/// FNV-1a over every parameter.
std::uint64_t parameter_checksum(const Model& model);

} // namespace oasis
