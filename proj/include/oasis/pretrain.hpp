#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <variant>
#include <vector>

#include "oasis/class_stats.hpp"
#include "oasis/nn.hpp"
#include "oasis/rng.hpp"
#include "oasis/stream.hpp"

namespace oasis {

/// Layer layout of the classifier. The input and output widths come from the world.
struct ModelSpec {
    std::vector<int> hidden = {32, 8, 16};
    int latent_index = 2;
    int frozen_boundary = 2;

    std::vector<int> widths(int input_dim, int num_classes) const;
};

enum class OptimizerKind { Adam, Sgd };

struct PretrainConfig {
    double balance = 0.25;         // lambda
    double margin = 10.0;          // epsilon
    double learning_rate = 1e-4;
    int epochs = 100;              // Step I / Step II alternation rounds
    int warmup_epochs = 10;        // rounds before Step II starts
    double border_threshold = 2.0; // phi_border
    bool refine = true;
    OptimizerKind optimizer = OptimizerKind::Adam;
    Shrinkage shrinkage;
};

void validate(const PretrainConfig& config);

/// Normalized (1 - omega0(c)) over the seen classes.
LabelDistribution inverse_frequency_dist(std::span<const double> omega0);

/// Draws the second element of a Step I pair: a class from the inverse-frequency
/// distribution of D_0's label counts, then a uniform member of that class.
class PairSampler {
public:
    PairSampler(std::span<const int> labels, int num_classes);

    int draw_class(Rng& rng);
    std::size_t draw_partner(Rng& rng);

    const LabelDistribution& class_distribution() const noexcept { return target_; }
    const LabelDistribution& label_frequencies() const noexcept { return frequencies_; }

private:
    LabelDistribution frequencies_;
    LabelDistribution target_;
    std::vector<std::vector<std::size_t>> members_;
    std::discrete_distribution<int> class_dist_;
};

/// Same class: ||z_i - z_j||. Different class: max(0, margin - ||z_i - z_j||).
double contrastive_loss(const Vector& z_i, const Vector& z_j, int y_i, int y_j, double margin);

/// Gradient of contrastive_loss with respect to z_i (the z_j gradient is its negation).
/// Zero where the distance is zero or the hinge is inactive.
Vector contrastive_gradient(const Vector& z_i, const Vector& z_j, int y_i, int y_j, double margin);

struct PairLoss {
    double total = 0.0;
    double class_term = 0.0; // CE_i + CE_j
    double rep_term = 0.0;
};

/// balance * (CE_i + CE_j) + (1 - balance) * contrastive term on latents.
PairLoss pretrain_loss(const Model& model, const Vector& x_i, int y_i, const Vector& x_j, int y_j, double balance,
                       double margin);

/// pretrain_loss plus its gradient accumulated into `grads`.
PairLoss pretrain_loss_gradient(const Model& model, const Vector& x_i, int y_i, const Vector& x_j, int y_j,
                                double balance, double margin, ParameterSet& grads);

/// Either Adam or plain gradient descent behind one interface.
class Optimizer {
public:
    Optimizer(const Model& model, OptimizerKind kind, double learning_rate);
    void step(Model& model, const ParameterSet& grads, UpdateScope scope);

private:
    OptimizerKind kind_;
    double learning_rate_;
    std::variant<std::monostate, Adam> adam_;
};

struct EpochLog {
    int epoch = 0;
    double mean_loss = 0.0;
    double mean_class = 0.0;
    double mean_rep = 0.0;
    int n_borderline = 0;
};

/// Stateful pre-training loop: owns the model and the optimizer moments.
class Pretrainer {
public:
    Pretrainer(Model model, PretrainConfig config);

    /// Step I: one pass with i sequential over D_0 and j from the pair sampler.
    EpochLog step1_epoch(const Dataset& d0, PairSampler& sampler, Rng& rng);

    /// `count` extra Step I pair updates, i sequential from the start of D_0.
    void step1_updates(const Dataset& d0, PairSampler& sampler, Rng& rng, std::size_t count);

    /// Step II: pulls every borderline sample of each class toward that class's
    /// anchor. Returns the number of updates made.
    int step2_refine(const Dataset& d0, const ClassStats& stats);

    const Model& model() const noexcept { return model_; }
    Model& model() noexcept { return model_; }
    std::size_t updates() const noexcept { return updates_; }

private:
    void update_pair(const Vector& x_i, int y_i, const Vector& x_j, int y_j, PairLoss* out);

    Model model_;
    PretrainConfig config_;
    Optimizer optimizer_;
    std::size_t updates_ = 0;
};

std::vector<Vector> latents_of(const Model& model, std::span<const Vector> features);

ClassStats fit_model_stats(const Model& model, const Dataset& d0, int num_classes, Shrinkage shrinkage = {});

struct PretrainResult {
    Model model;
    ClassStats stats;
    std::vector<EpochLog> log;
    std::size_t updates = 0;
};

/// Alternates Step I and (fit_stats -> Step II) for `config.epochs` rounds,
/// then fits the final statistics. Deterministic in `seed`.
PretrainResult run_pretraining(const Dataset& d0, int num_classes, const ModelSpec& spec, const PretrainConfig& config,
                               std::uint64_t seed);

/// CSV with header: epoch,mean_L_pre,mean_L_class,mean_L_rep,n_borderline.
void write_epoch_log_csv(std::ostream& os, std::span<const EpochLog> log);

} // namespace oasis
