#include "oasis/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

#include "oasis/error.hpp"

namespace oasis {

std::vector<int> ModelSpec::widths(int input_dim, int num_classes) const
{
    std::vector<int> w;
    w.push_back(input_dim);
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(num_classes);
    return w;
}

void validate(const PretrainConfig& config)
{
    if (!(config.balance >= 0.0 && config.balance <= 1.0))
        fail(ErrorKind::Configuration, "balance (lambda) must lie in [0, 1]");
    if (!(config.margin >= 0.0))
        fail(ErrorKind::Configuration, "margin (epsilon) must be nonnegative");
    if (!(config.learning_rate >= 0.0))
        fail(ErrorKind::Configuration, "learning rate must be nonnegative");
    if (config.epochs < 0 || config.warmup_epochs < 0)
        fail(ErrorKind::Configuration, "epoch counts must be nonnegative");
    if (!(config.border_threshold >= 0.0))
        fail(ErrorKind::Configuration, "borderline threshold must be nonnegative");
}

LabelDistribution inverse_frequency_dist(std::span<const double> omega0)
{
    if (omega0.size() < 2)
        fail(ErrorKind::Degenerate, "inverse-frequency sampling needs at least two classes");
    validate_simplex(omega0, "omega_0");
    for (double p : omega0)
        if (!(p > 0.0))
            fail(ErrorKind::Validation, "every seen class needs positive probability");
    LabelDistribution out(omega0.size());
    double total = 0.0;
    for (std::size_t c = 0; c < omega0.size(); ++c) {
        out[c] = 1.0 - omega0[c];
        total += out[c];
    }
    for (double& p : out)
        p /= total;
    return out;
}

PairSampler::PairSampler(std::span<const int> labels, int num_classes)
    : members_(static_cast<std::size_t>(num_classes))
{
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y < 0 || y >= num_classes)
            fail(ErrorKind::InvalidLabel, "label " + std::to_string(y) + " outside the seen classes");
        members_[static_cast<std::size_t>(y)].push_back(i);
    }
    for (int c = 0; c < num_classes; ++c)
        if (members_[static_cast<std::size_t>(c)].empty())
            fail(ErrorKind::InsufficientData, "class " + std::to_string(c) + " has no samples in D_0");
    for (const auto& m : members_)
        frequencies_.push_back(static_cast<double>(m.size()) / static_cast<double>(labels.size()));
    target_ = inverse_frequency_dist(frequencies_);
    class_dist_ = std::discrete_distribution<int>(target_.begin(), target_.end());
}

int PairSampler::draw_class(Rng& rng)
{
    return class_dist_(rng);
}

std::size_t PairSampler::draw_partner(Rng& rng)
{
    const auto& m = members_[static_cast<std::size_t>(draw_class(rng))];
    std::uniform_int_distribution<std::size_t> pick(0, m.size() - 1);
    return m[pick(rng)];
}

double contrastive_loss(const Vector& z_i, const Vector& z_j, int y_i, int y_j, double margin)
{
    if (z_i.size() != z_j.size())
        fail(ErrorKind::Validation, "latent dimensions differ");
    const double d = (z_i - z_j).norm();
    return y_i == y_j ? d : std::max(0.0, margin - d);
}

Vector contrastive_gradient(const Vector& z_i, const Vector& z_j, int y_i, int y_j, double margin)
{
    const Vector diff = z_i - z_j;
    const double d = diff.norm();
    if (d == 0.0)
        return Vector::Zero(z_i.size());
    if (y_i == y_j)
        return diff / d;
    if (margin - d > 0.0)
        return -diff / d;
    return Vector::Zero(z_i.size());
}

PairLoss pretrain_loss(const Model& model, const Vector& x_i, int y_i, const Vector& x_j, int y_j, double balance,
                       double margin)
{
    const Vector z_i = model.latent(x_i);
    const Vector z_j = model.latent(x_j);
    PairLoss loss;
    loss.class_term = cross_entropy(model.head(z_i), y_i) + cross_entropy(model.head(z_j), y_j);
    loss.rep_term = contrastive_loss(z_i, z_j, y_i, y_j, margin);
    loss.total = balance * loss.class_term + (1.0 - balance) * loss.rep_term;
    return loss;
}

PairLoss pretrain_loss_gradient(const Model& model, const Vector& x_i, int y_i, const Vector& x_j, int y_j,
                                double balance, double margin, ParameterSet& grads)
{
    const ForwardTrace ti = model.trace(x_i);
    const ForwardTrace tj = model.trace(x_j);
    const auto li = static_cast<std::size_t>(model.latent_index());
    const Vector& z_i = ti.activations[li];
    const Vector& z_j = tj.activations[li];
    const ProbVector& q_i = ti.activations.back();
    const ProbVector& q_j = tj.activations.back();

    PairLoss loss;
    loss.class_term = cross_entropy(q_i, y_i) + cross_entropy(q_j, y_j);
    loss.rep_term = contrastive_loss(z_i, z_j, y_i, y_j, margin);
    loss.total = balance * loss.class_term + (1.0 - balance) * loss.rep_term;

    Vector dlogits_i = q_i;
    dlogits_i[y_i] -= 1.0;
    dlogits_i *= balance;
    Vector dlogits_j = q_j;
    dlogits_j[y_j] -= 1.0;
    dlogits_j *= balance;
    const Vector dz_i = (1.0 - balance) * contrastive_gradient(z_i, z_j, y_i, y_j, margin);
    const Vector dz_j = -dz_i;

    model.backward(ti, &dlogits_i, &dz_i, grads);
    model.backward(tj, &dlogits_j, &dz_j, grads);
    return loss;
}

Optimizer::Optimizer(const Model& model, OptimizerKind kind, double learning_rate)
    : kind_(kind), learning_rate_(learning_rate)
{
    if (kind_ == OptimizerKind::Adam)
        adam_.emplace<Adam>(model, Adam::Options{.learning_rate = learning_rate});
}

void Optimizer::step(Model& model, const ParameterSet& grads, UpdateScope scope)
{
    if (kind_ == OptimizerKind::Adam)
        std::get<Adam>(adam_).step(model, grads, scope);
    else
        apply_gradient(model, grads, learning_rate_, scope);
}

Pretrainer::Pretrainer(Model model, PretrainConfig config)
    : model_(std::move(model)), config_(config), optimizer_(model_, config.optimizer, config.learning_rate)
{
    validate(config_);
}

void Pretrainer::update_pair(const Vector& x_i, int y_i, const Vector& x_j, int y_j, PairLoss* out)
{
    ParameterSet grads = model_.zero_gradients();
    const PairLoss loss =
        pretrain_loss_gradient(model_, x_i, y_i, x_j, y_j, config_.balance, config_.margin, grads);
    optimizer_.step(model_, grads, UpdateScope::All);
    ++updates_;
    if (out)
        *out = loss;
}

EpochLog Pretrainer::step1_epoch(const Dataset& d0, PairSampler& sampler, Rng& rng)
{
    if (d0.size() == 0)
        fail(ErrorKind::InsufficientData, "D_0 is empty");
    EpochLog log;
    for (std::size_t i = 0; i < d0.size(); ++i) {
        const std::size_t j = sampler.draw_partner(rng);
        PairLoss loss;
        update_pair(d0.features[i], d0.labels[i], d0.features[j], d0.labels[j], &loss);
        log.mean_loss += loss.total;
        log.mean_class += loss.class_term;
        log.mean_rep += loss.rep_term;
    }
    const auto n = static_cast<double>(d0.size());
    log.mean_loss /= n;
    log.mean_class /= n;
    log.mean_rep /= n;
    return log;
}

void Pretrainer::step1_updates(const Dataset& d0, PairSampler& sampler, Rng& rng, std::size_t count)
{
    if (d0.size() == 0)
        fail(ErrorKind::InsufficientData, "D_0 is empty");
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t i = k % d0.size();
        const std::size_t j = sampler.draw_partner(rng);
        update_pair(d0.features[i], d0.labels[i], d0.features[j], d0.labels[j], nullptr);
    }
}

int Pretrainer::step2_refine(const Dataset& d0, const ClassStats& stats)
{
    const std::vector<Vector> latents = latents_of(model_, d0.features);
    int n_updates = 0;
    for (int c = 0; c < stats.num_classes(); ++c) {
        std::vector<std::size_t> members;
        std::vector<Vector> class_latents;
        for (std::size_t i = 0; i < d0.size(); ++i)
            if (d0.labels[i] == c) {
                members.push_back(i);
                class_latents.push_back(latents[i]);
            }
        if (members.empty())
            continue;
        const std::size_t anchor = select_anchor(stats, class_latents, c);
        const auto borderline = select_borderline(stats, class_latents, c, config_.border_threshold);
        const std::size_t a = members[anchor];
        for (std::size_t k : borderline) {
            if (k == anchor)
                continue;
            const std::size_t b = members[k];
            update_pair(d0.features[a], c, d0.features[b], c, nullptr);
            ++n_updates;
        }
    }
    return n_updates;
}

std::vector<Vector> latents_of(const Model& model, std::span<const Vector> features)
{
    std::vector<Vector> out;
    out.reserve(features.size());
    for (const auto& x : features)
        out.push_back(model.latent(x));
    return out;
}

ClassStats fit_model_stats(const Model& model, const Dataset& d0, int num_classes, Shrinkage shrinkage)
{
    const auto latents = latents_of(model, d0.features);
    return fit_stats(latents, d0.labels, num_classes, shrinkage);
}

PretrainResult run_pretraining(const Dataset& d0, int num_classes, const ModelSpec& spec, const PretrainConfig& config,
                               std::uint64_t seed)
{
    validate(config);
    if (d0.size() == 0)
        fail(ErrorKind::InsufficientData, "D_0 is empty");
    Rng init_rng(derive_seed(seed, {stream_key::init}));
    Rng pair_rng(derive_seed(seed, {stream_key::pair_sampler}));
    const int input_dim = static_cast<int>(d0.features.front().size());
    Model model = Model::initialized(spec.widths(input_dim, num_classes), spec.latent_index, spec.frozen_boundary,
                                     init_rng);

    PairSampler sampler(d0.labels, num_classes);
    Pretrainer trainer(std::move(model), config);
    PretrainResult result{.model = trainer.model(), .stats = {}, .log = {}, .updates = 0};
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        EpochLog log = trainer.step1_epoch(d0, sampler, pair_rng);
        log.epoch = epoch;
        if (config.refine && epoch > config.warmup_epochs) {
            const ClassStats stats = fit_model_stats(trainer.model(), d0, num_classes, config.shrinkage);
            log.n_borderline = trainer.step2_refine(d0, stats);
        }
        result.log.push_back(log);
    }
    result.model = trainer.model();
    result.updates = trainer.updates();
    result.stats = fit_model_stats(result.model, d0, num_classes, config.shrinkage);
    return result;
}

void write_epoch_log_csv(std::ostream& os, std::span<const EpochLog> log)
{
    const auto flags = os.flags();
    os << std::setprecision(17);
    os << "epoch,mean_L_pre,mean_L_class,mean_L_rep,n_borderline\n";
    for (const auto& e : log)
        os << e.epoch << ',' << e.mean_loss << ',' << e.mean_class << ',' << e.mean_rep << ',' << e.n_borderline
           << '\n';
    os.flags(flags);
}

} // namespace oasis
