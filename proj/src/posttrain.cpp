#include "oasis/posttrain.hpp"

#include <cmath>
#include <string>

#include "oasis/error.hpp"

namespace oasis {

void validate(const GateThresholds& gates)
{
    if (!(gates.entropy >= 0.0 && gates.pred >= 0.0 && gates.margin >= 0.0))
        fail(ErrorKind::Configuration, "gate thresholds must be nonnegative");
    if (!(gates.cosine >= -1.0 && gates.cosine <= 1.0))
        fail(ErrorKind::Configuration, "cosine gate must lie in [-1, 1]");
}

void validate(const DetectThresholds& det)
{
    if (!(det.entropy >= 0.0 && det.min_distance >= 0.0 && det.margin >= 0.0))
        fail(ErrorKind::Configuration, "detection thresholds must be nonnegative");
}

void validate(const PostConfig& config)
{
    if (!(config.learning_rate >= 0.0))
        fail(ErrorKind::Configuration, "post-training learning rate must be nonnegative");
    if (config.inner_passes < 1)
        fail(ErrorKind::Configuration, "inner_passes must be at least 1");
}

std::optional<int> label_of(const PseudoLabel& p)
{
    if (const auto* m = std::get_if<ModelLabel>(&p))
        return m->label;
    if (const auto* r = std::get_if<RepresentationLabel>(&p))
        return r->label;
    return std::nullopt;
}

ProbVector mean_prediction(const Model& model, std::span<const Vector> samples)
{
    if (samples.empty())
        fail(ErrorKind::Validation, "mean prediction over an empty batch");
    ProbVector sum = ProbVector::Zero(model.output_dim());
    for (const auto& x : samples)
        sum += model.forward(x);
    return sum / static_cast<double>(samples.size());
}

double cosine_similarity(const ProbVector& a, const ProbVector& b)
{
    if (a.size() != b.size())
        fail(ErrorKind::Validation, "cosine similarity of vectors with different lengths");
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0)
        fail(ErrorKind::Degenerate, "cosine similarity of a zero vector");
    return a.dot(b) / (na * nb);
}

bool should_adapt(double entropy, double similarity, const GateThresholds& gates) noexcept
{
    return entropy >= gates.entropy && similarity < gates.cosine;
}

std::vector<bool> should_adapt(std::span<const double> entropies, double similarity, const GateThresholds& gates)
{
    std::vector<bool> out;
    out.reserve(entropies.size());
    for (double h : entropies)
        out.push_back(should_adapt(h, similarity, gates));
    return out;
}

SampleEvidence evidence(const Model& model, const ClassStats& stats, const Vector& x)
{
    SampleEvidence ev;
    const Vector z = model.latent(x);
    ev.probabilities = model.head(z);
    ev.entropy = entropy(ev.probabilities);
    ev.probabilities.maxCoeff(&ev.predicted);
    ev.distances = md_set(stats, z);
    ev.nearest = nearest_class(ev.distances);
    ev.min_distance = ev.distances[static_cast<std::size_t>(ev.nearest)];
    ev.margin = md_margin(ev.distances);
    return ev;
}

PseudoLabel pseudo_label(const SampleEvidence& ev, const GateThresholds& gates) noexcept
{
    if (ev.entropy < gates.pred)
        return ModelLabel{ev.predicted};
    if (ev.margin >= gates.margin)
        return RepresentationLabel{ev.nearest};
    return Abstain{};
}

PseudoLabel pseudo_label(const Model& model, const ClassStats& stats, const Vector& x, const GateThresholds& gates)
{
    return pseudo_label(evidence(model, stats, x), gates);
}

void adapt_step(Model& model, const Vector& x, const PseudoLabel& label, double learning_rate)
{
    const auto y = label_of(label);
    if (!y)
        fail(ErrorKind::Contract, "adapt_step called with an abstained pseudo-label");
    ParameterSet grads = model.zero_gradients();
    class_loss_gradient(model, x, *y, grads);
    apply_gradient(model, grads, learning_rate, UpdateScope::LearnableOnly);
}

Prediction detect_and_predict(const SampleEvidence& ev, const DetectThresholds& det) noexcept
{
    if (ev.entropy > det.entropy && ev.min_distance > det.min_distance && ev.margin < det.margin)
        return Unseen{};
    return Seen{ev.predicted};
}

Prediction detect_and_predict(const Model& model, const ClassStats& stats, const Vector& x,
                              const DetectThresholds& det)
{
    return detect_and_predict(evidence(model, stats, x), det);
}

TimestepOutcome run_timestep(Model& model, const ClassStats& stats, const TimestepBatch& batch,
                             std::span<const Vector> previous, const GateThresholds& gates,
                             const DetectThresholds& det, const PostConfig& config)
{
    validate(config);
    const auto samples = batch.samples();
    TimestepOutcome out;
    out.pseudo_labels.assign(samples.size(), std::nullopt);

    if (config.adapt && !samples.empty()) {
        out.similarity = cosine_similarity(mean_prediction(model, samples), mean_prediction(model, previous));
        std::vector<std::size_t> gated;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const SampleEvidence ev = evidence(model, stats, samples[i]);
            if (!should_adapt(ev.entropy, out.similarity, gates))
                continue;
            gated.push_back(i);
            ++out.counters.n_gated;
            const PseudoLabel label = pseudo_label(ev, gates);
            if (std::holds_alternative<ModelLabel>(label))
                ++out.counters.n_model_labels;
            else if (std::holds_alternative<RepresentationLabel>(label))
                ++out.counters.n_rep_labels;
            else
                ++out.counters.n_abstain;
            out.pseudo_labels[i] = label_of(label);
            if (out.pseudo_labels[i]) {
                adapt_step(model, samples[i], label, config.learning_rate);
                ++out.counters.n_updates;
            }
        }
        for (int pass = 1; pass < config.inner_passes; ++pass)
            for (std::size_t i : gated) {
                const PseudoLabel label = pseudo_label(model, stats, samples[i], gates);
                if (label_of(label)) {
                    adapt_step(model, samples[i], label, config.learning_rate);
                    ++out.counters.n_updates;
                }
            }
    } else if (!samples.empty() && !previous.empty()) {
        out.similarity = cosine_similarity(mean_prediction(model, samples), mean_prediction(model, previous));
    }

    out.predictions.reserve(samples.size());
    for (const auto& x : samples) {
        out.predictions.push_back(detect_and_predict(model, stats, x, det));
        if (is_unseen(out.predictions.back()))
            ++out.counters.n_unseen_flagged;
    }
    return out;
}

} // namespace oasis
