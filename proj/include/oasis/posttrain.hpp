#pragma once

#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "oasis/batch.hpp"
#include "oasis/class_stats.hpp"
#include "oasis/nn.hpp"

namespace oasis {

/// Conditional-adaptation and pseudo-labeling thresholds.
struct GateThresholds {
    double entropy = 0.5; // phi_ent
    double cosine = 0.5;  // phi_cos
    double pred = 0.1;    // phi_pred
    double margin = 3.0;  // phi_MD, used for the Delta_MD test
};

/// Unseen-detection thresholds.
struct DetectThresholds {
    double entropy = 0.0;      // psi_pred
    double min_distance = 0.0; // psi_MD
    double margin = 0.0;       // psi_Delta_MD
};

void validate(const GateThresholds& gates);
void validate(const DetectThresholds& det);

struct ModelLabel {
    int label;
};
struct RepresentationLabel {
    int label;
};
struct Abstain {};

using PseudoLabel = std::variant<ModelLabel, RepresentationLabel, Abstain>;

/// The label carried by a pseudo-label, if any.
std::optional<int> label_of(const PseudoLabel& p);

struct Seen {
    int label;
};
struct Unseen {};

using Prediction = std::variant<Seen, Unseen>;

inline bool is_unseen(const Prediction& p) noexcept { return std::holds_alternative<Unseen>(p); }

/// Componentwise mean of forward() over the samples.
ProbVector mean_prediction(const Model& model, std::span<const Vector> samples);

double cosine_similarity(const ProbVector& a, const ProbVector& b);

/// h >= phi_ent and sim < phi_cos.
bool should_adapt(double entropy, double similarity, const GateThresholds& gates) noexcept;
std::vector<bool> should_adapt(std::span<const double> entropies, double similarity, const GateThresholds& gates);

/// Quantities the pseudo-labeling and detection rules are decided on.
struct SampleEvidence {
    ProbVector probabilities;
    double entropy = 0.0;
    MDSet distances;
    double min_distance = 0.0;
    double margin = 0.0;
    int predicted = 0; // argmax of probabilities
    int nearest = 0;   // argmin of distances
};

SampleEvidence evidence(const Model& model, const ClassStats& stats, const Vector& x);

PseudoLabel pseudo_label(const SampleEvidence& ev, const GateThresholds& gates) noexcept;
PseudoLabel pseudo_label(const Model& model, const ClassStats& stats, const Vector& x, const GateThresholds& gates);

/// One gradient step on the cross-entropy against the pseudo-label, learnable
/// layers only. Throws a contract violation for Abstain.
void adapt_step(Model& model, const Vector& x, const PseudoLabel& label, double learning_rate);

Prediction detect_and_predict(const SampleEvidence& ev, const DetectThresholds& det) noexcept;
Prediction detect_and_predict(const Model& model, const ClassStats& stats, const Vector& x,
                              const DetectThresholds& det);

struct PostConfig {
    double learning_rate = 0.003;
    /// Passes over the gated subset per timestep.
    int inner_passes = 1;
    /// False gives the base arm: gates permanently closed.
    bool adapt = true;
};

void validate(const PostConfig& config);

struct TimestepCounters {
    int n_gated = 0;
    int n_model_labels = 0;
    int n_rep_labels = 0;
    int n_abstain = 0;
    int n_unseen_flagged = 0;
    int n_updates = 0;
};

struct TimestepOutcome {
    double similarity = 0.0;
    std::vector<Prediction> predictions;
    /// Pseudo-label assigned in the first pass, per sample.
    std::vector<std::optional<int>> pseudo_labels;
    TimestepCounters counters;
};

/// Adapts `model` on the batch, then predicts every sample with the updated
/// model. `previous` is D_{t-1} (D_0's features at t = 1).
TimestepOutcome run_timestep(Model& model, const ClassStats& stats, const TimestepBatch& batch,
                             std::span<const Vector> previous, const GateThresholds& gates,
                             const DetectThresholds& det, const PostConfig& config);

} // namespace oasis
