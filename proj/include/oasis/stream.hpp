#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oasis/batch.hpp"
#include "oasis/nn.hpp"
#include "oasis/rng.hpp"

namespace oasis {

using LabelDistribution = std::vector<double>;

enum class ShiftKind { Lin, Squ, Sin, Ber };

std::string_view to_string(ShiftKind kind) noexcept;
ShiftKind parse_shift_kind(std::string_view name);

/// Orientation switches for the two ambiguous readings of the shift model.
struct ShiftOptions {
    /// Weight alpha on omega_0 instead of omega_T.
    bool eq1_literal = false;
    /// Ber: flip with probability 1/sqrt(T) instead of keeping with it.
    bool ber_flip_prob_is_inv_sqrt_T = false;
};

/// Generator of the mixing coefficient alpha^t for t = 0..T.
class ShiftSchedule {
public:
    /// `seed` only drives the Ber kind; the whole trajectory is drawn up front.
    ShiftSchedule(ShiftKind kind, int horizon, std::uint64_t seed = 0, bool ber_flip_prob_is_inv_sqrt_T = false);

    ShiftKind kind() const noexcept { return kind_; }
    int horizon() const noexcept { return horizon_; }

    /// Always in [0, 1]; throws a range error outside 0..T.
    double alpha(int t) const;

    /// Squ toggles every ceil(sqrt(T)/2) steps.
    int square_interval() const noexcept;
    /// Per-step probability that Ber keeps its previous value.
    double ber_keep_probability() const noexcept;

private:
    ShiftKind kind_;
    int horizon_;
    bool ber_flip_reading_;
    std::vector<double> ber_values_;
};

/// Weight the mixture puts on omega_T for a given alpha.
double target_weight(double alpha, bool eq1_literal = false) noexcept;

/// Omega^t = (1 - w) omega_0 + w omega_T with w = target_weight(alpha).
LabelDistribution mixture_dist(std::span<const double> omega0, std::span<const double> omegaT, double alpha,
                               bool eq1_literal = false);

void validate_simplex(std::span<const double> dist, std::string_view what);

struct LongTailProfile {
    LabelDistribution distribution;
    std::vector<int> counts;
};

/// n_c = round(n_max * rho^(-c / (K - 1))) for class rank c = 0..K-1.
LongTailProfile make_longtailed(double imbalance, int num_seen, int n_max);

enum class TargetProfile { Reversed, Uniform, Explicit };

/// Synthetic open world. Labels 0..num_seen-1 are the seen classes C_0,
/// the remaining labels up to num_classes-1 are unseen.
struct WorldSpec {
    int dim = 2;
    int num_classes = 5;
    int num_seen = 4;
    std::vector<Vector> means;
    std::vector<Matrix> covariances;
    double imbalance = 10.0;
    int n_max = 1000;
    int horizon = 100;
    int batch_size = 200;
    double noise_max = 1.0;
    TargetProfile target = TargetProfile::Reversed;
    LabelDistribution explicit_target; // used when target == Explicit
};

/// Isotropic classes with means equally spaced on a circle in the first two coordinates.
WorldSpec make_circle_world(int dim, int num_classes, int num_seen, double radius, double class_std);

void validate(const WorldSpec& world);

/// omega_0 over C_all: the long-tailed profile on seen classes, zero on unseen ones.
LabelDistribution initial_distribution(const WorldSpec& world);

/// omega_T over C_all. Each unseen class receives the smallest seen-class share.
LabelDistribution target_distribution(const WorldSpec& world);

struct Dataset {
    std::vector<Vector> features;
    std::vector<int> labels;

    std::size_t size() const noexcept { return labels.size(); }
};

/// One draw from class `label` plus isotropic Gaussian noise of std `noise_std`.
Vector draw_sample(const WorldSpec& world, int label, double noise_std, Rng& rng);

/// Long-tailed labeled set D_0 in shuffled order, no corruption, seen classes only.
Dataset make_pretrain_set(const WorldSpec& world, Rng& rng);

struct BatchTruth {
    std::vector<int> labels;
    std::vector<bool> unseen;
};

struct LabeledBatch {
    TimestepBatch batch;
    BatchTruth truth;
    double alpha = 0.0;
    double noise_std = 0.0;
};

/// Batch for timestep t in [1, T]: labels i.i.d. from Omega^t, features from
/// the class generator plus noise of std target_weight(alpha) * noise_max.
LabeledBatch emit_batch(const WorldSpec& world, const ShiftSchedule& schedule, int t, Rng& rng,
                        ShiftOptions options = {});

/// Stream key for batch t under (seed, schedule kind); independent of arm.
Rng batch_rng(std::uint64_t seed, ShiftKind kind, int t);
/// Stream key for the Ber trajectory under (seed, schedule kind).
std::uint64_t schedule_seed(std::uint64_t seed, ShiftKind kind);

/// CSV rows: features..., label. No header.
Dataset read_dataset_csv(const std::string& path);
void write_dataset_csv(std::ostream& os, const Dataset& data);

/// CSV with header: t, x0..x{d-1}, truth_label, is_unseen.
void write_batch_csv(std::ostream& os, const LabeledBatch& batch);

} // namespace oasis
