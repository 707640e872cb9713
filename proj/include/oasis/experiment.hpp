#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "oasis/config.hpp"
#include "oasis/posttrain.hpp"
#include "oasis/pretrain.hpp"
#include "oasis/stream.hpp"

namespace oasis {

struct BatchScore {
    std::optional<double> seen_accuracy;
    std::optional<double> unseen_precision;
    std::optional<double> unseen_recall;
    int n_seen = 0;
    int n_seen_correct = 0;
    int n_unseen = 0;
    int n_true_flags = 0;
    int n_false_flags = 0;
};

/// Seen accuracy over seen-truth samples (an Unseen prediction counts as wrong);
/// precision and recall of the Unseen flag. Undefined ratios are empty.
BatchScore score_batch(std::span<const Prediction> predictions, const BatchTruth& truth);

struct TimestepLog {
    int t = 0;
    double alpha = 0.0;
    double sim = 0.0;
    TimestepCounters counters;
    BatchScore score;
    int n_contaminated = 0; // pseudo-labels given to unseen-truth samples
    double wall_ms = 0.0;

    bool operator==(const TimestepLog& o) const;
};

struct MetricsRecord {
    Arm arm = Arm::Ours;
    ShiftKind schedule = ShiftKind::Lin;
    std::uint64_t seed = 0;
    std::vector<TimestepLog> logs;
    std::optional<double> mean_seen_accuracy;
    std::optional<double> unseen_f1;
    double adaptation_rate = 0.0;
    double pseudo_label_contamination = 0.0;
    double pretrain_intra_class_distance = 0.0;
    double runtime_ms = 0.0;

    bool operator==(const MetricsRecord& o) const;
};

/// Recomputes the aggregate fields from the per-timestep logs.
void aggregate(MetricsRecord& record);

/// D_0 plus the pre-trained models a seed needs.
struct SeedContext {
    std::uint64_t seed = 0;
    WorldSpec world;
    Dataset d0;
    std::optional<PretrainResult> refined;
    std::optional<PretrainResult> plain;
};

SeedContext prepare_seed(const ExperimentConfig& config, std::uint64_t seed, bool need_refined, bool need_plain);

/// Post-training state carried across timesteps.
struct PostState {
    Model model;
    ClassStats stats;
};

/// Runs timesteps [t_begin, t_end] of one (arm, schedule) stream, mutating `state`.
/// Restarting at t_begin from a saved state reproduces an uninterrupted run.
std::vector<TimestepLog> run_post_training(const ExperimentConfig& config, const SeedContext& ctx, Arm arm,
                                           ShiftKind schedule, PostState& state, int t_begin, int t_end);

MetricsRecord run_arm(const ExperimentConfig& config, const SeedContext& ctx, Arm arm, ShiftKind schedule);

/// Every (arm, schedule, seed) combination, ordered seed-major.
std::vector<MetricsRecord> run_experiment(const ExperimentConfig& config);

struct SummaryRow {
    Arm arm;
    ShiftKind schedule;
    double mean_acc = 0.0;
    double std_acc = 0.0;
    std::optional<double> unseen_f1;
    double adapt_rate = 0.0;
};

std::vector<SummaryRow> summarize(std::span<const MetricsRecord> records);

std::string record_stem(const MetricsRecord& record);

/// Writes one per-timestep file per record plus summary.{csv,json} into `dir`.
/// Returns the written paths.
std::vector<std::string> emit_results(std::span<const MetricsRecord> records, const std::string& dir,
                                      ResultFormat format);

nlohmann::json to_json(const MetricsRecord& record);
MetricsRecord record_from_json(const nlohmann::json& j);
MetricsRecord read_record_json(const std::string& path);

/// Reads a per-timestep CSV back into logs (header checked).
std::vector<TimestepLog> read_timestep_csv(const std::string& path);

} // namespace oasis
