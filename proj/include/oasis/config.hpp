#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "oasis/posttrain.hpp"
#include "oasis/pretrain.hpp"
#include "oasis/stream.hpp"

namespace oasis {

enum class Arm { Ours, Base, OursNoRefine };

std::string_view to_string(Arm arm) noexcept;
Arm parse_arm(std::string_view name);

struct WorldConfig {
    int dim = 2;
    int num_classes = 5;
    int num_seen = 4;
    double radius = 4.0;
    double class_std = 1.0;
    /// Overrides the circle layout when nonempty (one row per class).
    std::vector<std::vector<double>> means;
    double imbalance = 10.0;
    int n_max = 1000;
    int horizon = 100;
    int batch_size = 200;
    double noise_max = 1.0;
    std::string target = "reversed"; // reversed | uniform | explicit
    std::vector<double> target_distribution;
    /// Optional D_0 from CSV instead of the synthetic long-tailed set.
    std::string pretrain_csv;
};

WorldSpec build_world(const WorldConfig& config);

enum class ResultFormat { Csv, Json };

struct ExperimentConfig {
    WorldConfig world;
    ModelSpec model;
    PretrainConfig pretrain;
    PostConfig post;
    /// Refit class statistics after every timestep on D_0 plus that
    /// timestep's pseudo-labeled samples. Off by default.
    bool refresh_stats = false;
    std::string gate_preset = "desk";
    GateThresholds gates;
    DetectThresholds detect;
    std::vector<ShiftKind> schedules;
    std::vector<Arm> arms;
    std::vector<std::uint64_t> seeds;
    std::string output_dir = "results";
    ResultFormat format = ResultFormat::Csv;
    ShiftOptions shift;
    /// When false, wall_ms is written as 0 so result files are bit-reproducible.
    bool record_wall_time = true;
};

/// Named gate presets: "desk", "cifar10-like", "cifar100-like", "tiny-imagenet-like".
GateThresholds gate_preset(std::string_view name);
std::vector<std::string> gate_preset_names();

DetectThresholds default_detect_thresholds();

ExperimentConfig default_config();

/// Every field is optional and defaults to default_config(); unknown keys are rejected.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& config);

void validate(const ExperimentConfig& config);

} // namespace oasis
