#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "lens/synth.hpp"

namespace lens {

/// Every tunable threshold of the pipeline. Defaults are the operating
/// points the method was validated with; all of them can be overridden from
/// the config document or command line.
struct Thresholds {
    double theta = 0.5;      // IoU: tracklet linking, key-slice matching, TP test
    double delta = 0.15;     // L2 embedding distance for intra-patient matching
    double sigma = 0.5;      // score floor for cross-dataset mining
    double theta_fp = 0.3;   // IoU ceiling for calling a proposal an FP
    double nms_iou = 0.5;    // pooled-proposal NMS
    double iobb = 0.3;       // 3D evaluation TP criterion
    double r_c = 0.2;        // center (positive) region scale
    double r_i = 0.5;        // ignore region scale
    double lambda1 = 0.1;    // size-loss weight
    double lambda2 = 10.0;   // box-regression weight
    double fp_per_tp = 2.0;  // FPR sample ratio (TP:FP = 1:2)
    double pos_per_neg = 2.0;  // training slice ratio (pos:neg = 2:1)
    std::vector<double> fp_points = {0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
};

struct DecodeParams {
    double stride = 4.0;
    double score_threshold = 0.5;
    int top_k = 100;
};

/// The stock expert lineup: one moderate universal detector plus one
/// high-sensitivity specialist per lesion type.
std::vector<ExpertProfile> default_experts();

struct PipelineConfig {
    PipelineConfig() { oracle.experts = default_experts(); }

    uint64_t seed = 1337;
    bool strict_froc = false;
    // Stand-in for retraining on the refined label set: the second simulation
    // pass raises every expert's sensitivity by boost * min(1, mined/original)
    // (capped at 1), so richer mined labels mean a better detector.
    double retrain_sensitivity_boost = 0.05;
    Thresholds thresholds;
    DecodeParams decode;
    CohortSpec cohort;
    OracleConfig oracle;
};

void validate(const PipelineConfig& config);

nlohmann::ordered_json to_json(const PipelineConfig& config);
PipelineConfig config_from_json(const nlohmann::ordered_json& j);

PipelineConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const PipelineConfig& config);

/// Provenance fingerprint embedded in every output file: FNV-1a over the
/// canonical serialized config, as 16 hex digits.
std::string config_hash(const PipelineConfig& config);

}  // namespace lens
