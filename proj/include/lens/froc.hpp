#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lens/ensemble.hpp"
#include "lens/geometry.hpp"

namespace lens {

enum class MatchFlag { tp, fp, duplicate };

struct MatchedDetection {
    std::string volume_id;
    double score = 0;
    MatchFlag flag = MatchFlag::fp;
};

/// Greedy score-descending matching of one volume's 3D detections against
/// ground-truth 3D lesions. A detection is a TP when its best IoBB against a
/// still-unmatched truth exceeds iobb_threshold (the truth is then consumed);
/// a further hit on an already-matched truth is a duplicate, which counts as
/// neither TP nor FP — unless strict_duplicates, which demotes it to FP.
/// Ties in score break by ascending input index.
std::vector<MatchedDetection> match_volume(const std::vector<Proposal3D>& detections,
                                           const std::vector<Box3D>& truths,
                                           double iobb_threshold = 0.3,
                                           bool strict_duplicates = false);

struct FrocPoint {
    double fp_per_volume = 0;
    double sensitivity = 0;
};

struct FrocCurve {
    std::vector<FrocPoint> points;
    double average_sensitivity = 0;
    int64_t num_volumes = 0;
    int64_t num_truth = 0;
};

/// FROC over pooled per-volume match results. Detections are swept in
/// descending score with equal scores admitted atomically; the sensitivity
/// at each FP/volume operating point is the best sensitivity reached while
/// the FP rate stays at or below that point. Duplicates are inert here
/// (strict mode already re-labeled them). Throws EmptyInputError when
/// num_truth == 0 or num_volumes == 0.
FrocCurve froc(const std::vector<MatchedDetection>& detections, int64_t num_volumes,
               int64_t num_truth, const std::vector<double>& fp_points = {
                   0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0});

void write_froc_csv(const std::filesystem::path& path, const FrocCurve& curve,
                    const std::string& config_hash);
void write_froc_svg(const std::filesystem::path& path, const FrocCurve& curve);

}  // namespace lens
