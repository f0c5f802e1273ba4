#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lens/ensemble.hpp"
#include "lens/mining.hpp"

namespace lens {

enum class FprLabel { tp, fp };

std::string to_string(FprLabel l);
FprLabel fpr_label_from_string(const std::string& s);

/// 3D crop description handed to the false-positive-reduction classifier:
/// center plus extent in normalized voxel units.
struct PatchSpec {
    double cx = 0, cy = 0, cz = 0;
    double width = 0, height = 0, depth = 0;
};

struct FprSample {
    std::string volume_id;
    FprLabel label = FprLabel::fp;
    PatchSpec patch;
    double proposal_score = 0;
    std::string source_id;  // provenance: proposal identity within the volume
};

PatchSpec patch_from_proposal(const Proposal3D& p);

/// Select training samples for the FPR stage from one volume's 3D proposals.
/// TP: key-slice IoU > theta with some certain annotation. FP: every member
/// slice's best IoU against all annotations (uncertain included) stays below
/// theta_fp. Proposals between the two bands, or whose best overlap is with
/// an uncertain box, are discarded. FPs are then downsampled without
/// replacement to floor(fp_per_tp * #TP) deterministically from the seed.
std::vector<FprSample> select_fpr_samples(const std::vector<Proposal3D>& proposals,
                                          const std::vector<Annotation>& annotations,
                                          double theta, double theta_fp, double fp_per_tp,
                                          uint64_t seed);

/// Final detection confidence: plain average of detector and FPR scores.
/// Throws std::invalid_argument unless both scores lie in [0,1].
double fuse_scores(double detector_score, double fpr_score);

}  // namespace lens
