#pragma once

#include <string>
#include <vector>

#include "lens/geometry.hpp"

namespace lens {

/// A chain of per-slice boxes linked across strictly consecutive slices
/// (one member per slice, ascending).
struct Tracklet {
    std::vector<ScoredBox> members;

    int z_min() const { return members.front().slice; }
    int z_max() const { return members.back().slice; }
    double max_score() const;
    /// Highest-scoring member (ties: earliest slice). Carries the embedding
    /// used for intra-patient matching.
    const ScoredBox& top_member() const;
};

/// A fused 3D proposal derived from one tracklet.
struct Proposal3D {
    Box3D box;
    double score = 0.0;
    std::vector<std::string> expert_ids;  // sorted, unique
    std::vector<ScoredBox> members;       // the source tracklet
    std::string volume_id;
};

/// Pool proposals from all dataset experts and run per-slice NMS over the
/// concatenation. Kept boxes retain their own expert provenance.
std::vector<ScoredBox> pool_and_nms(const std::vector<std::vector<ScoredBox>>& per_expert,
                                    double nms_iou);

/// Greedy mutual-best linking of boxes on consecutive slices: per slice pair,
/// candidate pairs with IoU > theta are linked in descending-IoU order, each
/// box on either side used at most once. Unlinked boxes become singleton
/// tracklets; every input box lands in exactly one tracklet.
std::vector<Tracklet> build_tracklets(const std::vector<ScoredBox>& boxes, double theta);

/// Score-weighted average of the member geometry; the z range is the member
/// slice range and the 3D score is the max member score.
Proposal3D stack_to_3d(const Tracklet& tracklet);
std::vector<Proposal3D> stack_to_3d(const std::vector<Tracklet>& tracklets);

}  // namespace lens
