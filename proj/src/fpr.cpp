#include "lens/fpr.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lens/errors.hpp"
#include "lens/rng.hpp"

namespace lens {

std::string to_string(FprLabel l) { return l == FprLabel::tp ? "tp" : "fp"; }

FprLabel fpr_label_from_string(const std::string& s) {
    if (s == "tp") return FprLabel::tp;
    if (s == "fp") return FprLabel::fp;
    throw FormatError("unknown fpr label: " + s);
}

PatchSpec patch_from_proposal(const Proposal3D& p) {
    PatchSpec spec;
    spec.cx = p.box.cx;
    spec.cy = p.box.cy;
    spec.cz = 0.5 * (double(p.box.z_min) + double(p.box.z_max));
    spec.width = p.box.w;
    spec.height = p.box.h;
    spec.depth = double(p.box.depth());
    return spec;
}

namespace {

FprSample make_sample(const Proposal3D& p, FprLabel label, int ordinal) {
    FprSample s;
    s.volume_id = p.volume_id;
    s.label = label;
    s.patch = patch_from_proposal(p);
    s.proposal_score = p.score;
    s.source_id = p.volume_id + ":p3d:" + std::to_string(ordinal);
    return s;
}

}  // namespace

std::vector<FprSample> select_fpr_samples(const std::vector<Proposal3D>& proposals,
                                          const std::vector<Annotation>& annotations,
                                          double theta, double theta_fp, double fp_per_tp,
                                          uint64_t seed) {
    if (!(theta > 0 && theta < 1) || !(theta_fp > 0 && theta_fp < 1))
        throw std::invalid_argument("fpr thresholds must lie in (0,1)");
    if (!(theta_fp < theta))
        throw std::invalid_argument("theta_fp must be smaller than theta");
    if (fp_per_tp < 0) throw std::invalid_argument("fp_per_tp must be non-negative");

    std::vector<FprSample> tps;
    std::vector<FprSample> fps;
    for (size_t i = 0; i < proposals.size(); ++i) {
        const Proposal3D& p = proposals[i];

        // TP test: key-slice IoU against certain annotations (originals and
        // mined MAs alike).
        bool is_tp = false;
        for (const auto& a : annotations) {
            if (!a.certain()) continue;
            if (a.volume_id != p.volume_id) continue;
            for (const auto& m : p.members) {
                if (m.slice != a.key_slice) continue;
                if (iou_2d(m.box, a.box) > theta) {
                    is_tp = true;
                    break;
                }
            }
            if (is_tp) break;
        }
        if (is_tp) {
            tps.push_back(make_sample(p, FprLabel::tp, int(i)));
            continue;
        }

        // FP test: every member box must stay clear of every annotation,
        // uncertain lesions included — those proposals must not be taught as
        // negatives.
        double worst = 0;
        for (const auto& m : p.members)
            for (const auto& a : annotations) {
                if (a.volume_id != p.volume_id || a.key_slice != m.slice) continue;
                worst = std::max(worst, iou_2d(m.box, a.box));
            }
        if (worst < theta_fp) fps.push_back(make_sample(p, FprLabel::fp, int(i)));
        // Anything else sits in the ambiguous band (or rides an uncertain
        // lesion) and is discarded.
    }

    size_t fp_budget = size_t(std::floor(fp_per_tp * double(tps.size())));
    if (fps.size() > fp_budget) {
        Rng rng(derive_seed(seed, "fpr-downsample"));
        std::vector<size_t> keep = rng.sample_without_replacement(fps.size(), fp_budget);
        std::vector<FprSample> kept;
        kept.reserve(keep.size());
        for (size_t k : keep) kept.push_back(std::move(fps[k]));
        fps = std::move(kept);
    }

    std::vector<FprSample> out = std::move(tps);
    out.insert(out.end(), std::make_move_iterator(fps.begin()), std::make_move_iterator(fps.end()));
    return out;
}

double fuse_scores(double detector_score, double fpr_score) {
    if (!(detector_score >= 0 && detector_score <= 1))
        throw std::invalid_argument("detector score outside [0,1]");
    if (!(fpr_score >= 0 && fpr_score <= 1))
        throw std::invalid_argument("fpr score outside [0,1]");
    return 0.5 * (detector_score + fpr_score);
}

}  // namespace lens
