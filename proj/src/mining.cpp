#include "lens/mining.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "lens/errors.hpp"
#include "lens/rng.hpp"

namespace lens {

std::string to_string(AnnotationStatus s) {
    switch (s) {
        case AnnotationStatus::original: return "original";
        case AnnotationStatus::mined: return "mined";
        case AnnotationStatus::uncertain: return "uncertain";
    }
    throw std::logic_error("bad AnnotationStatus");
}

AnnotationStatus annotation_status_from_string(const std::string& s) {
    if (s == "original") return AnnotationStatus::original;
    if (s == "mined") return AnnotationStatus::mined;
    if (s == "uncertain") return AnnotationStatus::uncertain;
    throw FormatError("unknown annotation status: " + s);
}

namespace {

// IoU of `box` against annotations living on `slice`, best match only.
double best_iou_on_slice(const Box2D& box, int slice, const std::vector<Annotation>& anns,
                         bool certain_only) {
    double best = 0;
    for (const auto& a : anns) {
        if (a.key_slice != slice) continue;
        if (certain_only && !a.certain()) continue;
        best = std::max(best, iou_2d(box, a.box));
    }
    return best;
}

const ScoredBox* member_on_slice(const Tracklet& t, int slice) {
    for (const auto& m : t.members)
        if (m.slice == slice) return &m;
    return nullptr;
}

double l2_distance(const std::vector<float>& a, const std::vector<float>& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("embedding dimension mismatch: " +
                                    std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()));
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = double(a[i]) - double(b[i]);
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace

std::vector<Annotation> propagate_cross_slice(const std::vector<Tracklet>& tracklets,
                                              const std::vector<Annotation>& annotations,
                                              double theta) {
    if (annotations.empty()) return {};
    for (const auto& a : annotations)
        if (a.volume_id != annotations.front().volume_id)
            throw std::invalid_argument("propagate_cross_slice: annotations span volumes");

    std::vector<Annotation> mined;
    for (const auto& t : tracklets) {
        // Find the annotation this tracklet explains: best key-slice IoU > theta.
        const Annotation* matched = nullptr;
        double best = theta;
        for (const auto& a : annotations) {
            if (!a.certain()) continue;
            const ScoredBox* m = member_on_slice(t, a.key_slice);
            if (!m) continue;
            double v = iou_2d(m->box, a.box);
            if (v > best) {
                best = v;
                matched = &a;
            }
        }
        if (!matched) continue;

        for (const auto& m : t.members) {
            if (m.slice == matched->key_slice) continue;
            if (best_iou_on_slice(m.box, m.slice, annotations, false) > theta) continue;
            bool dup = false;
            for (const auto& prev : mined)
                if (prev.key_slice == m.slice && iou_2d(prev.box, m.box) > theta) {
                    dup = true;
                    break;
                }
            if (dup) continue;
            Annotation out = *matched;
            out.key_slice = m.slice;
            out.box = m.box;
            out.status = AnnotationStatus::mined;
            out.embedding = m.embedding ? m.embedding : matched->embedding;
            mined.push_back(std::move(out));
        }
    }
    return mined;
}

std::vector<Annotation> match_intra_patient(const std::vector<Annotation>& annotations,
                                            const std::vector<VolumeTracklets>& tracklets,
                                            double delta, double theta) {
    std::vector<Annotation> mined;
    for (const auto& vt : tracklets) {
        for (const auto& t : vt.tracklets) {
            if (t.members.empty()) continue;
            const ScoredBox& top = t.top_member();
            if (!top.embedding) continue;

            // A tracklet that already explains a certain annotation in its own
            // volume needs no mining.
            bool covered = false;
            for (const auto& a : annotations) {
                if (!a.certain() || a.volume_id != vt.volume_id) continue;
                const ScoredBox* m = member_on_slice(t, a.key_slice);
                if (m && iou_2d(m->box, a.box) > theta) {
                    covered = true;
                    break;
                }
            }
            if (covered) continue;

            const Annotation* matched = nullptr;
            double best = delta;
            for (const auto& a : annotations) {
                if (!a.certain() || !a.embedding) continue;
                if (a.patient_id != vt.patient_id) continue;
                if (a.volume_id == vt.volume_id) continue;  // must be another study/series
                double d = l2_distance(*a.embedding, *top.embedding);
                if (d < best) {
                    best = d;
                    matched = &a;
                }
            }
            if (!matched) continue;

            for (const auto& m : t.members) {
                // Skip member boxes that would duplicate a certain annotation
                // already present in this volume, or an earlier mined box here.
                double dup_iou = 0;
                for (const auto& a : annotations)
                    if (a.certain() && a.volume_id == vt.volume_id && a.key_slice == m.slice)
                        dup_iou = std::max(dup_iou, iou_2d(a.box, m.box));
                if (dup_iou > theta) continue;
                bool dup = false;
                for (const auto& prev : mined)
                    if (prev.volume_id == vt.volume_id && prev.key_slice == m.slice &&
                        iou_2d(prev.box, m.box) > theta) {
                        dup = true;
                        break;
                    }
                if (dup) continue;

                Annotation out;
                out.lesion_id = matched->lesion_id;
                out.patient_id = vt.patient_id;
                out.study_id = vt.study_id;
                out.series_id = vt.series_id;
                out.volume_id = vt.volume_id;
                out.key_slice = m.slice;
                out.box = m.box;
                out.status = AnnotationStatus::mined;
                out.embedding = top.embedding;
                mined.push_back(std::move(out));
            }
        }
    }
    return mined;
}

std::vector<Annotation> mine_cross_dataset(const std::vector<ScoredBox>& single_type_proposals,
                                           const std::vector<Annotation>& known,
                                           const VolumeMeta& volume, double sigma,
                                           double exclusion_iou) {
    std::vector<size_t> order;
    for (size_t i = 0; i < single_type_proposals.size(); ++i)
        if (single_type_proposals[i].score > sigma) order.push_back(i);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return single_type_proposals[a].score > single_type_proposals[b].score;
    });

    std::vector<Annotation> uncertain;
    int counter = 0;
    for (size_t idx : order) {
        const ScoredBox& p = single_type_proposals[idx];
        if (best_iou_on_slice(p.box, p.slice, known, false) > exclusion_iou) continue;
        bool covered = false;
        for (const auto& u : uncertain)
            if (u.key_slice == p.slice && iou_2d(u.box, p.box) > exclusion_iou) {
                covered = true;
                break;
            }
        if (covered) continue;

        Annotation a;
        a.lesion_id = volume.volume_id + ":unc" + std::to_string(counter++);
        a.patient_id = volume.patient_id;
        a.study_id = volume.study_id;
        a.series_id = volume.series_id;
        a.volume_id = volume.volume_id;
        a.key_slice = p.slice;
        a.box = p.box;
        a.status = AnnotationStatus::uncertain;
        a.embedding = p.embedding;
        uncertain.push_back(std::move(a));
    }
    return uncertain;
}

int TrainingLabelSet::num_positive_slices() const {
    int n = 0;
    for (const auto& s : slices) n += s.positive ? 1 : 0;
    return n;
}

std::vector<TrainingLabelSet> assemble_training_set(const std::vector<Annotation>& original,
                                                    const std::vector<Annotation>& mined,
                                                    const std::vector<Annotation>& uncertain,
                                                    const std::vector<VolumeMeta>& volumes,
                                                    double pos_per_neg, uint64_t seed,
                                                    double dedup_iou, double exclusion_iou) {
    if (pos_per_neg <= 0) throw std::invalid_argument("pos_per_neg must be positive");
    std::map<std::string, size_t> vol_index;
    for (size_t i = 0; i < volumes.size(); ++i) vol_index[volumes[i].volume_id] = i;

    std::vector<std::vector<Annotation>> certain_by_vol(volumes.size());
    std::vector<std::vector<Annotation>> ignore_by_vol(volumes.size());

    auto locate = [&](const Annotation& a) {
        auto it = vol_index.find(a.volume_id);
        if (it == vol_index.end())
            throw ConfigError("annotation references unknown volume " + a.volume_id);
        return it->second;
    };

    for (const auto& a : original) certain_by_vol[locate(a)].push_back(a);
    for (const auto& a : mined) {
        size_t v = locate(a);
        bool dup = false;
        for (const auto& prev : certain_by_vol[v])
            if (prev.key_slice == a.key_slice && iou_2d(prev.box, a.box) > dedup_iou) {
                dup = true;
                break;
            }
        if (!dup) certain_by_vol[v].push_back(a);
    }
    for (const auto& a : uncertain) {
        size_t v = locate(a);
        bool excluded = false;
        for (const auto& c : certain_by_vol[v])
            if (c.key_slice == a.key_slice && iou_2d(c.box, a.box) > exclusion_iou) {
                excluded = true;
                break;
            }
        if (!excluded) ignore_by_vol[v].push_back(a);
    }

    std::vector<TrainingLabelSet> out;
    out.reserve(volumes.size());
    for (size_t v = 0; v < volumes.size(); ++v) {
        const VolumeMeta& meta = volumes[v];
        TrainingLabelSet ls;
        ls.volume_id = meta.volume_id;

        std::set<int> positive_slices;
        for (const auto& a : certain_by_vol[v]) positive_slices.insert(a.key_slice);

        std::vector<int> negative_pool;
        for (int s = 0; s < meta.num_slices; ++s)
            if (!positive_slices.count(s)) negative_pool.push_back(s);

        int num_pos = int(positive_slices.size());
        ls.negatives_requested = int(std::floor(num_pos / pos_per_neg));
        int take = std::min<int>(ls.negatives_requested, int(negative_pool.size()));
        Rng rng(derive_seed(seed, "assemble:" + meta.volume_id));
        std::vector<size_t> picks = rng.sample_without_replacement(negative_pool.size(), size_t(take));
        ls.negatives_taken = take;

        std::set<int> negative_slices;
        for (size_t p : picks) negative_slices.insert(negative_pool[p]);

        for (int s = 0; s < meta.num_slices; ++s) {
            bool pos = positive_slices.count(s) > 0;
            bool neg = negative_slices.count(s) > 0;
            if (!pos && !neg) continue;
            SliceLabels sl;
            sl.slice = s;
            sl.positive = pos;
            if (pos)
                for (const auto& a : certain_by_vol[v])
                    if (a.key_slice == s) sl.certain.push_back(a);
            for (const auto& a : ignore_by_vol[v])
                if (a.key_slice == s) sl.ignore.push_back(a);
            ls.slices.push_back(std::move(sl));
        }
        out.push_back(std::move(ls));
    }
    return out;
}

MiningReport mining_report(const std::vector<Annotation>& original,
                           const std::vector<Annotation>& mined,
                           const std::vector<Annotation>& uncertain) {
    MiningReport r;
    std::set<std::string> lesions;
    for (const auto& a : original)
        if (a.certain()) {
            lesions.insert(a.lesion_id);
            ++r.num_2d_gt;
        }
    for (const auto& a : mined)
        if (a.certain()) {
            lesions.insert(a.lesion_id);
            ++r.num_2d_gt;
        }
    r.num_3d_gt = int64_t(lesions.size());
    r.num_2d_uncertain = int64_t(uncertain.size());
    return r;
}

}  // namespace lens
