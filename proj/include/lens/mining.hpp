#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lens/ensemble.hpp"
#include "lens/geometry.hpp"
#include "lens/ingest.hpp"

namespace lens {

enum class AnnotationStatus { original, mined, uncertain };

std::string to_string(AnnotationStatus s);
AnnotationStatus annotation_status_from_string(const std::string& s);

/// A ground-truth lesion record. Original annotations come from the labeled
/// dataset; mined ones are recovered missing annotations treated as full
/// positives; uncertain ones are excluded from supervision entirely.
struct Annotation {
    std::string lesion_id;
    std::string patient_id;
    std::string study_id;
    std::string series_id;
    std::string volume_id;
    int key_slice = 0;
    Box2D box;
    AnnotationStatus status = AnnotationStatus::original;
    std::optional<std::vector<float>> embedding;

    bool certain() const { return status != AnnotationStatus::uncertain; }
};

/// Tracklets of one volume together with the lineage ids needed to compare
/// them against annotations from other volumes of the same patient.
struct VolumeTracklets {
    std::string volume_id;
    std::string patient_id;
    std::string study_id;
    std::string series_id;
    std::vector<Tracklet> tracklets;
};

/// Cross-slice box propagation: a tracklet whose member box on some
/// annotation's key slice overlaps that annotation with IoU > theta donates
/// all its other member boxes as mined annotations. Mined boxes that
/// duplicate an existing annotation (IoU > theta on the same slice) are
/// dropped. Tracklets and annotations must belong to the same volume.
std::vector<Annotation> propagate_cross_slice(const std::vector<Tracklet>& tracklets,
                                              const std::vector<Annotation>& annotations,
                                              double theta);

/// Intra-patient lesion matching: within each patient, a tracklet whose
/// embedding lies within L2 distance < delta of an annotation from a
/// different study or series becomes a mined lesion (one annotation per
/// member slice, carrying the matched lesion's id). A tracklet that already
/// overlaps an existing annotation in its own volume (same-slice IoU >
/// theta) is excluded; when several annotations match, the minimum-distance
/// pairing wins. Throws on embedding dimension mismatch.
std::vector<Annotation> match_intra_patient(const std::vector<Annotation>& annotations,
                                            const std::vector<VolumeTracklets>& tracklets,
                                            double delta, double theta);

/// Cross-dataset lesion mining: single-type expert proposals with score >
/// sigma that do not overlap any known certain annotation (same-slice IoU >
/// exclusion_iou) become uncertain annotations, to be ignored by the loss.
/// Proposals are considered in descending score; a candidate overlapping an
/// already-accepted uncertain box is skipped. All inputs share one volume.
std::vector<Annotation> mine_cross_dataset(const std::vector<ScoredBox>& single_type_proposals,
                                           const std::vector<Annotation>& known,
                                           const VolumeMeta& volume, double sigma,
                                           double exclusion_iou);

struct SliceLabels {
    int slice = 0;
    bool positive = false;
    std::vector<Annotation> certain;
    std::vector<Annotation> ignore;
};

/// Refined per-volume training labels: positive slices (those carrying a
/// certain box) plus sampled negative slices, each with its ignore boxes.
struct TrainingLabelSet {
    std::string volume_id;
    std::vector<SliceLabels> slices;
    int negatives_requested = 0;
    int negatives_taken = 0;

    int num_positive_slices() const;
};

/// Merge original/mined/uncertain annotations into per-volume label sets.
/// Positive slices are those with at least one certain box; negatives are
/// sampled per volume without replacement from the remaining slices at
/// positives/pos_per_neg (2:1 by default), deterministically from the seed.
/// Mined boxes duplicating an already-accepted certain box (IoU > dedup_iou
/// on the same slice) are dropped, as are uncertain boxes overlapping a
/// certain box above exclusion_iou. Shortfalls in negatives are reported via
/// negatives_requested/negatives_taken.
std::vector<TrainingLabelSet> assemble_training_set(const std::vector<Annotation>& original,
                                                    const std::vector<Annotation>& mined,
                                                    const std::vector<Annotation>& uncertain,
                                                    const std::vector<VolumeMeta>& volumes,
                                                    double pos_per_neg, uint64_t seed,
                                                    double dedup_iou = 0.5,
                                                    double exclusion_iou = 0.3);

struct MiningReport {
    int64_t num_3d_gt = 0;        // distinct certain lesion instances
    int64_t num_2d_gt = 0;        // certain 2D boxes
    int64_t num_2d_uncertain = 0;  // ignored 2D boxes
};

MiningReport mining_report(const std::vector<Annotation>& original,
                           const std::vector<Annotation>& mined,
                           const std::vector<Annotation>& uncertain);

}  // namespace lens
