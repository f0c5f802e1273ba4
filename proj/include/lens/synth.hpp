#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lens/afp.hpp"
#include "lens/ensemble.hpp"
#include "lens/geometry.hpp"
#include "lens/ingest.hpp"
#include "lens/mining.hpp"
#include "lens/rng.hpp"

namespace lens {

// Lesion types. "universal" lesions are seen only by the universal expert;
// the typed ones additionally fall in one specialist's profile.
inline constexpr const char* kLesionTypes[] = {"universal", "type_a", "type_b", "type_c"};

struct CohortSpec {
    int num_patients = 8;
    int studies_per_patient = 2;
    int series_per_study = 1;
    int min_slices = 40, max_slices = 64;
    int min_lesions_per_patient = 1, max_lesions_per_patient = 3;
    double min_radius_px = 8.0, max_radius_px = 20.0;  // in-plane semi-axes
    double min_radius_slices = 2.0, max_radius_slices = 5.0;  // axial semi-axis
    int image_width = 512, image_height = 512;
    double pixel_spacing_mm = 0.8;
    double slice_interval_mm = 2.0;
    // Probability of each lesion type, order matching kLesionTypes.
    std::vector<double> type_probs = {0.4, 0.2, 0.2, 0.2};
    // 1.0 reproduces key-slice-only (RECIST-style) labels; 0.0 annotates
    // every slice the lesion spans.
    double non_key_slice_hide_rate = 1.0;
    // Each lesion keeps one anchor volume annotated; its instances in the
    // patient's other volumes are hidden independently at this rate.
    double cross_study_hide_rate = 0.0;
    // Fraction of lesions never annotated anywhere (restricted to typed
    // lesions when full_hide_specialty_only, so they stay minable).
    double full_hide_rate = 0.0;
    bool full_hide_specialty_only = true;
    double cross_study_jitter_px = 0.5;  // geometry wobble between studies
    int embed_dim = 32;
    double sigma_e = 0.03;  // total embedding noise magnitude
};

enum class Visibility { annotated, hidden };

struct SliceBoxRef {
    int slice = 0;
    Box2D box;
};

/// One lesion's footprint in one volume. Identity (lesion_id, embedding) is
/// shared across all volumes of the patient; geometry matches up to the
/// configured cross-study jitter.
struct LesionInstance {
    std::string lesion_id;
    std::string lesion_type;
    int key_slice = 0;
    std::vector<SliceBoxRef> slices;
    std::vector<float> embedding;  // clean planted identity, unit norm
    Visibility visibility = Visibility::annotated;
    // Slices carrying a visible annotation; empty when hidden. Always
    // contains key_slice when visible; other slices survive the per-slice
    // hide draw.
    std::vector<int> annotated_slices;
};

struct VolumeTruth {
    VolumeMeta meta;
    int image_width = 0, image_height = 0;
    std::vector<LesionInstance> instances;
};

struct SyntheticCohort {
    CohortSpec spec;
    std::vector<VolumeTruth> volumes;
};

void validate(const CohortSpec& spec);

/// Deterministic cohort synthesis. Lesions are ellipsoids realized as
/// per-slice axis-aligned boxes: on the slice at axial offset dz from the
/// center, the in-plane box is the full-size box scaled by
/// max(0.7, sqrt(1 - (dz/rz)^2)), emitted for |dz| <= 0.8*rz. Lesions of one
/// patient are rejection-placed so their boxes never overlap. Throws
/// ConfigError when the spec is infeasible or inconsistent.
SyntheticCohort generate_cohort(const CohortSpec& spec, uint64_t seed);

/// The visible (partial) annotations of the cohort, embeddings attached,
/// ordered by volume then lesion then slice.
std::vector<Annotation> visible_annotations(const SyntheticCohort& cohort, uint64_t seed);

/// Full-truth 3D boxes of one volume (hidden lesions included), for
/// evaluation only.
std::vector<Box3D> truth_boxes_3d(const VolumeTruth& volume);

struct ExpertProfile {
    std::string expert_id;
    std::string specialty = "universal";  // "universal" covers every type
    double sensitivity = 0.9;             // per lesion-slice emission prob
    double off_specialty_sensitivity = 0.0;
    double jitter_px = 0.0;  // gaussian sigma on box center and size
    double fp_per_slice = 0.05;  // poisson mean of spurious boxes
    double tp_score_min = 0.7, tp_score_max = 0.99;
    double fp_score_min = 0.05, fp_score_max = 0.45;
};

struct OracleConfig {
    std::vector<ExpertProfile> experts;
    double sigma_e = 0.03;
    int embed_dim = 32;
    double fp_box_min_px = 10.0, fp_box_max_px = 36.0;
};

void validate(const OracleConfig& config);

/// Simulated detector branch: walks every lesion-slice of the volume and
/// emits a jittered scored box with the expert's per-type sensitivity, then
/// adds Poisson false positives per slice. TP boxes carry the lesion
/// embedding plus noise (renormalized); FP boxes carry random unit
/// embeddings. Deterministic in (volume, expert, seed).
std::vector<ScoredBox> simulate_expert(const VolumeTruth& volume, const ExpertProfile& expert,
                                       const OracleConfig& config, uint64_t seed);

struct DenseMaps {
    int width = 0, height = 0;
    std::vector<float> centerness;  // width*height
    std::vector<float> regression;  // width*height*4, (l,r,t,b) per pixel
};

/// Perfect-prediction maps for the decode round-trip: centerness 1 and exact
/// border distances at every pixel assign_targets labels positive, zero
/// elsewhere (ignored pixels included, so uncertain boxes decode to nothing).
DenseMaps simulate_dense_maps(const GtSlice& slice, int map_width, int map_height,
                              double stride, double r_c = 0.2, double r_i = 0.5);

struct SliceTransform {
    double ratio = 1.0;
    double shift_x = 0.0, shift_y = 0.0;
};

/// Training-time augmentation: resize ratio in [0.8, 1.2] and shifts in
/// [-8, 8] px, applied to the image frame and all boxes consistently.
SliceTransform sample_augmentation(Rng& rng);
Box2D apply_transform(const Box2D& box, const SliceTransform& t);
GtSlice augment_slice(const GtSlice& slice, const SliceTransform& t);

/// Stand-in for the trained FPR classifier: proposals overlapping any truth
/// lesion (IoBB > threshold) score around 0.9, the rest around 0.1, with a
/// little seeded noise, clamped to [0,1].
std::vector<double> oracle_fpr_scores(const std::vector<Proposal3D>& proposals,
                                      const VolumeTruth& volume, double iobb_threshold,
                                      uint64_t seed);

}  // namespace lens
