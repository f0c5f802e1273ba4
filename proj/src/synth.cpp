#include "lens/synth.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <stdexcept>

#include "lens/errors.hpp"

namespace lens {

namespace {

constexpr double kSliceScaleFloor = 0.7;   // in-plane shrink limit at lesion ends
constexpr double kAxialExtentRatio = 0.8;  // slices emitted for |dz| <= ratio*rz
constexpr double kPlacementMarginPx = 8.0;

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

void check_prob(double p, const std::string& name) {
    require(p >= 0 && p <= 1, name + " must lie in [0,1]");
}

std::string pad2(int v) { return (v < 10 ? "0" : "") + std::to_string(v); }

std::vector<float> one_hot(int dim, int index) {
    std::vector<float> e(static_cast<size_t>(dim), 0.0f);
    e[size_t(index % dim)] = 1.0f;
    return e;
}

std::vector<float> noisy_unit(const std::vector<float>& identity, double sigma_e, Rng& rng) {
    std::vector<float> e = identity;
    const double per_dim = sigma_e / std::sqrt(double(e.size()));
    double norm2 = 0;
    for (auto& v : e) {
        v += float(rng.normal(0.0, per_dim));
        norm2 += double(v) * double(v);
    }
    double norm = std::sqrt(norm2);
    if (norm <= 0) return identity;
    for (auto& v : e) v = float(double(v) / norm);
    return e;
}

std::vector<float> random_unit(int dim, Rng& rng) {
    std::vector<float> e(static_cast<size_t>(dim));
    double norm2 = 0;
    for (auto& v : e) {
        v = float(rng.normal(0.0, 1.0));
        norm2 += double(v) * double(v);
    }
    double norm = std::sqrt(norm2);
    if (norm <= 0) {
        e.assign(size_t(dim), 0.0f);
        e[0] = 1.0f;
        return e;
    }
    for (auto& v : e) v = float(double(v) / norm);
    return e;
}

struct LesionSeed {
    std::string lesion_id;
    std::string type;
    double cx, cy, rx, ry, rz;
    int key_slice;
    std::vector<float> embedding;
    bool full_hide;
    int anchor_volume;
};

}  // namespace

void validate(const CohortSpec& s) {
    require(s.num_patients >= 1, "num_patients must be >= 1");
    require(s.studies_per_patient >= 1 && s.series_per_study >= 1,
            "studies/series counts must be >= 1");
    require(s.min_slices >= 4 && s.min_slices <= s.max_slices, "bad slice count range");
    require(s.min_lesions_per_patient >= 0 &&
                s.min_lesions_per_patient <= s.max_lesions_per_patient,
            "bad lesions-per-patient range");
    require(s.min_radius_px > 0 && s.min_radius_px <= s.max_radius_px, "bad radius range");
    require(s.min_radius_slices > 0 && s.min_radius_slices <= s.max_radius_slices,
            "bad axial radius range");
    require(s.image_width > 0 && s.image_height > 0, "bad image size");
    require(s.pixel_spacing_mm > 0 && s.slice_interval_mm > 0, "bad spacing");
    require(s.type_probs.size() == std::size(kLesionTypes),
            "type_probs must list one probability per lesion type");
    double sum = 0;
    for (double p : s.type_probs) {
        require(p >= 0, "type_probs must be non-negative");
        sum += p;
    }
    require(sum > 0, "type_probs must not all be zero");
    check_prob(s.non_key_slice_hide_rate, "non_key_slice_hide_rate");
    check_prob(s.cross_study_hide_rate, "cross_study_hide_rate");
    check_prob(s.full_hide_rate, "full_hide_rate");
    require(s.cross_study_jitter_px >= 0, "cross_study_jitter_px must be >= 0");
    require(s.embed_dim >= 1, "embed_dim must be >= 1");
    require(s.sigma_e >= 0, "sigma_e must be >= 0");
    // A max-size lesion must fit inside the image and the shortest volume.
    require(2 * s.max_radius_px + 2 * kPlacementMarginPx < s.image_width &&
                2 * s.max_radius_px + 2 * kPlacementMarginPx < s.image_height,
            "cohort spec infeasible: lesions larger than the image");
    require(2 * std::ceil(kAxialExtentRatio * s.max_radius_slices) + 4 <= s.min_slices,
            "cohort spec infeasible: lesions longer than the volumes");
}

namespace {

std::string pick_type(const CohortSpec& s, Rng& rng) {
    double sum = 0;
    for (double p : s.type_probs) sum += p;
    double u = rng.uniform01() * sum;
    double acc = 0;
    for (size_t i = 0; i < s.type_probs.size(); ++i) {
        acc += s.type_probs[i];
        if (u < acc) return kLesionTypes[i];
    }
    return kLesionTypes[std::size(kLesionTypes) - 1];
}

}  // namespace

SyntheticCohort generate_cohort(const CohortSpec& spec, uint64_t seed) {
    validate(spec);
    SyntheticCohort cohort;
    cohort.spec = spec;

    const int volumes_per_patient = spec.studies_per_patient * spec.series_per_study;
    for (int p = 0; p < spec.num_patients; ++p) {
        const std::string patient_id = "P" + pad2(p + 1);
        Rng rng(derive_seed(seed, "patient:" + patient_id));

        const int num_slices = rng.uniform_int(spec.min_slices, spec.max_slices);
        const int num_lesions =
            rng.uniform_int(spec.min_lesions_per_patient, spec.max_lesions_per_patient);

        std::vector<LesionSeed> lesions;
        for (int l = 0; l < num_lesions; ++l) {
            LesionSeed seed_lesion;
            seed_lesion.lesion_id = patient_id + ":L" + std::to_string(l + 1);
            seed_lesion.type = pick_type(spec, rng);
            bool placed = false;
            for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
                seed_lesion.rx = rng.uniform(spec.min_radius_px, spec.max_radius_px);
                seed_lesion.ry = rng.uniform(spec.min_radius_px, spec.max_radius_px);
                seed_lesion.rz = rng.uniform(spec.min_radius_slices, spec.max_radius_slices);
                const int z_reach = int(std::ceil(kAxialExtentRatio * seed_lesion.rz));
                seed_lesion.cx = rng.uniform(seed_lesion.rx + kPlacementMarginPx,
                                             spec.image_width - seed_lesion.rx - kPlacementMarginPx);
                seed_lesion.cy = rng.uniform(seed_lesion.ry + kPlacementMarginPx,
                                             spec.image_height - seed_lesion.ry - kPlacementMarginPx);
                seed_lesion.key_slice = rng.uniform_int(z_reach + 1, num_slices - 2 - z_reach);
                placed = true;
                for (const auto& other : lesions) {
                    const int other_reach = int(std::ceil(kAxialExtentRatio * other.rz));
                    const bool z_overlap =
                        seed_lesion.key_slice - z_reach <= other.key_slice + other_reach &&
                        other.key_slice - other_reach <= seed_lesion.key_slice + z_reach;
                    const bool x_near = std::abs(seed_lesion.cx - other.cx) <
                                        seed_lesion.rx + other.rx + kPlacementMarginPx;
                    const bool y_near = std::abs(seed_lesion.cy - other.cy) <
                                        seed_lesion.ry + other.ry + kPlacementMarginPx;
                    if (z_overlap && x_near && y_near) {
                        placed = false;
                        break;
                    }
                }
            }
            if (!placed)
                throw ConfigError("cohort spec infeasible: cannot place non-overlapping lesions");
            seed_lesion.embedding = one_hot(spec.embed_dim, l);
            bool hide_allowed =
                !spec.full_hide_specialty_only || seed_lesion.type != std::string("universal");
            seed_lesion.full_hide = hide_allowed && rng.bernoulli(spec.full_hide_rate);
            seed_lesion.anchor_volume = rng.uniform_int(0, volumes_per_patient - 1);
            lesions.push_back(std::move(seed_lesion));
        }

        int volume_ordinal = 0;
        for (int st = 0; st < spec.studies_per_patient; ++st) {
            for (int se = 0; se < spec.series_per_study; ++se, ++volume_ordinal) {
                VolumeTruth vol;
                vol.meta.patient_id = patient_id;
                vol.meta.study_id = patient_id + ".ST" + pad2(st + 1);
                vol.meta.series_id = "SE" + pad2(se + 1);
                vol.meta.volume_id = vol.meta.study_id + "." + vol.meta.series_id;
                vol.meta.num_slices = num_slices;
                vol.meta.pixel_spacing_mm = spec.pixel_spacing_mm;
                vol.meta.slice_interval_mm = spec.slice_interval_mm;
                vol.image_width = spec.image_width;
                vol.image_height = spec.image_height;

                for (const auto& lesion : lesions) {
                    LesionInstance inst;
                    inst.lesion_id = lesion.lesion_id;
                    inst.lesion_type = lesion.type;
                    inst.key_slice = lesion.key_slice;
                    inst.embedding = lesion.embedding;

                    const double jx = spec.cross_study_jitter_px > 0
                                          ? rng.normal(0.0, spec.cross_study_jitter_px)
                                          : 0.0;
                    const double jy = spec.cross_study_jitter_px > 0
                                          ? rng.normal(0.0, spec.cross_study_jitter_px)
                                          : 0.0;
                    const int z_reach = int(std::ceil(kAxialExtentRatio * lesion.rz));
                    for (int dz = -z_reach; dz <= z_reach; ++dz) {
                        if (std::abs(dz) > kAxialExtentRatio * lesion.rz) continue;
                        double frac = double(dz) / lesion.rz;
                        double scale =
                            std::max(kSliceScaleFloor, std::sqrt(std::max(0.0, 1 - frac * frac)));
                        SliceBoxRef ref;
                        ref.slice = lesion.key_slice + dz;
                        ref.box = Box2D{lesion.cx + jx, lesion.cy + jy, 2 * lesion.rx * scale,
                                        2 * lesion.ry * scale};
                        inst.slices.push_back(ref);
                    }

                    if (lesion.full_hide) {
                        inst.visibility = Visibility::hidden;
                    } else if (volume_ordinal == lesion.anchor_volume) {
                        inst.visibility = Visibility::annotated;
                    } else {
                        inst.visibility = rng.bernoulli(spec.cross_study_hide_rate)
                                              ? Visibility::hidden
                                              : Visibility::annotated;
                    }
                    if (inst.visibility == Visibility::annotated) {
                        for (const auto& ref : inst.slices) {
                            if (ref.slice == inst.key_slice)
                                inst.annotated_slices.push_back(ref.slice);
                            else if (!rng.bernoulli(spec.non_key_slice_hide_rate))
                                inst.annotated_slices.push_back(ref.slice);
                        }
                    }
                    vol.instances.push_back(std::move(inst));
                }
                cohort.volumes.push_back(std::move(vol));
            }
        }
    }
    return cohort;
}

std::vector<Annotation> visible_annotations(const SyntheticCohort& cohort, uint64_t seed) {
    std::vector<Annotation> out;
    for (const auto& vol : cohort.volumes) {
        Rng rng(derive_seed(seed, "annembed:" + vol.meta.volume_id));
        for (const auto& inst : vol.instances) {
            if (inst.visibility != Visibility::annotated) continue;
            for (int slice : inst.annotated_slices) {
                auto it = std::find_if(inst.slices.begin(), inst.slices.end(),
                                       [&](const SliceBoxRef& r) { return r.slice == slice; });
                if (it == inst.slices.end()) continue;
                Annotation a;
                a.lesion_id = inst.lesion_id;
                a.patient_id = vol.meta.patient_id;
                a.study_id = vol.meta.study_id;
                a.series_id = vol.meta.series_id;
                a.volume_id = vol.meta.volume_id;
                a.key_slice = slice;
                a.box = it->box;
                a.status = AnnotationStatus::original;
                a.embedding = noisy_unit(inst.embedding, cohort.spec.sigma_e, rng);
                out.push_back(std::move(a));
            }
        }
    }
    return out;
}

std::vector<Box3D> truth_boxes_3d(const VolumeTruth& volume) {
    std::vector<Box3D> out;
    for (const auto& inst : volume.instances) {
        if (inst.slices.empty()) continue;
        Box3D b;
        int z_min = inst.slices.front().slice, z_max = inst.slices.front().slice;
        const Box2D* key = &inst.slices.front().box;
        for (const auto& ref : inst.slices) {
            z_min = std::min(z_min, ref.slice);
            z_max = std::max(z_max, ref.slice);
            if (ref.slice == inst.key_slice) key = &ref.box;
        }
        b.cx = key->cx;
        b.cy = key->cy;
        b.w = key->w;
        b.h = key->h;
        b.z_min = z_min;
        b.z_max = z_max;
        out.push_back(b);
    }
    return out;
}

void validate(const OracleConfig& config) {
    require(config.embed_dim >= 1, "embed_dim must be >= 1");
    require(config.sigma_e >= 0, "sigma_e must be >= 0");
    require(config.fp_box_min_px > 0 && config.fp_box_min_px <= config.fp_box_max_px,
            "bad fp box size range");
    require(!config.experts.empty(), "oracle needs at least one expert");
    for (const auto& e : config.experts) {
        require(!e.expert_id.empty(), "expert_id must not be empty");
        check_prob(e.sensitivity, "sensitivity");
        check_prob(e.off_specialty_sensitivity, "off_specialty_sensitivity");
        require(e.jitter_px >= 0, "jitter_px must be >= 0");
        require(e.fp_per_slice >= 0, "fp_per_slice must be >= 0");
        require(e.tp_score_min >= 0 && e.tp_score_min <= e.tp_score_max && e.tp_score_max <= 1,
                "bad tp score range");
        require(e.fp_score_min >= 0 && e.fp_score_min <= e.fp_score_max && e.fp_score_max <= 1,
                "bad fp score range");
        bool known = e.specialty == "universal";
        for (const char* t : kLesionTypes) known = known || e.specialty == t;
        require(known, "unknown specialty: " + e.specialty);
    }
}

std::vector<ScoredBox> simulate_expert(const VolumeTruth& volume, const ExpertProfile& expert,
                                       const OracleConfig& config, uint64_t seed) {
    validate(config);
    Rng rng(seed);
    std::vector<ScoredBox> out;

    for (const auto& inst : volume.instances) {
        double sens = expert.specialty == "universal" || expert.specialty == inst.lesion_type
                          ? expert.sensitivity
                          : expert.off_specialty_sensitivity;
        for (const auto& ref : inst.slices) {
            if (!rng.bernoulli(sens)) continue;
            ScoredBox sb;
            sb.box = ref.box;
            if (expert.jitter_px > 0) {
                sb.box.cx += rng.normal(0.0, expert.jitter_px);
                sb.box.cy += rng.normal(0.0, expert.jitter_px);
                sb.box.w = std::max(2.0, sb.box.w + rng.normal(0.0, expert.jitter_px));
                sb.box.h = std::max(2.0, sb.box.h + rng.normal(0.0, expert.jitter_px));
            }
            sb.score = rng.uniform(expert.tp_score_min, expert.tp_score_max);
            sb.slice = ref.slice;
            sb.expert_id = expert.expert_id;
            sb.source_id = inst.lesion_id + "@" + std::to_string(ref.slice);
            sb.embedding = noisy_unit(inst.embedding, config.sigma_e, rng);
            out.push_back(std::move(sb));
        }
    }

    for (int s = 0; s < volume.meta.num_slices; ++s) {
        int n = rng.poisson(expert.fp_per_slice);
        for (int k = 0; k < n; ++k) {
            ScoredBox sb;
            double w = rng.uniform(config.fp_box_min_px, config.fp_box_max_px);
            double h = rng.uniform(config.fp_box_min_px, config.fp_box_max_px);
            sb.box.cx = rng.uniform(w / 2, volume.image_width - w / 2);
            sb.box.cy = rng.uniform(h / 2, volume.image_height - h / 2);
            sb.box.w = w;
            sb.box.h = h;
            sb.score = rng.uniform(expert.fp_score_min, expert.fp_score_max);
            sb.slice = s;
            sb.expert_id = expert.expert_id;
            sb.source_id = "fp@" + std::to_string(s) + ":" + std::to_string(k);
            sb.embedding = random_unit(config.embed_dim, rng);
            out.push_back(std::move(sb));
        }
    }
    return out;
}

DenseMaps simulate_dense_maps(const GtSlice& slice, int map_width, int map_height, double stride,
                              double r_c, double r_i) {
    DenseTargetMaps targets = assign_targets(slice, map_width, map_height, stride, r_c, r_i);
    DenseMaps maps;
    maps.width = map_width;
    maps.height = map_height;
    maps.centerness.assign(size_t(map_width) * size_t(map_height), 0.0f);
    maps.regression.assign(size_t(map_width) * size_t(map_height) * 4, 0.0f);
    for (size_t i = 0; i < maps.centerness.size(); ++i) {
        if (targets.centerness[i] != kCenterPositive) continue;
        maps.centerness[i] = 1.0f;
        for (int c = 0; c < 4; ++c) maps.regression[i * 4 + c] = targets.regression[i * 4 + c];
    }
    return maps;
}

SliceTransform sample_augmentation(Rng& rng) {
    SliceTransform t;
    t.ratio = rng.uniform(0.8, 1.2);
    t.shift_x = rng.uniform(-8.0, 8.0);
    t.shift_y = rng.uniform(-8.0, 8.0);
    return t;
}

Box2D apply_transform(const Box2D& box, const SliceTransform& t) {
    return Box2D{box.cx * t.ratio + t.shift_x, box.cy * t.ratio + t.shift_y, box.w * t.ratio,
                 box.h * t.ratio};
}

GtSlice augment_slice(const GtSlice& slice, const SliceTransform& t) {
    GtSlice out = slice;
    for (auto& b : out.boxes) b.box = apply_transform(b.box, t);
    return out;
}

std::vector<double> oracle_fpr_scores(const std::vector<Proposal3D>& proposals,
                                      const VolumeTruth& volume, double iobb_threshold,
                                      uint64_t seed) {
    std::vector<Box3D> truths = truth_boxes_3d(volume);
    Rng rng(seed);
    std::vector<double> out;
    out.reserve(proposals.size());
    for (const auto& p : proposals) {
        bool hit = false;
        for (const auto& t : truths)
            if (iobb_3d(p.box, t) > iobb_threshold) {
                hit = true;
                break;
            }
        double s = rng.normal(hit ? 0.9 : 0.1, 0.02);
        out.push_back(std::clamp(s, 0.0, 1.0));
    }
    return out;
}

}  // namespace lens
