#include "lens/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "lens/errors.hpp"
#include "lens/fpr.hpp"
#include "lens/froc.hpp"
#include "lens/rng.hpp"

namespace lens {

namespace artifact {
std::string proposals(const std::string& stage) { return "proposals_" + stage + ".jsonl"; }
std::string fused(const std::string& stage) { return "fused_" + stage + ".jsonl"; }
std::string proposals3d(const std::string& stage) { return "proposals3d_" + stage + ".jsonl"; }
}  // namespace artifact

StageContext make_context(PipelineConfig config, std::filesystem::path out_dir, int workers) {
    validate(config);
    if (workers < 1) throw ConfigError("workers must be >= 1");
    StageContext ctx;
    ctx.hash = config_hash(config);
    ctx.config = std::move(config);
    ctx.out_dir = std::move(out_dir);
    ctx.workers = workers;
    std::filesystem::create_directories(ctx.out_dir);
    return ctx;
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    workers = std::max(1, std::min(workers, n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    std::vector<std::thread> pool;
    pool.reserve(size_t(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                int i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

namespace {

std::filesystem::path at(const StageContext& ctx, const std::string& name) {
    return ctx.out_dir / name;
}

// ---- artifact loaders ----

std::vector<VolumeTruth> load_volumes(const StageContext& ctx, bool with_instances) {
    std::vector<VolumeTruth> volumes;
    std::map<std::string, size_t> index;
    for (const Json& j : read_records(at(ctx, artifact::volumes), kind::volume_meta)) {
        Json extra;
        VolumeTruth v;
        v.meta = volume_meta_from_record(j, &extra);
        if (auto it = extra.find("image_width"); it != extra.end()) v.image_width = it->get<int>();
        if (auto it = extra.find("image_height"); it != extra.end())
            v.image_height = it->get<int>();
        index[v.meta.volume_id] = volumes.size();
        volumes.push_back(std::move(v));
    }
    if (volumes.empty())
        throw EmptyInputError(std::string("no volumes in ") + artifact::volumes);
    if (with_instances) {
        for (const Json& j : read_records(at(ctx, artifact::truth), kind::truth_lesion)) {
            TruthLesionRecord rec = truth_lesion_from_record(j);
            auto it = index.find(rec.volume_id);
            if (it == index.end())
                throw FormatError("truth references unknown volume " + rec.volume_id);
            volumes[it->second].instances.push_back(std::move(rec.instance));
        }
    }
    return volumes;
}

std::vector<Annotation> load_annotations(const StageContext& ctx, const std::string& name) {
    std::vector<Annotation> out;
    for (const Json& j : read_records(at(ctx, name), kind::annotation))
        out.push_back(annotation_from_record(j));
    return out;
}

std::vector<ProposalRecord> load_proposals(const StageContext& ctx, const std::string& name) {
    std::vector<ProposalRecord> out;
    for (const Json& j : read_records(at(ctx, name), kind::proposal))
        out.push_back(proposal_from_record(j));
    return out;
}

std::vector<Proposal3D> load_proposals3d(const StageContext& ctx, const std::string& name) {
    std::vector<Proposal3D> out;
    for (const Json& j : read_records(at(ctx, name), kind::proposal3d))
        out.push_back(proposal3d_from_record(j));
    return out;
}

template <typename T>
std::vector<std::vector<T>> split_by_volume(const std::vector<VolumeTruth>& volumes,
                                            const std::vector<T>& items,
                                            const std::function<const std::string&(const T&)>& id) {
    std::map<std::string, size_t> index;
    for (size_t i = 0; i < volumes.size(); ++i) index[volumes[i].meta.volume_id] = i;
    std::vector<std::vector<T>> out(volumes.size());
    for (const T& item : items) {
        auto it = index.find(id(item));
        if (it == index.end())
            throw FormatError("record references unknown volume " + id(item));
        out[it->second].push_back(item);
    }
    return out;
}

std::vector<std::vector<Annotation>> annotations_by_volume(
    const std::vector<VolumeTruth>& volumes, const std::vector<Annotation>& anns) {
    return split_by_volume<Annotation>(
        volumes, anns, [](const Annotation& a) -> const std::string& { return a.volume_id; });
}

std::vector<std::vector<Proposal3D>> proposals3d_by_volume(
    const std::vector<VolumeTruth>& volumes, const std::vector<Proposal3D>& props) {
    return split_by_volume<Proposal3D>(
        volumes, props, [](const Proposal3D& p) -> const std::string& { return p.volume_id; });
}

// Cumulative certain/uncertain counts in the manifest mirror how each mining
// strategy grows the label set.
Json report_json(const MiningReport& r) {
    Json j;
    j["num_3d_gt"] = r.num_3d_gt;
    j["num_2d_gt"] = r.num_2d_gt;
    j["num_2d_uncertain"] = r.num_2d_uncertain;
    return j;
}

std::vector<Annotation> concat(const std::vector<Annotation>& a, const std::vector<Annotation>& b) {
    std::vector<Annotation> out = a;
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

}  // namespace

Json run_synth_gen(const StageContext& ctx) {
    SyntheticCohort cohort = generate_cohort(ctx.config.cohort, ctx.config.seed);

    RecordWriter vol_writer(at(ctx, artifact::volumes), kind::volume_meta, ctx.hash);
    for (const auto& vol : cohort.volumes) {
        Json extra;
        extra["image_width"] = vol.image_width;
        extra["image_height"] = vol.image_height;
        vol_writer.write(volume_meta_to_record(vol.meta, extra));
    }
    vol_writer.close();

    int64_t instances = 0, hidden = 0;
    RecordWriter truth_writer(at(ctx, artifact::truth), kind::truth_lesion, ctx.hash);
    for (const auto& vol : cohort.volumes) {
        for (const auto& inst : vol.instances) {
            truth_writer.write(truth_lesion_to_record({vol.meta.volume_id, inst}));
            ++instances;
            hidden += inst.visibility == Visibility::hidden ? 1 : 0;
        }
    }
    truth_writer.close();

    std::vector<Annotation> annotations = visible_annotations(cohort, ctx.config.seed);
    RecordWriter ann_writer(at(ctx, artifact::annotations), kind::annotation, ctx.hash);
    for (const auto& a : annotations) ann_writer.write(annotation_to_record(a));
    ann_writer.close();

    Json summary;
    summary["volumes"] = cohort.volumes.size();
    summary["lesion_instances"] = instances;
    summary["hidden_instances"] = hidden;
    summary["annotations_2d"] = annotations.size();
    return summary;
}

Json run_simulate(const StageContext& ctx, const std::string& stage) {
    if (stage != "detect" && stage != "retrain")
        throw ConfigError("simulate stage must be 'detect' or 'retrain'");
    std::vector<VolumeTruth> volumes = load_volumes(ctx, true);

    OracleConfig oracle = ctx.config.oracle;
    double uplift = 0;
    if (stage == "retrain") {
        // Retraining stand-in: more mined labels, better detector.
        size_t original = load_annotations(ctx, artifact::annotations).size();
        size_t mined = load_annotations(ctx, artifact::mined_propagate).size() +
                       load_annotations(ctx, artifact::mined_match).size();
        uplift = ctx.config.retrain_sensitivity_boost *
                 std::min(1.0, double(mined) / double(std::max<size_t>(original, 1)));
        for (auto& e : oracle.experts)
            e.sensitivity = std::min(1.0, e.sensitivity + uplift);
    }

    std::vector<std::vector<ScoredBox>> results(volumes.size());
    parallel_for(int(volumes.size()), ctx.workers, [&](int vi) {
        const VolumeTruth& vol = volumes[size_t(vi)];
        std::vector<ScoredBox>& out = results[size_t(vi)];
        for (const auto& expert : oracle.experts) {
            uint64_t seed = derive_seed(ctx.config.seed, "simulate:" + stage + ":" +
                                                              vol.meta.volume_id + ":" +
                                                              expert.expert_id);
            std::vector<ScoredBox> boxes = simulate_expert(vol, expert, oracle, seed);
            out.insert(out.end(), std::make_move_iterator(boxes.begin()),
                       std::make_move_iterator(boxes.end()));
        }
    });

    size_t total = 0;
    RecordWriter writer(at(ctx, artifact::proposals(stage)), kind::proposal, ctx.hash);
    for (size_t vi = 0; vi < volumes.size(); ++vi)
        for (const auto& box : results[vi]) {
            writer.write(proposal_to_record({volumes[vi].meta.volume_id, box}));
            ++total;
        }
    writer.close();

    Json summary;
    summary["stage"] = stage;
    summary["proposals"] = total;
    summary["sensitivity_uplift"] = uplift;
    return summary;
}

Json run_fuse(const StageContext& ctx, const std::string& stage) {
    std::vector<VolumeTruth> volumes = load_volumes(ctx, false);
    std::vector<ProposalRecord> records = load_proposals(ctx, artifact::proposals(stage));
    auto by_volume = split_by_volume<ProposalRecord>(
        volumes, records,
        [](const ProposalRecord& p) -> const std::string& { return p.volume_id; });

    std::vector<std::vector<ScoredBox>> results(volumes.size());
    parallel_for(int(volumes.size()), ctx.workers, [&](int vi) {
        // Regroup the pooled records per expert, experts in config order.
        std::vector<std::string> order;
        std::map<std::string, size_t> expert_index;
        std::vector<std::vector<ScoredBox>> per_expert;
        for (const auto& e : ctx.config.oracle.experts) {
            expert_index[e.expert_id] = per_expert.size();
            order.push_back(e.expert_id);
            per_expert.emplace_back();
        }
        for (const auto& rec : by_volume[size_t(vi)]) {
            auto it = expert_index.find(rec.box.expert_id);
            if (it == expert_index.end()) {
                expert_index[rec.box.expert_id] = per_expert.size();
                it = expert_index.find(rec.box.expert_id);
                per_expert.emplace_back();
            }
            per_expert[it->second].push_back(rec.box);
        }
        results[size_t(vi)] = pool_and_nms(per_expert, ctx.config.thresholds.nms_iou);
    });

    size_t total = 0;
    RecordWriter writer(at(ctx, artifact::fused(stage)), kind::proposal, ctx.hash);
    for (size_t vi = 0; vi < volumes.size(); ++vi)
        for (const auto& box : results[vi]) {
            writer.write(proposal_to_record({volumes[vi].meta.volume_id, box}));
            ++total;
        }
    writer.close();

    Json summary;
    summary["stage"] = stage;
    summary["fused_proposals"] = total;
    return summary;
}

Json run_stack3d(const StageContext& ctx, const std::string& stage) {
    std::vector<VolumeTruth> volumes = load_volumes(ctx, false);
    std::vector<ProposalRecord> records = load_proposals(ctx, artifact::fused(stage));
    auto by_volume = split_by_volume<ProposalRecord>(
        volumes, records,
        [](const ProposalRecord& p) -> const std::string& { return p.volume_id; });

    std::vector<std::vector<Proposal3D>> results(volumes.size());
    parallel_for(int(volumes.size()), ctx.workers, [&](int vi) {
        std::vector<ScoredBox> boxes;
        boxes.reserve(by_volume[size_t(vi)].size());
        for (const auto& rec : by_volume[size_t(vi)]) boxes.push_back(rec.box);
        std::vector<Tracklet> tracklets = build_tracklets(boxes, ctx.config.thresholds.theta);
        std::vector<Proposal3D> stacked = stack_to_3d(tracklets);
        for (auto& p : stacked) p.volume_id = volumes[size_t(vi)].meta.volume_id;
        results[size_t(vi)] = std::move(stacked);
    });

    size_t total = 0;
    RecordWriter writer(at(ctx, artifact::proposals3d(stage)), kind::proposal3d, ctx.hash);
    for (const auto& vol_result : results)
        for (const auto& p : vol_result) {
            writer.write(proposal3d_to_record(p));
            ++total;
        }
    writer.close();

    Json summary;
    summary["stage"] = stage;
    summary["proposals_3d"] = total;
    return summary;
}

Json run_mine_propagate(const StageContext& ctx) {
    std::vector<VolumeTruth> volumes = load_volumes(ctx, false);
    std::vector<Annotation> annotations = load_annotations(ctx, artifact::annotations);
    std::vector<Proposal3D> proposals = load_proposals3d(ctx, artifact::proposals3d("detect"));
    auto anns_by_vol = annotations_by_volume(volumes, annotations);
    auto props_by_vol = proposals3d_by_volume(volumes, proposals);

    std::vector<std::vector<Annotation>> results(volumes.size());
    parallel_for(int(volumes.size()), ctx.workers, [&](int vi) {
        if (anns_by_vol[size_t(vi)].empty()) return;
        std::vector<Tracklet> tracklets;
        tracklets.reserve(props_by_vol[size_t(vi)].size());
        for (const auto& p : props_by_vol[size_t(vi)]) tracklets.push_back(Tracklet{p.members});
        results[size_t(vi)] = propagate_cross_slice(tracklets, anns_by_vol[size_t(vi)],
                                                    ctx.config.thresholds.theta);
    });

    std::vector<Annotation> mined;
    for (auto& r : results)
        mined.insert(mined.end(), std::make_move_iterator(r.begin()),
                     std::make_move_iterator(r.end()));

    RecordWriter writer(at(ctx, artifact::mined_propagate), kind::annotation, ctx.hash);
    for (const auto& a : mined) writer.write(annotation_to_record(a));
    writer.close();

    Json summary;
    summary["mined_boxes"] = mined.size();
    summary["labels_after"] = report_json(mining_report(annotations, mined, {}));
    return summary;
}

Json run_mine_match(const StageContext& ctx) {
    std::vector<VolumeTruth> volumes = load_volumes(ctx, false);
    std::vector<Annotation> certain = concat(load_annotations(ctx, artifact::annotations),
                                             load_annotations(ctx, artifact::mined_propagate));
    std::vector<Proposal3D> proposals = load_proposals3d(ctx, artifact::proposals3d("detect"));
    auto props_by_vol = proposals3d_by_volume(volumes, proposals);

    std::vector<VolumeTracklets> tracklets;
    tracklets.reserve(volumes.size());
    for (size_t vi = 0; vi < volumes.size(); ++vi) {
        VolumeTracklets vt;
        vt.volume_id = volumes[vi].meta.volume_id;
        vt.patient_id = volumes[vi].meta.patient_id;
        vt.study_id = volumes[vi].meta.study_id;
        vt.series_id = volumes[vi].meta.series_id;
        for (const auto& p : props_by_vol[vi]) vt.tracklets.push_back(Tracklet{p.members});
        tracklets.push_back(std::move(vt));
    }

    std::vector<Annotation> mined = match_intra_patient(certain, tracklets,
                                                        ctx.config.thresholds.delta,
                                                        ctx.config.thresholds.theta);

    RecordWriter writer(at(ctx, artifact::mined_match), kind::annotation, ctx.hash);
    for (const auto& a : mined) writer.write(annotation_to_record(a));
    writer.close();

    Json summary;
    summary["mined_boxes"] = mined.size();
    summary["labels_after"] = report_json(mining_report(certain, mined, {}));
    return summary;
}

Json run_mine_cross(const StageContext& ctx) {
    std::vector<VolumeTruth> volumes = load_volumes(ctx, false);
    std::vector<Annotation> known = concat(
        concat(load_annotations(ctx, artifact::annotations),
               load_annotations(ctx, artifact::mined_propagate)),
        load_annotations(ctx, artifact::mined_match));
    std::vector<ProposalRecord> records = load_proposals(ctx, artifact::proposals("detect"));

    std::set<std::string> single_type;
    for (const auto& e : ctx.config.oracle.experts)
        if (e.specialty != "universal") single_type.insert(e.expert_id);

    auto known_by_vol = annotations_by_volume(volumes, known);
    auto recs_by_vol = split_by_volume<ProposalRecord>(
        volumes, records,
        [](const ProposalRecord& p) -> const std::string& { return p.volume_id; });

    std::vector<std::vector<Annotation>> results(volumes.size());
    parallel_for(int(volumes.size()), ctx.workers, [&](int vi) {
        std::vector<ScoredBox> candidates;
        for (const auto& rec : recs_by_vol[size_t(vi)])
            if (single_type.count(rec.box.expert_id)) candidates.push_back(rec.box);
        results[size_t(vi)] =
            mine_cross_dataset(candidates, known_by_vol[size_t(vi)], volumes[size_t(vi)].meta,
                               ctx.config.thresholds.sigma, ctx.config.thresholds.theta_fp);
    });

    std::vector<Annotation> uncertain;
    for (auto& r : results)
        uncertain.insert(uncertain.end(), std::make_move_iterator(r.begin()),
                         std::make_move_iterator(r.end()));

    RecordWriter writer(at(ctx, artifact::uncertain), kind::annotation, ctx.hash);
    for (const auto& a : uncertain) writer.write(annotation_to_record(a));
    writer.close();

    Json summary;
    summary["uncertain_boxes"] = uncertain.size();
    summary["labels_after"] = report_json(mining_report(known, {}, uncertain));
    return summary;
}

Json run_assemble(const StageContext& ctx) {
    std::vector<VolumeTruth> volumes = load_volumes(ctx, false);
    std::vector<Annotation> original = load_annotations(ctx, artifact::annotations);
    std::vector<Annotation> mined = concat(load_annotations(ctx, artifact::mined_propagate),
                                           load_annotations(ctx, artifact::mined_match));
    std::vector<Annotation> uncertain = load_annotations(ctx, artifact::uncertain);

    std::vector<VolumeMeta> metas;
    metas.reserve(volumes.size());
    for (const auto& v : volumes) metas.push_back(v.meta);

    std::vector<TrainingLabelSet> labelsets =
        assemble_training_set(original, mined, uncertain, metas,
                              ctx.config.thresholds.pos_per_neg, ctx.config.seed);

    int64_t positives = 0, negatives_requested = 0, negatives_taken = 0;
    RecordWriter writer(at(ctx, artifact::labelsets), kind::labelset, ctx.hash);
    for (const auto& ls : labelsets) {
        writer.write(labelset_to_record(ls));
        positives += ls.num_positive_slices();
        negatives_requested += ls.negatives_requested;
        negatives_taken += ls.negatives_taken;
    }
    writer.close();

    Json summary;
    summary["volumes"] = labelsets.size();
    summary["positive_slices"] = positives;
    summary["negatives_requested"] = negatives_requested;
    summary["negatives_taken"] = negatives_taken;
    summary["negative_shortfall"] = negatives_requested - negatives_taken;
    return summary;
}

Json run_fpr_select(const StageContext& ctx) {
    std::vector<VolumeTruth> volumes = load_volumes(ctx, true);
    std::vector<Annotation> labels = concat(
        concat(concat(load_annotations(ctx, artifact::annotations),
                      load_annotations(ctx, artifact::mined_propagate)),
               load_annotations(ctx, artifact::mined_match)),
        load_annotations(ctx, artifact::uncertain));
    std::vector<Proposal3D> proposals = load_proposals3d(ctx, artifact::proposals3d("retrain"));
    auto props_by_vol = proposals3d_by_volume(volumes, proposals);
    auto labels_by_vol = annotations_by_volume(volumes, labels);

    std::vector<std::vector<FprSample>> samples(volumes.size());
    std::vector<std::vector<ScoredProposal3D>> scored(volumes.size());
    parallel_for(int(volumes.size()), ctx.workers, [&](int vi) {
        const VolumeTruth& vol = volumes[size_t(vi)];
        const auto& props = props_by_vol[size_t(vi)];
        samples[size_t(vi)] = select_fpr_samples(
            props, labels_by_vol[size_t(vi)], ctx.config.thresholds.theta,
            ctx.config.thresholds.theta_fp, ctx.config.thresholds.fp_per_tp,
            derive_seed(ctx.config.seed, "fpr:" + vol.meta.volume_id));

        std::vector<double> fpr = oracle_fpr_scores(
            props, vol, ctx.config.thresholds.iobb,
            derive_seed(ctx.config.seed, "fpr-oracle:" + vol.meta.volume_id));
        scored[size_t(vi)].reserve(props.size());
        for (size_t i = 0; i < props.size(); ++i) {
            ScoredProposal3D sp;
            sp.proposal = props[i];
            sp.fpr_score = fpr[i];
            sp.fused_score = fuse_scores(props[i].score, fpr[i]);
            scored[size_t(vi)].push_back(std::move(sp));
        }
    });

    int64_t tp = 0, fp = 0;
    RecordWriter sample_writer(at(ctx, artifact::fpr_samples), kind::fpr_sample, ctx.hash);
    for (const auto& vol_samples : samples)
        for (const auto& s : vol_samples) {
            sample_writer.write(fpr_sample_to_record(s));
            (s.label == FprLabel::tp ? tp : fp) += 1;
        }
    sample_writer.close();

    size_t detections = 0;
    RecordWriter det_writer(at(ctx, artifact::detections_final), kind::scored_proposal3d,
                            ctx.hash);
    for (const auto& vol_scored : scored)
        for (const auto& sp : vol_scored) {
            det_writer.write(scored_proposal3d_to_record(sp));
            ++detections;
        }
    det_writer.close();

    Json summary;
    summary["tp_samples"] = tp;
    summary["fp_samples"] = fp;
    summary["detections"] = detections;
    return summary;
}

Json run_eval_froc(const StageContext& ctx) {
    std::vector<VolumeTruth> volumes = load_volumes(ctx, true);
    std::vector<ScoredProposal3D> detections;
    for (const Json& j : read_records(at(ctx, artifact::detections_final), kind::scored_proposal3d))
        detections.push_back(scored_proposal3d_from_record(j));

    std::vector<Proposal3D> fused;
    fused.reserve(detections.size());
    for (const auto& d : detections) {
        Proposal3D p = d.proposal;
        p.score = d.fused_score;
        fused.push_back(std::move(p));
    }
    auto by_volume = proposals3d_by_volume(volumes, fused);

    int64_t num_truth = 0;
    std::vector<std::vector<MatchedDetection>> matches(volumes.size());
    parallel_for(int(volumes.size()), ctx.workers, [&](int vi) {
        matches[size_t(vi)] =
            match_volume(by_volume[size_t(vi)], truth_boxes_3d(volumes[size_t(vi)]),
                         ctx.config.thresholds.iobb, ctx.config.strict_froc);
    });
    std::vector<MatchedDetection> pooled;
    for (size_t vi = 0; vi < volumes.size(); ++vi) {
        num_truth += int64_t(volumes[vi].instances.size());
        pooled.insert(pooled.end(), matches[vi].begin(), matches[vi].end());
    }

    FrocCurve curve = froc(pooled, int64_t(volumes.size()), num_truth,
                           ctx.config.thresholds.fp_points);
    write_froc_csv(at(ctx, artifact::froc_csv), curve, ctx.hash);
    write_froc_svg(at(ctx, artifact::froc_svg), curve);

    Json summary;
    summary["num_volumes"] = curve.num_volumes;
    summary["num_truth"] = curve.num_truth;
    Json points = Json::array();
    for (const auto& p : curve.points) {
        Json pj;
        pj["fp_per_volume"] = p.fp_per_volume;
        pj["sensitivity"] = p.sensitivity;
        points.push_back(pj);
    }
    summary["points"] = points;
    summary["average_sensitivity"] = curve.average_sensitivity;
    return summary;
}

Json run_pipeline(const StageContext& ctx) {
    Json stages;
    stages["synth_gen"] = run_synth_gen(ctx);
    stages["simulate_detect"] = run_simulate(ctx, "detect");
    stages["fuse_detect"] = run_fuse(ctx, "detect");
    stages["stack3d_detect"] = run_stack3d(ctx, "detect");
    stages["mine_propagate"] = run_mine_propagate(ctx);
    stages["mine_match"] = run_mine_match(ctx);
    stages["mine_cross"] = run_mine_cross(ctx);
    stages["assemble"] = run_assemble(ctx);
    stages["simulate_retrain"] = run_simulate(ctx, "retrain");
    stages["fuse_retrain"] = run_fuse(ctx, "retrain");
    stages["stack3d_retrain"] = run_stack3d(ctx, "retrain");
    stages["fpr_select"] = run_fpr_select(ctx);
    stages["eval_froc"] = run_eval_froc(ctx);

    Json seeds;
    seeds["master"] = ctx.config.seed;
    for (const char* tag : {"simulate:detect", "simulate:retrain", "assemble", "fpr",
                            "fpr-oracle", "annembed", "patient"})
        seeds[tag] = derive_seed(ctx.config.seed, tag);

    Json manifest;
    manifest["config_hash"] = ctx.hash;
    manifest["seeds"] = seeds;
    manifest["stages"] = stages;

    std::ofstream out(at(ctx, artifact::run_manifest), std::ios::binary);
    if (!out) throw FormatError("cannot open for writing: " +
                                at(ctx, artifact::run_manifest).string());
    out << manifest.dump(2) << "\n";
    return manifest;
}

}  // namespace lens
