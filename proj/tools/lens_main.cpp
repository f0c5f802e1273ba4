#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "lens/afp.hpp"
#include "lens/config.hpp"
#include "lens/errors.hpp"
#include "lens/ingest.hpp"
#include "lens/pipeline.hpp"
#include "lens/records.hpp"

namespace {

struct CliOptions {
    std::string config_path;
    std::string out_dir = "out";
    uint64_t seed = 0;
    int workers = 1;
    bool strict_froc = false;
    lens::Thresholds thresholds;
    lens::DecodeParams decode;
};

// Threshold overrides are only applied when the flag was actually given, so
// the config document keeps authority over unset values.
struct Overrides {
    CLI::Option* seed = nullptr;
    CLI::Option* strict_froc = nullptr;
    CLI::Option* theta = nullptr;
    CLI::Option* delta = nullptr;
    CLI::Option* sigma = nullptr;
    CLI::Option* theta_fp = nullptr;
    CLI::Option* nms_iou = nullptr;
    CLI::Option* iobb = nullptr;
    CLI::Option* r_c = nullptr;
    CLI::Option* r_i = nullptr;
    CLI::Option* lambda1 = nullptr;
    CLI::Option* lambda2 = nullptr;
    CLI::Option* fp_per_tp = nullptr;
    CLI::Option* pos_per_neg = nullptr;
    CLI::Option* stride = nullptr;
    CLI::Option* score_threshold = nullptr;
    CLI::Option* top_k = nullptr;
};

lens::PipelineConfig effective_config(const CliOptions& opt, const Overrides& ov) {
    lens::PipelineConfig config;
    if (!opt.config_path.empty()) config = lens::load_config(opt.config_path);
    if (ov.seed->count()) config.seed = opt.seed;
    if (ov.strict_froc->count()) config.strict_froc = true;
    lens::Thresholds& t = config.thresholds;
    if (ov.theta->count()) t.theta = opt.thresholds.theta;
    if (ov.delta->count()) t.delta = opt.thresholds.delta;
    if (ov.sigma->count()) t.sigma = opt.thresholds.sigma;
    if (ov.theta_fp->count()) t.theta_fp = opt.thresholds.theta_fp;
    if (ov.nms_iou->count()) t.nms_iou = opt.thresholds.nms_iou;
    if (ov.iobb->count()) t.iobb = opt.thresholds.iobb;
    if (ov.r_c->count()) t.r_c = opt.thresholds.r_c;
    if (ov.r_i->count()) t.r_i = opt.thresholds.r_i;
    if (ov.lambda1->count()) t.lambda1 = opt.thresholds.lambda1;
    if (ov.lambda2->count()) t.lambda2 = opt.thresholds.lambda2;
    if (ov.fp_per_tp->count()) t.fp_per_tp = opt.thresholds.fp_per_tp;
    if (ov.pos_per_neg->count()) t.pos_per_neg = opt.thresholds.pos_per_neg;
    if (ov.stride->count()) config.decode.stride = opt.decode.stride;
    if (ov.score_threshold->count())
        config.decode.score_threshold = opt.decode.score_threshold;
    if (ov.top_k->count()) config.decode.top_k = opt.decode.top_k;
    return config;
}

int run_decode(const lens::StageContext& ctx, const std::string& centerness_path,
               const std::string& regression_path, const std::string& out_path,
               const std::string& volume_id, int slice) {
    lens::Tensor centerness = lens::read_tensor(centerness_path);
    lens::Tensor regression = lens::read_tensor(regression_path);
    if (centerness.dims.size() != 2)
        throw lens::FormatError("centerness tensor must have rank 2 (h, w)");
    if (regression.dims.size() != 3 || regression.dims[2] != 4)
        throw lens::FormatError("regression tensor must have rank 3 (h, w, 4)");
    if (regression.dims[0] != centerness.dims[0] || regression.dims[1] != centerness.dims[1])
        throw lens::FormatError("centerness and regression shapes disagree");

    int h = int(centerness.dims[0]);
    int w = int(centerness.dims[1]);
    std::vector<lens::ScoredBox> boxes = lens::decode_proposals(
        centerness.data, regression.data, w, h, ctx.config.decode.stride,
        ctx.config.decode.score_threshold, ctx.config.decode.top_k, slice, "decoded");

    std::filesystem::path out =
        out_path.empty() ? ctx.out_dir / "decoded.jsonl" : std::filesystem::path(out_path);
    lens::RecordWriter writer(out, lens::kind::proposal, ctx.hash);
    for (const auto& b : boxes) writer.write(lens::proposal_to_record({volume_id, b}));
    writer.close();

    lens::Json summary;
    summary["proposals"] = boxes.size();
    summary["out"] = out.string();
    std::cout << summary.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LENS: universal lesion detection pipeline tools"};
    app.require_subcommand(1);
    app.fallthrough();

    CliOptions opt;
    Overrides ov;
    app.add_option("--config", opt.config_path, "configuration document (JSON)");
    app.add_option("--out-dir", opt.out_dir, "run directory for artifacts")
        ->capture_default_str();
    ov.seed = app.add_option("--seed", opt.seed, "master seed (overrides config)");
    app.add_option("--workers", opt.workers, "worker threads for per-volume stages")
        ->capture_default_str();
    ov.strict_froc = app.add_flag("--strict-froc", opt.strict_froc,
                                  "count duplicate FROC hits as false positives");
    ov.theta = app.add_option("--theta", opt.thresholds.theta, "IoU linking/matching threshold");
    ov.delta = app.add_option("--delta", opt.thresholds.delta, "embedding distance threshold");
    ov.sigma = app.add_option("--sigma", opt.thresholds.sigma, "cross-dataset score threshold");
    ov.theta_fp = app.add_option("--theta-fp", opt.thresholds.theta_fp, "FP IoU ceiling");
    ov.nms_iou = app.add_option("--nms-iou", opt.thresholds.nms_iou, "pooled NMS IoU");
    ov.iobb = app.add_option("--iobb", opt.thresholds.iobb, "3D IoBB TP threshold");
    ov.r_c = app.add_option("--r-c", opt.thresholds.r_c, "center region scale");
    ov.r_i = app.add_option("--r-i", opt.thresholds.r_i, "ignore region scale");
    ov.lambda1 = app.add_option("--lambda1", opt.thresholds.lambda1, "size loss weight");
    ov.lambda2 = app.add_option("--lambda2", opt.thresholds.lambda2, "box loss weight");
    ov.fp_per_tp = app.add_option("--fp-per-tp", opt.thresholds.fp_per_tp, "FPR FP:TP ratio");
    ov.pos_per_neg =
        app.add_option("--pos-per-neg", opt.thresholds.pos_per_neg, "slice pos:neg ratio");
    ov.stride = app.add_option("--stride", opt.decode.stride, "decode feature stride");
    ov.score_threshold =
        app.add_option("--score-threshold", opt.decode.score_threshold, "decode score floor");
    ov.top_k = app.add_option("--top-k", opt.decode.top_k, "decode proposal budget");

    CLI::App* synth_gen = app.add_subcommand("synth-gen", "generate a synthetic cohort");

    std::string sim_stage = "detect";
    CLI::App* simulate = app.add_subcommand("simulate", "run the oracle detector experts");
    simulate->add_option("--stage", sim_stage, "detect | retrain")->capture_default_str();

    std::string centerness_path, regression_path, decode_out, decode_volume = "decoded";
    int decode_slice = 0;
    CLI::App* decode = app.add_subcommand("decode", "decode dense maps into proposals");
    decode->add_option("--centerness", centerness_path, "centerness tensor (rank 2)")
        ->required();
    decode->add_option("--regression", regression_path, "regression tensor (rank 3)")
        ->required();
    decode->add_option("--out", decode_out, "output record file");
    decode->add_option("--volume-id", decode_volume, "volume id stamped on proposals")
        ->capture_default_str();
    decode->add_option("--slice", decode_slice, "slice index stamped on proposals")
        ->capture_default_str();

    std::string fuse_stage = "detect";
    CLI::App* fuse = app.add_subcommand("fuse", "pool experts' proposals and apply NMS");
    fuse->add_option("--stage", fuse_stage, "detect | retrain")->capture_default_str();

    std::string stack_stage = "detect";
    CLI::App* stack3d = app.add_subcommand("stack3d", "link tracklets and stack to 3D");
    stack3d->add_option("--stage", stack_stage, "detect | retrain")->capture_default_str();

    CLI::App* mine = app.add_subcommand("mine", "missing-annotation mining");
    mine->require_subcommand(1);
    mine->fallthrough();
    CLI::App* mine_propagate =
        mine->add_subcommand("propagate", "cross-slice box propagation along tracklets");
    CLI::App* mine_match =
        mine->add_subcommand("match", "intra-patient lesion matching via embeddings");
    CLI::App* mine_cross =
        mine->add_subcommand("cross", "cross-dataset mining of uncertain lesions");

    CLI::App* assemble = app.add_subcommand("assemble", "build the refined training label set");
    CLI::App* fpr_select =
        app.add_subcommand("fpr-select", "select FPR samples and fuse final scores");
    CLI::App* eval_froc = app.add_subcommand("eval-froc", "evaluate FROC against truth");
    CLI::App* pipeline_run = app.add_subcommand("pipeline-run", "run the whole procedure");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        lens::PipelineConfig config = effective_config(opt, ov);
        lens::StageContext ctx = lens::make_context(config, opt.out_dir, opt.workers);

        if (*decode)
            return run_decode(ctx, centerness_path, regression_path, decode_out, decode_volume,
                              decode_slice);

        lens::Json summary;
        if (*synth_gen)
            summary = lens::run_synth_gen(ctx);
        else if (*simulate)
            summary = lens::run_simulate(ctx, sim_stage);
        else if (*fuse)
            summary = lens::run_fuse(ctx, fuse_stage);
        else if (*stack3d)
            summary = lens::run_stack3d(ctx, stack_stage);
        else if (*mine_propagate)
            summary = lens::run_mine_propagate(ctx);
        else if (*mine_match)
            summary = lens::run_mine_match(ctx);
        else if (*mine_cross)
            summary = lens::run_mine_cross(ctx);
        else if (*mine)
            throw lens::ConfigError("mine requires a strategy: propagate | match | cross");
        else if (*assemble)
            summary = lens::run_assemble(ctx);
        else if (*fpr_select)
            summary = lens::run_fpr_select(ctx);
        else if (*eval_froc) {
            summary = lens::run_eval_froc(ctx);
            // Human-readable table on top of the artifacts.
            std::cerr << "fp/volume  sensitivity\n";
            for (const auto& p : summary["points"]) {
                std::cerr << "  " << p["fp_per_volume"].get<double>() << "\t"
                          << p["sensitivity"].get<double>() << "\n";
            }
            std::cerr << "average sensitivity: "
                      << summary["average_sensitivity"].get<double>() << "\n";
        } else if (*pipeline_run)
            summary = lens::run_pipeline(ctx);

        std::cout << summary.dump(2) << "\n";
        return 0;
    } catch (const lens::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const lens::FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 3;
    } catch (const lens::EmptyInputError& e) {
        std::cerr << "empty input: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
