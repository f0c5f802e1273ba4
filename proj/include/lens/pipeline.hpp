#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include "lens/config.hpp"
#include "lens/records.hpp"

namespace lens {

// Canonical artifact names inside the run directory. Individual commands and
// pipeline-run read/write exactly these files, which is what makes chaining
// the commands reproduce pipeline-run byte for byte.
namespace artifact {
inline constexpr const char* volumes = "volumes.jsonl";
inline constexpr const char* truth = "truth.jsonl";
inline constexpr const char* annotations = "annotations.jsonl";
inline constexpr const char* mined_propagate = "mined_propagate.jsonl";
inline constexpr const char* mined_match = "mined_match.jsonl";
inline constexpr const char* uncertain = "uncertain.jsonl";
inline constexpr const char* labelsets = "labelsets.jsonl";
inline constexpr const char* fpr_samples = "fpr_samples.jsonl";
inline constexpr const char* detections_final = "detections_final.jsonl";
inline constexpr const char* froc_csv = "froc.csv";
inline constexpr const char* froc_svg = "froc.svg";
inline constexpr const char* run_manifest = "run_manifest.json";

std::string proposals(const std::string& stage);    // proposals_<stage>.jsonl
std::string fused(const std::string& stage);        // fused_<stage>.jsonl
std::string proposals3d(const std::string& stage);  // proposals3d_<stage>.jsonl
}  // namespace artifact

struct StageContext {
    PipelineConfig config;
    std::filesystem::path out_dir;
    int workers = 1;
    std::string hash;  // config fingerprint, stamped into every output
};

/// Validates the config, fingerprints it, and ensures out_dir exists.
StageContext make_context(PipelineConfig config, std::filesystem::path out_dir, int workers = 1);

/// Order-preserving parallel loop: fn(i) runs once for each i in [0, n), the
/// assignment of work to threads never affects observable results as long as
/// fn(i) only touches slot i of shared state.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

// Each stage reads its inputs from, and writes its outputs to, the artifact
// files above, and returns a small summary document (counts, paths).
// `stage` distinguishes the first detector pass ("detect") from the pass that
// stands in for retraining on the refined labels ("retrain").
Json run_synth_gen(const StageContext& ctx);
Json run_simulate(const StageContext& ctx, const std::string& stage);
Json run_fuse(const StageContext& ctx, const std::string& stage);
Json run_stack3d(const StageContext& ctx, const std::string& stage);
Json run_mine_propagate(const StageContext& ctx);
Json run_mine_match(const StageContext& ctx);
Json run_mine_cross(const StageContext& ctx);
Json run_assemble(const StageContext& ctx);
Json run_fpr_select(const StageContext& ctx);
Json run_eval_froc(const StageContext& ctx);

/// The whole procedure: generate → simulate → fuse/stack → mine (all three
/// strategies) → assemble → re-simulate → fpr-select (with score fusion) →
/// eval-froc. Writes run_manifest.json and returns it.
Json run_pipeline(const StageContext& ctx);

}  // namespace lens
