#include "lens/config.hpp"

#include <fstream>
#include <set>

#include "lens/errors.hpp"
#include "lens/rng.hpp"

namespace lens {

using Json = nlohmann::ordered_json;

namespace {

// Strict object walker: reports typos instead of silently ignoring them.
class Fields {
  public:
    Fields(const Json& j, std::string scope) : j_(j), scope_(std::move(scope)) {
        if (!j.is_object()) throw ConfigError(scope_ + " must be a JSON object");
    }
    ~Fields() = default;

    template <typename T>
    void get(const char* name, T& out) {
        seen_.insert(name);
        auto it = j_.find(name);
        if (it == j_.end()) return;  // keep default
        try {
            out = it->get<T>();
        } catch (const Json::exception&) {
            throw ConfigError(scope_ + "." + name + " has the wrong type");
        }
    }

    const Json* object(const char* name) {
        seen_.insert(name);
        auto it = j_.find(name);
        return it == j_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key()))
                throw ConfigError("unknown config key " + scope_ + "." + it.key());
    }

  private:
    const Json& j_;
    std::string scope_;
    std::set<std::string> seen_;
};

Json thresholds_to_json(const Thresholds& t) {
    Json j;
    j["theta"] = t.theta;
    j["delta"] = t.delta;
    j["sigma"] = t.sigma;
    j["theta_fp"] = t.theta_fp;
    j["nms_iou"] = t.nms_iou;
    j["iobb"] = t.iobb;
    j["r_c"] = t.r_c;
    j["r_i"] = t.r_i;
    j["lambda1"] = t.lambda1;
    j["lambda2"] = t.lambda2;
    j["fp_per_tp"] = t.fp_per_tp;
    j["pos_per_neg"] = t.pos_per_neg;
    j["fp_points"] = t.fp_points;
    return j;
}

Thresholds thresholds_from_json(const Json& j) {
    Thresholds t;
    Fields f(j, "thresholds");
    f.get("theta", t.theta);
    f.get("delta", t.delta);
    f.get("sigma", t.sigma);
    f.get("theta_fp", t.theta_fp);
    f.get("nms_iou", t.nms_iou);
    f.get("iobb", t.iobb);
    f.get("r_c", t.r_c);
    f.get("r_i", t.r_i);
    f.get("lambda1", t.lambda1);
    f.get("lambda2", t.lambda2);
    f.get("fp_per_tp", t.fp_per_tp);
    f.get("pos_per_neg", t.pos_per_neg);
    f.get("fp_points", t.fp_points);
    f.finish();
    return t;
}

Json decode_to_json(const DecodeParams& d) {
    Json j;
    j["stride"] = d.stride;
    j["score_threshold"] = d.score_threshold;
    j["top_k"] = d.top_k;
    return j;
}

DecodeParams decode_from_json(const Json& j) {
    DecodeParams d;
    Fields f(j, "decode");
    f.get("stride", d.stride);
    f.get("score_threshold", d.score_threshold);
    f.get("top_k", d.top_k);
    f.finish();
    return d;
}

Json cohort_to_json(const CohortSpec& c) {
    Json j;
    j["num_patients"] = c.num_patients;
    j["studies_per_patient"] = c.studies_per_patient;
    j["series_per_study"] = c.series_per_study;
    j["min_slices"] = c.min_slices;
    j["max_slices"] = c.max_slices;
    j["min_lesions_per_patient"] = c.min_lesions_per_patient;
    j["max_lesions_per_patient"] = c.max_lesions_per_patient;
    j["min_radius_px"] = c.min_radius_px;
    j["max_radius_px"] = c.max_radius_px;
    j["min_radius_slices"] = c.min_radius_slices;
    j["max_radius_slices"] = c.max_radius_slices;
    j["image_width"] = c.image_width;
    j["image_height"] = c.image_height;
    j["pixel_spacing_mm"] = c.pixel_spacing_mm;
    j["slice_interval_mm"] = c.slice_interval_mm;
    j["type_probs"] = c.type_probs;
    j["non_key_slice_hide_rate"] = c.non_key_slice_hide_rate;
    j["cross_study_hide_rate"] = c.cross_study_hide_rate;
    j["full_hide_rate"] = c.full_hide_rate;
    j["full_hide_specialty_only"] = c.full_hide_specialty_only;
    j["cross_study_jitter_px"] = c.cross_study_jitter_px;
    j["embed_dim"] = c.embed_dim;
    j["sigma_e"] = c.sigma_e;
    return j;
}

CohortSpec cohort_from_json(const Json& j) {
    CohortSpec c;
    Fields f(j, "cohort");
    f.get("num_patients", c.num_patients);
    f.get("studies_per_patient", c.studies_per_patient);
    f.get("series_per_study", c.series_per_study);
    f.get("min_slices", c.min_slices);
    f.get("max_slices", c.max_slices);
    f.get("min_lesions_per_patient", c.min_lesions_per_patient);
    f.get("max_lesions_per_patient", c.max_lesions_per_patient);
    f.get("min_radius_px", c.min_radius_px);
    f.get("max_radius_px", c.max_radius_px);
    f.get("min_radius_slices", c.min_radius_slices);
    f.get("max_radius_slices", c.max_radius_slices);
    f.get("image_width", c.image_width);
    f.get("image_height", c.image_height);
    f.get("pixel_spacing_mm", c.pixel_spacing_mm);
    f.get("slice_interval_mm", c.slice_interval_mm);
    f.get("type_probs", c.type_probs);
    f.get("non_key_slice_hide_rate", c.non_key_slice_hide_rate);
    f.get("cross_study_hide_rate", c.cross_study_hide_rate);
    f.get("full_hide_rate", c.full_hide_rate);
    f.get("full_hide_specialty_only", c.full_hide_specialty_only);
    f.get("cross_study_jitter_px", c.cross_study_jitter_px);
    f.get("embed_dim", c.embed_dim);
    f.get("sigma_e", c.sigma_e);
    f.finish();
    return c;
}

Json expert_to_json(const ExpertProfile& e) {
    Json j;
    j["expert_id"] = e.expert_id;
    j["specialty"] = e.specialty;
    j["sensitivity"] = e.sensitivity;
    j["off_specialty_sensitivity"] = e.off_specialty_sensitivity;
    j["jitter_px"] = e.jitter_px;
    j["fp_per_slice"] = e.fp_per_slice;
    j["tp_score_min"] = e.tp_score_min;
    j["tp_score_max"] = e.tp_score_max;
    j["fp_score_min"] = e.fp_score_min;
    j["fp_score_max"] = e.fp_score_max;
    return j;
}

ExpertProfile expert_from_json(const Json& j, int index) {
    ExpertProfile e;
    Fields f(j, "oracle.experts[" + std::to_string(index) + "]");
    f.get("expert_id", e.expert_id);
    f.get("specialty", e.specialty);
    f.get("sensitivity", e.sensitivity);
    f.get("off_specialty_sensitivity", e.off_specialty_sensitivity);
    f.get("jitter_px", e.jitter_px);
    f.get("fp_per_slice", e.fp_per_slice);
    f.get("tp_score_min", e.tp_score_min);
    f.get("tp_score_max", e.tp_score_max);
    f.get("fp_score_min", e.fp_score_min);
    f.get("fp_score_max", e.fp_score_max);
    f.finish();
    return e;
}

Json oracle_to_json(const OracleConfig& o) {
    Json j;
    Json experts = Json::array();
    for (const auto& e : o.experts) experts.push_back(expert_to_json(e));
    j["experts"] = experts;
    j["sigma_e"] = o.sigma_e;
    j["embed_dim"] = o.embed_dim;
    j["fp_box_min_px"] = o.fp_box_min_px;
    j["fp_box_max_px"] = o.fp_box_max_px;
    return j;
}

OracleConfig oracle_from_json(const Json& j) {
    OracleConfig o;
    Fields f(j, "oracle");
    if (const Json* experts = f.object("experts")) {
        if (!experts->is_array()) throw ConfigError("oracle.experts must be an array");
        o.experts.clear();
        int i = 0;
        for (const auto& e : *experts) o.experts.push_back(expert_from_json(e, i++));
    }
    f.get("sigma_e", o.sigma_e);
    f.get("embed_dim", o.embed_dim);
    f.get("fp_box_min_px", o.fp_box_min_px);
    f.get("fp_box_max_px", o.fp_box_max_px);
    f.finish();
    return o;
}

}  // namespace

std::vector<ExpertProfile> default_experts() {
    std::vector<ExpertProfile> experts;
    ExpertProfile universal;
    universal.expert_id = "universal";
    universal.specialty = "universal";
    universal.sensitivity = 0.6;
    universal.fp_per_slice = 0.1;
    universal.jitter_px = 0.5;
    experts.push_back(universal);
    for (const char* type : {"type_a", "type_b", "type_c"}) {
        ExpertProfile e;
        e.expert_id = std::string("expert_") + (type + 5);  // expert_a, ...
        e.specialty = type;
        e.sensitivity = 0.9;
        e.off_specialty_sensitivity = 0.0;
        e.fp_per_slice = 0.05;
        e.jitter_px = 0.5;
        experts.push_back(e);
    }
    return experts;
}

void validate(const PipelineConfig& config) {
    const Thresholds& t = config.thresholds;
    auto in_open_01 = [](double v) { return v > 0 && v < 1; };
    if (!in_open_01(t.theta) || !in_open_01(t.sigma) || !in_open_01(t.theta_fp) ||
        !in_open_01(t.nms_iou) || !in_open_01(t.iobb))
        throw ConfigError("ratio thresholds must lie in (0,1)");
    if (t.delta <= 0) throw ConfigError("delta must be positive");
    if (!(t.theta_fp < t.theta)) throw ConfigError("theta_fp must be smaller than theta");
    if (!(t.r_c > 0 && t.r_i > 0 && t.r_c <= t.r_i && t.r_i <= 1))
        throw ConfigError("need 0 < r_c <= r_i <= 1");
    if (t.lambda1 < 0 || t.lambda2 < 0) throw ConfigError("loss weights must be non-negative");
    if (t.fp_per_tp < 0) throw ConfigError("fp_per_tp must be non-negative");
    if (t.pos_per_neg <= 0) throw ConfigError("pos_per_neg must be positive");
    if (t.fp_points.empty()) throw ConfigError("fp_points must not be empty");
    for (double p : t.fp_points)
        if (p <= 0) throw ConfigError("fp_points must be positive");
    if (config.decode.stride <= 0) throw ConfigError("decode.stride must be positive");
    if (!(config.decode.score_threshold >= 0 && config.decode.score_threshold <= 1))
        throw ConfigError("decode.score_threshold must lie in [0,1]");
    if (config.decode.top_k < 1) throw ConfigError("decode.top_k must be >= 1");
    if (config.retrain_sensitivity_boost < 0 || config.retrain_sensitivity_boost > 1)
        throw ConfigError("retrain_sensitivity_boost must lie in [0,1]");
    validate(config.cohort);
    validate(config.oracle);
}

Json to_json(const PipelineConfig& config) {
    Json j;
    j["seed"] = config.seed;
    j["strict_froc"] = config.strict_froc;
    j["retrain_sensitivity_boost"] = config.retrain_sensitivity_boost;
    j["thresholds"] = thresholds_to_json(config.thresholds);
    j["decode"] = decode_to_json(config.decode);
    j["cohort"] = cohort_to_json(config.cohort);
    j["oracle"] = oracle_to_json(config.oracle);
    return j;
}

PipelineConfig config_from_json(const Json& j) {
    PipelineConfig c;
    Fields f(j, "config");
    f.get("seed", c.seed);
    f.get("strict_froc", c.strict_froc);
    f.get("retrain_sensitivity_boost", c.retrain_sensitivity_boost);
    if (const Json* t = f.object("thresholds")) c.thresholds = thresholds_from_json(*t);
    if (const Json* d = f.object("decode")) c.decode = decode_from_json(*d);
    if (const Json* co = f.object("cohort")) c.cohort = cohort_from_json(*co);
    if (const Json* o = f.object("oracle")) c.oracle = oracle_from_json(*o);
    f.finish();
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config: " + path.string());
    Json j = Json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config is not valid JSON: " + path.string());
    return config_from_json(j);
}

void save_config(const std::filesystem::path& path, const PipelineConfig& config) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open for writing: " + path.string());
    out << to_json(config).dump(2) << "\n";
}

std::string config_hash(const PipelineConfig& config) {
    uint64_t h = fnv1a64(to_json(config).dump());
    char buf[17];
    static const char* hex = "0123456789abcdef";
    for (int i = 0; i < 16; ++i) buf[15 - i] = hex[(h >> (4 * i)) & 0xf];
    buf[16] = '\0';
    return std::string(buf);
}

}  // namespace lens
