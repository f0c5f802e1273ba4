#include "lens/records.hpp"

#include <initializer_list>
#include <string_view>

#include "lens/errors.hpp"

namespace lens {

namespace {

Json collect_extras(const Json& j, std::initializer_list<std::string_view> known) {
    Json extra = Json::object();
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool is_known = false;
        for (auto k : known)
            if (it.key() == k) {
                is_known = true;
                break;
            }
        if (!is_known) extra[it.key()] = it.value();
    }
    return extra;
}

void merge_extra(Json& j, const Json& extra) {
    if (extra.is_null()) return;
    if (!extra.is_object()) throw FormatError("record extras must be a JSON object");
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
}

const Json& field(const Json& j, const char* name) {
    auto it = j.find(name);
    if (it == j.end()) throw FormatError(std::string("record missing field '") + name + "'");
    return *it;
}

std::vector<float> floats_from(const Json& j) {
    std::vector<float> v;
    v.reserve(j.size());
    for (const auto& x : j) v.push_back(x.get<float>());
    return v;
}

Json floats_to(const std::vector<float>& v) {
    Json j = Json::array();
    for (float x : v) j.push_back(double(x));
    return j;
}

Json scored_box_to_json(const ScoredBox& b) {
    Json j;
    j["slice"] = b.slice;
    j["box"] = box2d_to_json(b.box);
    j["score"] = b.score;
    j["expert_id"] = b.expert_id;
    j["source_id"] = b.source_id;
    if (b.embedding) j["embedding"] = floats_to(*b.embedding);
    return j;
}

ScoredBox scored_box_from_json(const Json& j) {
    ScoredBox b;
    b.slice = field(j, "slice").get<int>();
    b.box = box2d_from_json(field(j, "box"));
    b.score = field(j, "score").get<double>();
    b.expert_id = field(j, "expert_id").get<std::string>();
    b.source_id = field(j, "source_id").get<std::string>();
    if (auto it = j.find("embedding"); it != j.end()) b.embedding = floats_from(*it);
    return b;
}

}  // namespace

RecordWriter::RecordWriter(const std::filesystem::path& path, const std::string& kind,
                           const std::string& config_hash)
    : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw FormatError("cannot open for writing: " + path.string());
    Json header;
    header["schema_version"] = kSchemaVersion;
    header["kind"] = kind;
    header["config_hash"] = config_hash;
    out_ << header.dump() << "\n";
}

void RecordWriter::write(const Json& record) {
    out_ << record.dump() << "\n";
    if (!out_) throw FormatError("write failed: " + path_.string());
}

void RecordWriter::close() {
    if (out_.is_open()) {
        out_.flush();
        if (!out_) throw FormatError("write failed: " + path_.string());
        out_.close();
    }
}

RecordReader::RecordReader(const std::filesystem::path& path)
    : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw FormatError("cannot open: " + path.string());
    std::string line;
    if (!std::getline(in_, line)) throw FormatError("missing record header: " + path.string());
    Json h = Json::parse(line, nullptr, false);
    if (h.is_discarded() || !h.is_object())
        throw FormatError("malformed record header: " + path.string());
    header_.schema_version = field(h, "schema_version").get<int>();
    header_.kind = field(h, "kind").get<std::string>();
    header_.config_hash = field(h, "config_hash").get<std::string>();
    if (header_.schema_version != kSchemaVersion)
        throw FormatError("unsupported schema_version " +
                          std::to_string(header_.schema_version) + ": " + path.string());
}

std::optional<Json> RecordReader::next() {
    std::string line;
    while (std::getline(in_, line)) {
        ++line_no_;
        if (line.empty()) continue;
        Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw FormatError(path_.string() + ":" + std::to_string(line_no_) +
                              ": malformed record");
        return j;
    }
    return std::nullopt;
}

std::vector<Json> read_records(const std::filesystem::path& path,
                               const std::string& expected_kind) {
    RecordReader reader(path);
    if (reader.header().kind != expected_kind)
        throw FormatError(path.string() + ": expected kind '" + expected_kind + "', found '" +
                          reader.header().kind + "'");
    std::vector<Json> out;
    while (auto j = reader.next()) out.push_back(std::move(*j));
    return out;
}

Json box2d_to_json(const Box2D& b) {
    Json j;
    j["cx"] = b.cx;
    j["cy"] = b.cy;
    j["w"] = b.w;
    j["h"] = b.h;
    return j;
}

Box2D box2d_from_json(const Json& j) {
    Box2D b;
    b.cx = field(j, "cx").get<double>();
    b.cy = field(j, "cy").get<double>();
    b.w = field(j, "w").get<double>();
    b.h = field(j, "h").get<double>();
    return b;
}

Json volume_meta_to_record(const VolumeMeta& m, const Json& extra) {
    Json j;
    j["volume_id"] = m.volume_id;
    j["patient_id"] = m.patient_id;
    j["study_id"] = m.study_id;
    j["series_id"] = m.series_id;
    j["num_slices"] = m.num_slices;
    j["pixel_spacing_mm"] = m.pixel_spacing_mm;
    j["slice_interval_mm"] = m.slice_interval_mm;
    merge_extra(j, extra);
    return j;
}

VolumeMeta volume_meta_from_record(const Json& j, Json* extra) {
    VolumeMeta m;
    m.volume_id = field(j, "volume_id").get<std::string>();
    m.patient_id = field(j, "patient_id").get<std::string>();
    m.study_id = field(j, "study_id").get<std::string>();
    m.series_id = field(j, "series_id").get<std::string>();
    m.num_slices = field(j, "num_slices").get<int>();
    m.pixel_spacing_mm = field(j, "pixel_spacing_mm").get<double>();
    m.slice_interval_mm = field(j, "slice_interval_mm").get<double>();
    if (extra)
        *extra = collect_extras(j, {"volume_id", "patient_id", "study_id", "series_id",
                                    "num_slices", "pixel_spacing_mm", "slice_interval_mm"});
    return m;
}

Json annotation_to_record(const Annotation& a, const Json& extra) {
    Json j;
    j["lesion_id"] = a.lesion_id;
    j["patient_id"] = a.patient_id;
    j["study_id"] = a.study_id;
    j["series_id"] = a.series_id;
    j["volume_id"] = a.volume_id;
    j["key_slice"] = a.key_slice;
    j["box"] = box2d_to_json(a.box);
    j["status"] = to_string(a.status);
    if (a.embedding) j["embedding"] = floats_to(*a.embedding);
    merge_extra(j, extra);
    return j;
}

Annotation annotation_from_record(const Json& j, Json* extra) {
    Annotation a;
    a.lesion_id = field(j, "lesion_id").get<std::string>();
    a.patient_id = field(j, "patient_id").get<std::string>();
    a.study_id = field(j, "study_id").get<std::string>();
    a.series_id = field(j, "series_id").get<std::string>();
    a.volume_id = field(j, "volume_id").get<std::string>();
    a.key_slice = field(j, "key_slice").get<int>();
    a.box = box2d_from_json(field(j, "box"));
    a.status = annotation_status_from_string(field(j, "status").get<std::string>());
    if (auto it = j.find("embedding"); it != j.end()) a.embedding = floats_from(*it);
    if (extra)
        *extra = collect_extras(j, {"lesion_id", "patient_id", "study_id", "series_id",
                                    "volume_id", "key_slice", "box", "status", "embedding"});
    return a;
}

Json proposal_to_record(const ProposalRecord& p, const Json& extra) {
    Json j;
    j["volume_id"] = p.volume_id;
    Json sb = scored_box_to_json(p.box);
    for (auto it = sb.begin(); it != sb.end(); ++it) j[it.key()] = it.value();
    merge_extra(j, extra);
    return j;
}

ProposalRecord proposal_from_record(const Json& j, Json* extra) {
    ProposalRecord p;
    p.volume_id = field(j, "volume_id").get<std::string>();
    p.box = scored_box_from_json(j);
    if (extra)
        *extra = collect_extras(
            j, {"volume_id", "slice", "box", "score", "expert_id", "source_id", "embedding"});
    return p;
}

Json proposal3d_to_record(const Proposal3D& p, const Json& extra) {
    Json j;
    j["volume_id"] = p.volume_id;
    Json box;
    box["cx"] = p.box.cx;
    box["cy"] = p.box.cy;
    box["w"] = p.box.w;
    box["h"] = p.box.h;
    box["z_min"] = p.box.z_min;
    box["z_max"] = p.box.z_max;
    j["box"] = box;
    j["score"] = p.score;
    j["expert_ids"] = p.expert_ids;
    Json members = Json::array();
    for (const auto& m : p.members) members.push_back(scored_box_to_json(m));
    j["members"] = members;
    merge_extra(j, extra);
    return j;
}

Proposal3D proposal3d_from_record(const Json& j, Json* extra) {
    Proposal3D p;
    p.volume_id = field(j, "volume_id").get<std::string>();
    const Json& box = field(j, "box");
    p.box.cx = field(box, "cx").get<double>();
    p.box.cy = field(box, "cy").get<double>();
    p.box.w = field(box, "w").get<double>();
    p.box.h = field(box, "h").get<double>();
    p.box.z_min = field(box, "z_min").get<int>();
    p.box.z_max = field(box, "z_max").get<int>();
    p.score = field(j, "score").get<double>();
    p.expert_ids = field(j, "expert_ids").get<std::vector<std::string>>();
    for (const auto& m : field(j, "members")) p.members.push_back(scored_box_from_json(m));
    if (extra)
        *extra = collect_extras(j, {"volume_id", "box", "score", "expert_ids", "members"});
    return p;
}

Json scored_proposal3d_to_record(const ScoredProposal3D& p, const Json& extra) {
    Json j = proposal3d_to_record(p.proposal);
    j["fpr_score"] = p.fpr_score;
    j["fused_score"] = p.fused_score;
    merge_extra(j, extra);
    return j;
}

ScoredProposal3D scored_proposal3d_from_record(const Json& j, Json* extra) {
    ScoredProposal3D p;
    p.proposal = proposal3d_from_record(j);
    p.fpr_score = field(j, "fpr_score").get<double>();
    p.fused_score = field(j, "fused_score").get<double>();
    if (extra)
        *extra = collect_extras(j, {"volume_id", "box", "score", "expert_ids", "members",
                                    "fpr_score", "fused_score"});
    return p;
}

Json truth_lesion_to_record(const TruthLesionRecord& t, const Json& extra) {
    Json j;
    j["volume_id"] = t.volume_id;
    j["lesion_id"] = t.instance.lesion_id;
    j["lesion_type"] = t.instance.lesion_type;
    j["key_slice"] = t.instance.key_slice;
    Json slices = Json::array();
    for (const auto& s : t.instance.slices) {
        Json sj;
        sj["slice"] = s.slice;
        sj["box"] = box2d_to_json(s.box);
        slices.push_back(sj);
    }
    j["slices"] = slices;
    j["embedding"] = floats_to(t.instance.embedding);
    j["visibility"] = t.instance.visibility == Visibility::annotated ? "annotated" : "hidden";
    j["annotated_slices"] = t.instance.annotated_slices;
    merge_extra(j, extra);
    return j;
}

TruthLesionRecord truth_lesion_from_record(const Json& j, Json* extra) {
    TruthLesionRecord t;
    t.volume_id = field(j, "volume_id").get<std::string>();
    t.instance.lesion_id = field(j, "lesion_id").get<std::string>();
    t.instance.lesion_type = field(j, "lesion_type").get<std::string>();
    t.instance.key_slice = field(j, "key_slice").get<int>();
    for (const auto& s : field(j, "slices")) {
        SliceBoxRef ref;
        ref.slice = field(s, "slice").get<int>();
        ref.box = box2d_from_json(field(s, "box"));
        t.instance.slices.push_back(ref);
    }
    t.instance.embedding = floats_from(field(j, "embedding"));
    std::string vis = field(j, "visibility").get<std::string>();
    if (vis == "annotated")
        t.instance.visibility = Visibility::annotated;
    else if (vis == "hidden")
        t.instance.visibility = Visibility::hidden;
    else
        throw FormatError("unknown visibility: " + vis);
    t.instance.annotated_slices = field(j, "annotated_slices").get<std::vector<int>>();
    if (extra)
        *extra = collect_extras(j, {"volume_id", "lesion_id", "lesion_type", "key_slice",
                                    "slices", "embedding", "visibility", "annotated_slices"});
    return t;
}

Json labelset_to_record(const TrainingLabelSet& l, const Json& extra) {
    Json j;
    j["volume_id"] = l.volume_id;
    j["negatives_requested"] = l.negatives_requested;
    j["negatives_taken"] = l.negatives_taken;
    Json slices = Json::array();
    for (const auto& s : l.slices) {
        Json sj;
        sj["slice"] = s.slice;
        sj["positive"] = s.positive;
        Json certain = Json::array();
        for (const auto& a : s.certain) certain.push_back(annotation_to_record(a));
        sj["certain"] = certain;
        Json ignore = Json::array();
        for (const auto& a : s.ignore) ignore.push_back(annotation_to_record(a));
        sj["ignore"] = ignore;
        slices.push_back(sj);
    }
    j["slices"] = slices;
    merge_extra(j, extra);
    return j;
}

TrainingLabelSet labelset_from_record(const Json& j, Json* extra) {
    TrainingLabelSet l;
    l.volume_id = field(j, "volume_id").get<std::string>();
    l.negatives_requested = field(j, "negatives_requested").get<int>();
    l.negatives_taken = field(j, "negatives_taken").get<int>();
    for (const auto& s : field(j, "slices")) {
        SliceLabels sl;
        sl.slice = field(s, "slice").get<int>();
        sl.positive = field(s, "positive").get<bool>();
        for (const auto& a : field(s, "certain")) sl.certain.push_back(annotation_from_record(a));
        for (const auto& a : field(s, "ignore")) sl.ignore.push_back(annotation_from_record(a));
        l.slices.push_back(std::move(sl));
    }
    if (extra)
        *extra = collect_extras(
            j, {"volume_id", "negatives_requested", "negatives_taken", "slices"});
    return l;
}

Json fpr_sample_to_record(const FprSample& s, const Json& extra) {
    Json j;
    j["volume_id"] = s.volume_id;
    j["label"] = to_string(s.label);
    Json patch;
    patch["cx"] = s.patch.cx;
    patch["cy"] = s.patch.cy;
    patch["cz"] = s.patch.cz;
    patch["width"] = s.patch.width;
    patch["height"] = s.patch.height;
    patch["depth"] = s.patch.depth;
    j["patch"] = patch;
    j["proposal_score"] = s.proposal_score;
    j["source_id"] = s.source_id;
    merge_extra(j, extra);
    return j;
}

FprSample fpr_sample_from_record(const Json& j, Json* extra) {
    FprSample s;
    s.volume_id = field(j, "volume_id").get<std::string>();
    s.label = fpr_label_from_string(field(j, "label").get<std::string>());
    const Json& patch = field(j, "patch");
    s.patch.cx = field(patch, "cx").get<double>();
    s.patch.cy = field(patch, "cy").get<double>();
    s.patch.cz = field(patch, "cz").get<double>();
    s.patch.width = field(patch, "width").get<double>();
    s.patch.height = field(patch, "height").get<double>();
    s.patch.depth = field(patch, "depth").get<double>();
    s.proposal_score = field(j, "proposal_score").get<double>();
    s.source_id = field(j, "source_id").get<std::string>();
    if (extra)
        *extra = collect_extras(j, {"volume_id", "label", "patch", "proposal_score", "source_id"});
    return s;
}

}  // namespace lens
