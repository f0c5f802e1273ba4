#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lens/ensemble.hpp"
#include "lens/fpr.hpp"
#include "lens/ingest.hpp"
#include "lens/mining.hpp"
#include "lens/synth.hpp"

namespace lens {

// All structured pipeline data travels as line-delimited JSON: one header
// line {"schema_version", "kind", "config_hash"} followed by one object per
// line. Keys use insertion order so identical data serializes identically.
using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

namespace kind {
inline constexpr const char* volume_meta = "volume_meta";
inline constexpr const char* truth_lesion = "truth_lesion";
inline constexpr const char* annotation = "annotation";
inline constexpr const char* proposal = "proposal";
inline constexpr const char* proposal3d = "proposal3d";
inline constexpr const char* labelset = "labelset";
inline constexpr const char* fpr_sample = "fpr_sample";
inline constexpr const char* scored_proposal3d = "scored_proposal3d";
}  // namespace kind

struct RecordHeader {
    int schema_version = kSchemaVersion;
    std::string kind;
    std::string config_hash;
};

class RecordWriter {
  public:
    RecordWriter(const std::filesystem::path& path, const std::string& kind,
                 const std::string& config_hash);
    void write(const Json& record);
    void close();

  private:
    std::ofstream out_;
    std::filesystem::path path_;
};

class RecordReader {
  public:
    explicit RecordReader(const std::filesystem::path& path);
    const RecordHeader& header() const { return header_; }
    std::optional<Json> next();  // nullopt at end of stream

  private:
    std::ifstream in_;
    std::filesystem::path path_;
    RecordHeader header_;
    int line_no_ = 1;
};

std::vector<Json> read_records(const std::filesystem::path& path,
                               const std::string& expected_kind);

// struct <-> record conversions. Writers emit known fields in a fixed order
// and then merge `extra`; readers hand unrecognized fields back through
// `extra` so filters can round-trip records they do not fully understand.

Json box2d_to_json(const Box2D& b);
Box2D box2d_from_json(const Json& j);

Json volume_meta_to_record(const VolumeMeta& m, const Json& extra = Json::object());
VolumeMeta volume_meta_from_record(const Json& j, Json* extra = nullptr);

Json annotation_to_record(const Annotation& a, const Json& extra = Json::object());
Annotation annotation_from_record(const Json& j, Json* extra = nullptr);

struct ProposalRecord {
    std::string volume_id;
    ScoredBox box;
};
Json proposal_to_record(const ProposalRecord& p, const Json& extra = Json::object());
ProposalRecord proposal_from_record(const Json& j, Json* extra = nullptr);

Json proposal3d_to_record(const Proposal3D& p, const Json& extra = Json::object());
Proposal3D proposal3d_from_record(const Json& j, Json* extra = nullptr);

struct ScoredProposal3D {
    Proposal3D proposal;
    double fpr_score = 0;
    double fused_score = 0;
};
Json scored_proposal3d_to_record(const ScoredProposal3D& p, const Json& extra = Json::object());
ScoredProposal3D scored_proposal3d_from_record(const Json& j, Json* extra = nullptr);

struct TruthLesionRecord {
    std::string volume_id;
    LesionInstance instance;
};
Json truth_lesion_to_record(const TruthLesionRecord& t, const Json& extra = Json::object());
TruthLesionRecord truth_lesion_from_record(const Json& j, Json* extra = nullptr);

Json labelset_to_record(const TrainingLabelSet& l, const Json& extra = Json::object());
TrainingLabelSet labelset_from_record(const Json& j, Json* extra = nullptr);

Json fpr_sample_to_record(const FprSample& s, const Json& extra = Json::object());
FprSample fpr_sample_from_record(const Json& j, Json* extra = nullptr);

}  // namespace lens
