#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lens/errors.hpp"
#include "lens/ingest.hpp"
#include "lens/records.hpp"
#include "lens/rng.hpp"

using namespace lens;

namespace {

std::filesystem::path tmp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("lens_ingest_" + name);
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

VolumeMeta meta_with_spacing(double px_mm, double z_mm, int slices = 10) {
    VolumeMeta m;
    m.volume_id = "V1";
    m.patient_id = "P01";
    m.study_id = "P01.ST01";
    m.series_id = "SE01";
    m.num_slices = slices;
    m.pixel_spacing_mm = px_mm;
    m.slice_interval_mm = z_mm;
    return m;
}

}  // namespace

TEST_CASE("window_intensity: linear map with clamping") {
    CHECK(window_intensity(-1024.0) == 0.0);
    CHECK(window_intensity(3071.0) == 255.0);
    CHECK(window_intensity(1023.5) == 127.5);  // exact midpoint
    CHECK(window_intensity(0.0) == doctest::Approx(1024.0 * 255.0 / 4095.0));
    CHECK(window_intensity(-2000.0) == 0.0);
    CHECK(window_intensity(5000.0) == 255.0);

    double prev = -1;
    for (double hu = -1100; hu <= 3100; hu += 25) {
        double w = window_intensity(hu);
        CHECK(w >= 0.0);
        CHECK(w <= 255.0);
        CHECK(w >= prev);
        prev = w;
    }
}

TEST_CASE("normalize_geometry: reference spacing is the identity") {
    VolumeMeta m = meta_with_spacing(0.8, 2.0, 37);
    CHECK(m.is_reference_spacing());
    VolumeMeta out = normalize_geometry(m);
    CHECK(out.num_slices == 37);
    CHECK(out.is_reference_spacing());

    Box2D b{50.5, 60.25, 20, 10};
    Box2D nb = normalize_geometry(m, b);
    CHECK(nb.cx == 50.5);
    CHECK(nb.cy == 60.25);
    CHECK(nb.w == 20);
    CHECK(nb.h == 10);
    CHECK(normalize_slice_index(m, 7) == 7);
}

TEST_CASE("normalize_geometry: doubling spacing doubles coordinates") {
    VolumeMeta m = meta_with_spacing(1.6, 4.0, 10);
    GeometryScale s = normalization_scale(m);
    CHECK(s.xy == doctest::Approx(2.0));
    CHECK(s.z == doctest::Approx(2.0));

    Box2D nb = normalize_geometry(m, Box2D{50, 60, 20, 10});
    CHECK(nb.cx == doctest::Approx(100));
    CHECK(nb.cy == doctest::Approx(120));
    CHECK(nb.w == doctest::Approx(40));
    CHECK(nb.h == doctest::Approx(20));

    VolumeMeta out = normalize_geometry(m);
    CHECK(out.num_slices == 20);
    CHECK(out.pixel_spacing_mm == kReferencePixelSpacingMm);
    CHECK(out.slice_interval_mm == kReferenceSliceIntervalMm);
    CHECK(normalize_slice_index(m, 3) == 6);
}

TEST_CASE("normalize_geometry: fine axial sampling halves the slice count") {
    VolumeMeta m = meta_with_spacing(0.8, 1.0, 10);
    VolumeMeta out = normalize_geometry(m);
    CHECK(out.num_slices == 5);
    CHECK(normalize_slice_index(m, 0) == 0);
    CHECK(normalize_slice_index(m, 1) == 0);
    CHECK(normalize_slice_index(m, 2) == 1);
    CHECK(normalize_slice_index(m, 3) == 1);
    CHECK(normalize_slice_index(m, 9) == 4);

    Box3D nb = normalize_geometry(m, Box3D{10, 20, 30, 40, 4, 9});
    CHECK(nb.cx == 10);
    CHECK(nb.z_min == 2);
    CHECK(nb.z_max == 4);
}

TEST_CASE("normalize_geometry: rejects non-positive spacing") {
    CHECK_THROWS_AS(normalization_scale(meta_with_spacing(0.0, 2.0)), ConfigError);
    CHECK_THROWS_AS(normalize_geometry(meta_with_spacing(0.8, -1.0)), ConfigError);
    CHECK_THROWS_AS(normalize_geometry(meta_with_spacing(-0.8, 2.0), Box2D{1, 1, 1, 1}),
                    ConfigError);
    CHECK_THROWS_AS(normalize_slice_index(meta_with_spacing(0.8, 0.0), 3), ConfigError);
}

TEST_CASE("normalize_geometry: uniform scaling preserves IoU") {
    VolumeMeta m = meta_with_spacing(1.25, 2.5);
    Rng rng(12);
    for (int i = 0; i < 100; ++i) {
        Box2D a{rng.uniform(50, 400), rng.uniform(50, 400), rng.uniform(5, 80),
                rng.uniform(5, 80)};
        Box2D b{a.cx + rng.uniform(-40, 40), a.cy + rng.uniform(-40, 40), rng.uniform(5, 80),
                rng.uniform(5, 80)};
        double before = iou_2d(a, b);
        double after = iou_2d(normalize_geometry(m, a), normalize_geometry(m, b));
        CHECK(after == doctest::Approx(before).epsilon(1e-12));
    }
}

TEST_CASE("tensor io: bit-exact round trip") {
    Tensor t;
    t.dims = {3, 4, 5};
    t.data.resize(60);
    for (size_t i = 0; i < t.data.size(); ++i) t.data[i] = float(i) * 0.25f - 3.75f;

    auto path = tmp_path("roundtrip.tnsr");
    write_tensor(path, t);
    Tensor r = read_tensor(path);
    CHECK(r.dims == t.dims);
    CHECK(r.data == t.data);  // exact float comparison on purpose
    std::filesystem::remove(path);
}

TEST_CASE("tensor io: scalar and empty tensors") {
    Tensor scalar;  // rank 0: one element
    scalar.data = {42.5f};
    auto p1 = tmp_path("scalar.tnsr");
    write_tensor(p1, scalar);
    Tensor r1 = read_tensor(p1);
    CHECK(r1.dims.empty());
    REQUIRE(r1.data.size() == 1);
    CHECK(r1.data[0] == 42.5f);
    std::filesystem::remove(p1);

    Tensor empty = Tensor::zeros({4, 0, 7});
    CHECK(empty.element_count() == 0);
    auto p2 = tmp_path("empty.tnsr");
    write_tensor(p2, empty);
    Tensor r2 = read_tensor(p2);
    CHECK(r2.dims == std::vector<uint64_t>{4, 0, 7});
    CHECK(r2.data.empty());
    std::filesystem::remove(p2);
}

TEST_CASE("tensor io: malformed files are rejected") {
    CHECK_THROWS_AS(read_tensor(tmp_path("does_not_exist.tnsr")), FormatError);

    Tensor t = Tensor::zeros({2, 2});
    CHECK_THROWS_AS(write_tensor(tmp_path("bad.tnsr"), [&] {
                        Tensor broken = t;
                        broken.data.pop_back();
                        return broken;
                    }()),
                    FormatError);

    auto craft = [&](const std::string& name, auto writer) {
        auto path = tmp_path(name);
        std::ofstream out(path, std::ios::binary);
        writer(out);
        out.close();
        return path;
    };

    SUBCASE("bad magic") {
        auto p = craft("magic.tnsr", [](std::ofstream& out) { out << "NOTLENS!xxxxxxxx"; });
        CHECK_THROWS_AS(read_tensor(p), FormatError);
        std::filesystem::remove(p);
    }

    SUBCASE("unsupported version") {
        auto p = craft("version.tnsr", [](std::ofstream& out) {
            out.write("LENSTNSR", 8);
            uint32_t version = 2, rank = 0;
            out.write(reinterpret_cast<const char*>(&version), 4);
            out.write(reinterpret_cast<const char*>(&rank), 4);
        });
        CHECK_THROWS_AS(read_tensor(p), FormatError);
        std::filesystem::remove(p);
    }

    SUBCASE("implausible rank") {
        auto p = craft("rank.tnsr", [](std::ofstream& out) {
            out.write("LENSTNSR", 8);
            uint32_t version = 1, rank = 9;
            out.write(reinterpret_cast<const char*>(&version), 4);
            out.write(reinterpret_cast<const char*>(&rank), 4);
        });
        CHECK_THROWS_AS(read_tensor(p), FormatError);
        std::filesystem::remove(p);
    }

    SUBCASE("truncated dims") {
        auto p = craft("dims.tnsr", [](std::ofstream& out) {
            out.write("LENSTNSR", 8);
            uint32_t version = 1, rank = 2;
            uint64_t d0 = 3;
            out.write(reinterpret_cast<const char*>(&version), 4);
            out.write(reinterpret_cast<const char*>(&rank), 4);
            out.write(reinterpret_cast<const char*>(&d0), 8);  // second dim missing
        });
        CHECK_THROWS_AS(read_tensor(p), FormatError);
        std::filesystem::remove(p);
    }

    SUBCASE("truncated payload") {
        auto p = tmp_path("payload.tnsr");
        write_tensor(p, Tensor::zeros({4, 4}));
        std::string bytes = slurp(p);
        bytes.resize(bytes.size() - 2);
        std::ofstream(p, std::ios::binary) << bytes;
        CHECK_THROWS_AS(read_tensor(p), FormatError);
        std::filesystem::remove(p);
    }
}

TEST_CASE("record streams: header contract") {
    auto path = tmp_path("header.jsonl");

    SUBCASE("writer emits the header; reader parses it") {
        RecordWriter w(path, kind::annotation, "deadbeefdeadbeef");
        w.close();
        RecordReader r(path);
        CHECK(r.header().schema_version == kSchemaVersion);
        CHECK(r.header().kind == kind::annotation);
        CHECK(r.header().config_hash == "deadbeefdeadbeef");
        CHECK_FALSE(r.next().has_value());
    }

    SUBCASE("kind mismatch is a format error") {
        RecordWriter w(path, kind::proposal, "h");
        w.close();
        CHECK_THROWS_AS(read_records(path, kind::annotation), FormatError);
    }

    SUBCASE("missing, malformed, or future headers are format errors") {
        std::ofstream(path, std::ios::binary) << "";
        CHECK_THROWS_AS(RecordReader{path}, FormatError);
        std::ofstream(path, std::ios::binary) << "not json\n";
        CHECK_THROWS_AS(RecordReader{path}, FormatError);
        std::ofstream(path, std::ios::binary) << "[1,2]\n";
        CHECK_THROWS_AS(RecordReader{path}, FormatError);
        std::ofstream(path, std::ios::binary)
            << R"({"schema_version":2,"kind":"annotation","config_hash":"h"})" << "\n";
        CHECK_THROWS_AS(RecordReader{path}, FormatError);
        std::ofstream(path, std::ios::binary)
            << R"({"schema_version":1,"kind":"annotation"})" << "\n";
        CHECK_THROWS_AS(RecordReader{path}, FormatError);
    }

    SUBCASE("malformed record lines are format errors with position") {
        RecordWriter w(path, kind::annotation, "h");
        w.write(Json{{"ok", true}});
        w.close();
        std::ofstream(path, std::ios::binary | std::ios::app) << "{broken\n";
        RecordReader r(path);
        CHECK(r.next().has_value());
        CHECK_THROWS_AS(r.next(), FormatError);
    }

    SUBCASE("blank lines are skipped") {
        RecordWriter w(path, kind::annotation, "h");
        w.write(Json{{"a", 1}});
        w.close();
        std::ofstream(path, std::ios::binary | std::ios::app) << "\n\n";
        auto records = read_records(path, kind::annotation);
        CHECK(records.size() == 1);
    }

    std::filesystem::remove(path);
}

TEST_CASE("records: proposals round-trip losslessly at scale") {
    Rng rng(99);
    auto path = tmp_path("proposals.jsonl");
    std::vector<ProposalRecord> originals;
    {
        RecordWriter w(path, kind::proposal, "cafe0123cafe0123");
        for (int i = 0; i < 1000; ++i) {
            ProposalRecord p;
            p.volume_id = "P" + std::to_string(i % 7) + ".ST01.SE01";
            p.box.box = Box2D{rng.uniform(0, 512), rng.uniform(0, 512), rng.uniform(1, 60),
                              rng.uniform(1, 60)};
            p.box.score = rng.uniform01();
            p.box.slice = int(rng.uniform_int(0, 200));
            p.box.expert_id = "expert_" + std::to_string(i % 4);
            p.box.source_id = "src:" + std::to_string(i);
            if (i % 3 == 0) {
                std::vector<float> e(16);
                for (auto& v : e) v = float(rng.normal());
                p.box.embedding = e;
            }
            originals.push_back(p);
            w.write(proposal_to_record(p));
        }
        w.close();
    }

    auto records = read_records(path, kind::proposal);
    REQUIRE(records.size() == originals.size());
    for (size_t i = 0; i < records.size(); ++i) {
        ProposalRecord p = proposal_from_record(records[i]);
        const ProposalRecord& o = originals[i];
        CHECK(p.volume_id == o.volume_id);
        CHECK(p.box.box.cx == o.box.box.cx);
        CHECK(p.box.box.cy == o.box.box.cy);
        CHECK(p.box.box.w == o.box.box.w);
        CHECK(p.box.box.h == o.box.box.h);
        CHECK(p.box.score == o.box.score);
        CHECK(p.box.slice == o.box.slice);
        CHECK(p.box.expert_id == o.box.expert_id);
        CHECK(p.box.source_id == o.box.source_id);
        CHECK(p.box.embedding == o.box.embedding);
    }
    std::filesystem::remove(path);
}

TEST_CASE("records: unknown fields survive a parse + re-emit cycle byte-for-byte") {
    Annotation a;
    a.lesion_id = "P01:L2";
    a.patient_id = "P01";
    a.study_id = "P01.ST01";
    a.series_id = "SE01";
    a.volume_id = "P01.ST01.SE01";
    a.key_slice = 17;
    a.box = Box2D{101.25, 88.5, 24.75, 19.125};
    a.status = AnnotationStatus::mined;
    a.embedding = std::vector<float>{0.25f, -0.5f, 0.125f};

    Json extra = Json::object();
    extra["reader_note"] = "checked by radiologist 3";
    extra["variance"] = 0.125;
    extra["tags"] = Json::array({"follow-up", "small"});

    Json j1 = annotation_to_record(a, extra);
    Json got_extra;
    Annotation a2 = annotation_from_record(j1, &got_extra);
    Json j2 = annotation_to_record(a2, got_extra);
    CHECK(j1.dump() == j2.dump());
    CHECK(got_extra["reader_note"] == "checked by radiologist 3");

    // Same guarantee across a file written and filtered back out.
    auto path = tmp_path("filter_in.jsonl");
    auto path2 = tmp_path("filter_out.jsonl");
    {
        RecordWriter w(path, kind::annotation, "hashhashhashhash");
        w.write(j1);
        w.write(annotation_to_record(a));  // no extras
        w.close();
    }
    {
        RecordReader r(path);
        RecordWriter w(path2, r.header().kind, r.header().config_hash);
        while (auto rec = r.next()) {
            Json passthrough;
            Annotation parsed = annotation_from_record(*rec, &passthrough);
            w.write(annotation_to_record(parsed, passthrough));
        }
        w.close();
    }
    CHECK(slurp(path) == slurp(path2));
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}

TEST_CASE("records: every kind round-trips through its converters") {
    SUBCASE("volume_meta") {
        VolumeMeta m = meta_with_spacing(1.25, 2.5, 321);
        VolumeMeta r = volume_meta_from_record(volume_meta_to_record(m));
        CHECK(r.volume_id == m.volume_id);
        CHECK(r.patient_id == m.patient_id);
        CHECK(r.study_id == m.study_id);
        CHECK(r.series_id == m.series_id);
        CHECK(r.num_slices == m.num_slices);
        CHECK(r.pixel_spacing_mm == m.pixel_spacing_mm);
        CHECK(r.slice_interval_mm == m.slice_interval_mm);
    }

    SUBCASE("proposal3d with members") {
        Proposal3D p;
        p.volume_id = "V1";
        p.box = Box3D{55.5, 66.25, 20, 22, 4, 9};
        p.score = 0.875;
        p.expert_ids = {"a", "b"};
        for (int s = 4; s <= 9; ++s) {
            ScoredBox m;
            m.box = Box2D{55.5, 66.25, 20, 22};
            m.score = 0.5 + 0.05 * s;
            m.slice = s;
            m.expert_id = s % 2 ? "a" : "b";
            m.source_id = "m" + std::to_string(s);
            if (s == 5) m.embedding = std::vector<float>{1.0f, 0.0f};
            p.members.push_back(m);
        }
        Proposal3D r = proposal3d_from_record(proposal3d_to_record(p));
        CHECK(r.volume_id == p.volume_id);
        CHECK(r.box.cx == p.box.cx);
        CHECK(r.box.z_min == 4);
        CHECK(r.box.z_max == 9);
        CHECK(r.score == p.score);
        CHECK(r.expert_ids == p.expert_ids);
        REQUIRE(r.members.size() == p.members.size());
        for (size_t i = 0; i < r.members.size(); ++i) {
            CHECK(r.members[i].box.cx == p.members[i].box.cx);
            CHECK(r.members[i].score == p.members[i].score);
            CHECK(r.members[i].slice == p.members[i].slice);
            CHECK(r.members[i].source_id == p.members[i].source_id);
            CHECK(r.members[i].embedding == p.members[i].embedding);
        }
    }

    SUBCASE("scored_proposal3d") {
        ScoredProposal3D sp;
        sp.proposal.volume_id = "V2";
        sp.proposal.box = Box3D{10, 20, 30, 40, 1, 3};
        sp.proposal.score = 0.75;
        sp.fpr_score = 0.9;
        sp.fused_score = 0.825;
        ScoredProposal3D r = scored_proposal3d_from_record(scored_proposal3d_to_record(sp));
        CHECK(r.proposal.volume_id == "V2");
        CHECK(r.proposal.box.w == 30);
        CHECK(r.fpr_score == 0.9);
        CHECK(r.fused_score == 0.825);
    }

    SUBCASE("truth_lesion") {
        TruthLesionRecord t;
        t.volume_id = "V1";
        t.instance.lesion_id = "P01:L1";
        t.instance.lesion_type = "type_b";
        t.instance.key_slice = 12;
        t.instance.slices = {{11, Box2D{40, 40, 18, 18}}, {12, Box2D{40, 40, 20, 20}},
                             {13, Box2D{40, 40, 18, 18}}};
        t.instance.embedding = {0.0f, 1.0f};
        t.instance.visibility = Visibility::hidden;
        t.instance.annotated_slices = {};
        TruthLesionRecord r = truth_lesion_from_record(truth_lesion_to_record(t));
        CHECK(r.volume_id == "V1");
        CHECK(r.instance.lesion_id == "P01:L1");
        CHECK(r.instance.lesion_type == "type_b");
        CHECK(r.instance.key_slice == 12);
        REQUIRE(r.instance.slices.size() == 3);
        CHECK(r.instance.slices[1].box.w == 20);
        CHECK(r.instance.embedding == t.instance.embedding);
        CHECK(r.instance.visibility == Visibility::hidden);
        CHECK(r.instance.annotated_slices.empty());
    }

    SUBCASE("labelset") {
        TrainingLabelSet l;
        l.volume_id = "V1";
        l.negatives_requested = 3;
        l.negatives_taken = 2;
        SliceLabels pos;
        pos.slice = 7;
        pos.positive = true;
        Annotation a;
        a.lesion_id = "L1";
        a.patient_id = "P01";
        a.study_id = "S";
        a.series_id = "SE";
        a.volume_id = "V1";
        a.key_slice = 7;
        a.box = Box2D{30, 30, 10, 10};
        pos.certain.push_back(a);
        SliceLabels neg;
        neg.slice = 9;
        neg.positive = false;
        a.status = AnnotationStatus::uncertain;
        a.key_slice = 9;
        neg.ignore.push_back(a);
        l.slices = {pos, neg};

        TrainingLabelSet r = labelset_from_record(labelset_to_record(l));
        CHECK(r.volume_id == "V1");
        CHECK(r.negatives_requested == 3);
        CHECK(r.negatives_taken == 2);
        REQUIRE(r.slices.size() == 2);
        CHECK(r.slices[0].positive);
        REQUIRE(r.slices[0].certain.size() == 1);
        CHECK(r.slices[0].certain[0].box.cx == 30);
        CHECK_FALSE(r.slices[1].positive);
        REQUIRE(r.slices[1].ignore.size() == 1);
        CHECK(r.slices[1].ignore[0].status == AnnotationStatus::uncertain);
        CHECK(r.num_positive_slices() == 1);
    }

    SUBCASE("fpr_sample") {
        FprSample s;
        s.volume_id = "V1";
        s.label = FprLabel::tp;
        s.patch = PatchSpec{50, 60, 7.5, 20, 24, 6};
        s.proposal_score = 0.625;
        s.source_id = "V1:p3d:4";
        FprSample r = fpr_sample_from_record(fpr_sample_to_record(s));
        CHECK(r.volume_id == "V1");
        CHECK(r.label == FprLabel::tp);
        CHECK(r.patch.cx == 50);
        CHECK(r.patch.cz == 7.5);
        CHECK(r.patch.depth == 6);
        CHECK(r.proposal_score == 0.625);
        CHECK(r.source_id == "V1:p3d:4");
    }

    SUBCASE("missing required fields throw") {
        Json j = annotation_to_record(Annotation{});
        j.erase("key_slice");
        CHECK_THROWS_AS(annotation_from_record(j), FormatError);
        Json v = volume_meta_to_record(VolumeMeta{});
        v.erase("num_slices");
        CHECK_THROWS_AS(volume_meta_from_record(v), FormatError);
    }
}
