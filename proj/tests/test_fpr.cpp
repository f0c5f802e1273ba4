#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <string>
#include <vector>

#include "lens/errors.hpp"
#include "lens/fpr.hpp"
#include "lens/geometry.hpp"
#include "lens/mining.hpp"

using namespace lens;

namespace {

Proposal3D proposal(std::string volume, double cx, double cy, double w, double h,
                    int z_min, int z_max, double score) {
    Proposal3D p;
    p.box = Box3D{cx, cy, w, h, z_min, z_max};
    p.score = score;
    p.volume_id = volume;
    p.expert_ids = {"e1"};
    for (int s = z_min; s <= z_max; ++s) {
        ScoredBox m;
        m.box = Box2D{cx, cy, w, h};
        m.score = score;
        m.slice = s;
        m.expert_id = "e1";
        p.members.push_back(std::move(m));
    }
    return p;
}

Annotation ann(std::string volume, int key_slice, Box2D box,
               AnnotationStatus status = AnnotationStatus::original) {
    Annotation a;
    a.lesion_id = "L1";
    a.patient_id = "P01";
    a.volume_id = std::move(volume);
    a.key_slice = key_slice;
    a.box = box;
    a.status = status;
    return a;
}

// A box at controlled IoU against (50,50,20,20): shift along x so that
// overlap = 400*iou/( ... ); solved for the common w=h=20 case.
Box2D box_with_iou(double target_iou) {
    // For two 20x20 boxes offset by dx: IoU = (20-dx)*20 / (800 - (20-dx)*20).
    // Solve for dx given IoU v: overlap_w = 40*v/(1+v).
    double overlap_w = 40.0 * target_iou / (1.0 + target_iou);
    return Box2D{50.0 + (20.0 - overlap_w), 50.0, 20, 20};
}

}  // namespace

TEST_CASE("patch_from_proposal: center, extent, and depth") {
    Proposal3D p = proposal("V1", 50, 60, 20, 30, 4, 9, 0.8);
    PatchSpec spec = patch_from_proposal(p);
    CHECK(spec.cx == 50);
    CHECK(spec.cy == 60);
    CHECK(spec.cz == doctest::Approx(6.5));
    CHECK(spec.width == 20);
    CHECK(spec.height == 30);
    CHECK(spec.depth == 6);
}

TEST_CASE("select_fpr_samples: banded TP/FP split") {
    std::vector<Annotation> anns = {ann("V1", 5, Box2D{50, 50, 20, 20})};

    SUBCASE("key-slice IoU 0.6 against a certain annotation is a TP") {
        Proposal3D p = proposal("V1", 0, 0, 20, 20, 4, 6, 0.9);
        p.members[1].box = box_with_iou(0.6);
        auto samples = select_fpr_samples({p}, anns, 0.5, 0.3, 2.0, 1);
        REQUIRE(samples.size() == 1);
        CHECK(samples[0].label == FprLabel::tp);
        CHECK(samples[0].volume_id == "V1");
        CHECK(samples[0].proposal_score == 0.9);
        CHECK(samples[0].source_id == "V1:p3d:0");
    }

    // The FP budget scales with the TP count, so FP-expecting cases carry an
    // exact-match TP anchor alongside the probe.
    Proposal3D tp_anchor = proposal("V1", 50, 50, 20, 20, 5, 5, 0.95);

    SUBCASE("all member IoUs at 0.2 make an FP") {
        Proposal3D p = proposal("V1", 0, 0, 20, 20, 4, 6, 0.4);
        p.members[1].box = box_with_iou(0.2);
        auto samples = select_fpr_samples({tp_anchor, p}, anns, 0.5, 0.3, 1000.0, 1);
        REQUIRE(samples.size() == 2);
        CHECK(samples[0].label == FprLabel::tp);
        CHECK(samples[1].label == FprLabel::fp);
        CHECK(samples[1].source_id == "V1:p3d:1");
    }

    SUBCASE("a member IoU of 0.4 lands in the ambiguous band and is discarded") {
        Proposal3D p = proposal("V1", 0, 0, 20, 20, 4, 6, 0.4);
        p.members[1].box = box_with_iou(0.4);
        auto samples = select_fpr_samples({tp_anchor, p}, anns, 0.5, 0.3, 1000.0, 1);
        REQUIRE(samples.size() == 1);  // open budget, yet the probe is gone
        CHECK(samples[0].label == FprLabel::tp);
    }

    SUBCASE("high overlap on a non-key slice does not make a TP") {
        // Same box as the TP case but the annotation's key slice is elsewhere.
        std::vector<Annotation> off_key = {ann("V1", 20, Box2D{50, 50, 20, 20})};
        Proposal3D anchor = proposal("V1", 50, 50, 20, 20, 20, 20, 0.95);
        Proposal3D p = proposal("V1", 0, 0, 20, 20, 4, 6, 0.9);
        p.members[1].box = box_with_iou(0.6);
        auto samples = select_fpr_samples({anchor, p}, off_key, 0.5, 0.3, 1000.0, 1);
        REQUIRE(samples.size() == 2);
        CHECK(samples[1].label == FprLabel::fp);  // probe members never touch slice 20
    }

    SUBCASE("a proposal riding an uncertain box is neither TP nor FP") {
        std::vector<Annotation> with_unc = anns;
        with_unc.push_back(ann("V1", 8, Box2D{200, 200, 20, 20}, AnnotationStatus::uncertain));
        Proposal3D p = proposal("V1", 200, 200, 20, 20, 8, 8, 0.7);
        // The TP anchor keeps the FP budget open, so an FP-classified probe
        // could not hide behind downsampling.
        auto samples = select_fpr_samples({tp_anchor, p}, with_unc, 0.5, 0.3, 1000.0, 1);
        REQUIRE(samples.size() == 1);
        CHECK(samples[0].label == FprLabel::tp);
    }

    SUBCASE("mined annotations count as certain for the TP test") {
        std::vector<Annotation> mined_only = {
            ann("V1", 5, Box2D{50, 50, 20, 20}, AnnotationStatus::mined)};
        Proposal3D p = proposal("V1", 50, 50, 20, 20, 5, 5, 0.9);
        auto samples = select_fpr_samples({p}, mined_only, 0.5, 0.3, 2.0, 1);
        REQUIRE(samples.size() == 1);
        CHECK(samples[0].label == FprLabel::tp);
    }

    SUBCASE("annotations in other volumes are invisible") {
        // Identical geometry to the V1 TP anchor, but in volume V2: the V1
        // annotation neither confirms it nor blocks it from the FP pool.
        Proposal3D p = proposal("V2", 50, 50, 20, 20, 5, 5, 0.9);
        auto samples = select_fpr_samples({tp_anchor, p}, anns, 0.5, 0.3, 1000.0, 1);
        REQUIRE(samples.size() == 2);
        CHECK(samples[0].label == FprLabel::tp);
        CHECK(samples[1].label == FprLabel::fp);
    }
}

TEST_CASE("select_fpr_samples: FP downsampling") {
    std::vector<Annotation> anns = {ann("V1", 5, Box2D{50, 50, 20, 20}),
                                    ann("V1", 15, Box2D{100, 100, 20, 20})};
    std::vector<Proposal3D> proposals;
    // Two clean TPs.
    proposals.push_back(proposal("V1", 50, 50, 20, 20, 5, 5, 0.9));
    proposals.push_back(proposal("V1", 100, 100, 20, 20, 15, 15, 0.85));
    // Twelve far-away FPs.
    for (int i = 0; i < 12; ++i)
        proposals.push_back(proposal("V1", 300 + 25.0 * i, 300, 20, 20, 2 * i, 2 * i, 0.3));

    SUBCASE("fp count is capped at floor(fp_per_tp * num_tp)") {
        auto samples = select_fpr_samples(proposals, anns, 0.5, 0.3, 2.0, 7);
        int tp = 0, fp = 0;
        for (const auto& s : samples) (s.label == FprLabel::tp ? tp : fp)++;
        CHECK(tp == 2);
        CHECK(fp == 4);  // floor(2.0 * 2)
    }

    SUBCASE("fractional budgets floor") {
        auto samples = select_fpr_samples(proposals, anns, 0.5, 0.3, 2.6, 7);
        int fp = 0;
        for (const auto& s : samples) fp += s.label == FprLabel::fp;
        CHECK(fp == 5);  // floor(2.6 * 2)
    }

    SUBCASE("downsampling is deterministic in the seed") {
        auto a = select_fpr_samples(proposals, anns, 0.5, 0.3, 2.0, 7);
        auto b = select_fpr_samples(proposals, anns, 0.5, 0.3, 2.0, 7);
        auto c = select_fpr_samples(proposals, anns, 0.5, 0.3, 2.0, 8);
        REQUIRE(a.size() == b.size());
        std::vector<std::string> ia, ib, ic;
        for (const auto& s : a) ia.push_back(s.source_id);
        for (const auto& s : b) ib.push_back(s.source_id);
        for (const auto& s : c) ic.push_back(s.source_id);
        CHECK(ia == ib);
        CHECK(ia != ic);  // different seed keeps a different FP subset
    }

    SUBCASE("scarce FPs are all kept") {
        std::vector<Proposal3D> few(proposals.begin(), proposals.begin() + 3);
        auto samples = select_fpr_samples(few, anns, 0.5, 0.3, 2.0, 7);
        CHECK(samples.size() == 3);  // 2 TP + the single FP (budget was 4)
    }

    SUBCASE("zero TPs mean zero FP budget") {
        std::vector<Proposal3D> fps_only(proposals.begin() + 2, proposals.end());
        CHECK(select_fpr_samples(fps_only, anns, 0.5, 0.3, 2.0, 7).empty());
    }
}

TEST_CASE("select_fpr_samples: no kept FP overlaps any annotation") {
    // Random-ish grid of proposals around two annotations, one uncertain.
    std::vector<Annotation> anns = {
        ann("V1", 5, Box2D{100, 100, 30, 30}),
        ann("V1", 6, Box2D{220, 220, 30, 30}, AnnotationStatus::uncertain)};
    std::vector<Proposal3D> proposals;
    for (int gx = 0; gx < 8; ++gx)
        for (int gy = 0; gy < 8; ++gy)
            proposals.push_back(proposal("V1", 40.0 + 30.0 * gx, 40.0 + 30.0 * gy, 30, 30,
                                         4, 7, 0.5));

    auto samples = select_fpr_samples(proposals, anns, 0.5, 0.3, 1000.0, 3);
    for (const auto& s : samples) {
        if (s.label != FprLabel::fp) continue;
        size_t idx = size_t(std::stoi(s.source_id.substr(s.source_id.rfind(':') + 1)));
        for (const auto& m : proposals[idx].members)
            for (const auto& a : anns)
                if (a.key_slice == m.slice) CHECK(iou_2d(m.box, a.box) < 0.3);
    }
}

TEST_CASE("select_fpr_samples: threshold validation") {
    CHECK_THROWS_AS(select_fpr_samples({}, {}, 0.0, 0.3, 2.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(select_fpr_samples({}, {}, 1.0, 0.3, 2.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(select_fpr_samples({}, {}, 0.5, 0.0, 2.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(select_fpr_samples({}, {}, 0.3, 0.5, 2.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(select_fpr_samples({}, {}, 0.5, 0.3, -1.0, 1), std::invalid_argument);
    CHECK(select_fpr_samples({}, {}, 0.5, 0.3, 2.0, 1).empty());
}

TEST_CASE("fuse_scores: plain average") {
    CHECK(fuse_scores(0.8, 0.6) == doctest::Approx(0.7));
    CHECK(fuse_scores(1.0, 0.0) == doctest::Approx(0.5));
    CHECK(fuse_scores(0.0, 0.0) == 0.0);
    CHECK(fuse_scores(1.0, 1.0) == 1.0);
}

TEST_CASE("fuse_scores: rejects out-of-range inputs") {
    CHECK_THROWS_AS(fuse_scores(-0.01, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(fuse_scores(1.01, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(fuse_scores(0.5, -0.01), std::invalid_argument);
    CHECK_THROWS_AS(fuse_scores(0.5, 1.01), std::invalid_argument);
}

TEST_CASE("fuse_scores: monotone and bounded") {
    double prev = -1;
    for (int i = 0; i <= 10; ++i) {
        double f = fuse_scores(i / 10.0, 0.4);
        CHECK(f >= 0.0);
        CHECK(f <= 1.0);
        CHECK(f > prev);
        prev = f;
    }
}

TEST_CASE("fpr label strings round-trip") {
    CHECK(fpr_label_from_string(to_string(FprLabel::tp)) == FprLabel::tp);
    CHECK(fpr_label_from_string(to_string(FprLabel::fp)) == FprLabel::fp);
    CHECK_THROWS_AS(fpr_label_from_string("maybe"), FormatError);
}
