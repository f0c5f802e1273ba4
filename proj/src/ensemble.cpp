#include "lens/ensemble.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

namespace lens {

double Tracklet::max_score() const {
    double m = 0.0;
    for (const auto& b : members) m = std::max(m, b.score);
    return m;
}

const ScoredBox& Tracklet::top_member() const {
    const ScoredBox* best = &members.front();
    for (const auto& b : members) {
        if (b.score > best->score) best = &b;
    }
    return *best;
}

std::vector<ScoredBox> pool_and_nms(const std::vector<std::vector<ScoredBox>>& per_expert,
                                    double nms_iou) {
    std::map<int, std::vector<ScoredBox>> by_slice;
    for (const auto& expert : per_expert) {
        for (const auto& b : expert) by_slice[b.slice].push_back(b);
    }
    std::vector<ScoredBox> out;
    for (auto& [slice, boxes] : by_slice) {
        auto kept = nms_2d(boxes, nms_iou);
        out.insert(out.end(), kept.begin(), kept.end());
    }
    return out;
}

std::vector<Tracklet> build_tracklets(const std::vector<ScoredBox>& boxes, double theta) {
    std::map<int, std::vector<size_t>> by_slice;
    for (size_t i = 0; i < boxes.size(); ++i) by_slice[boxes[i].slice].push_back(i);

    // next_link[i] = index of the box on slice+1 that i links to
    std::vector<size_t> next_link(boxes.size(), SIZE_MAX);
    std::vector<bool> has_prev(boxes.size(), false);

    for (auto it = by_slice.begin(); it != by_slice.end(); ++it) {
        auto next_it = std::next(it);
        if (next_it == by_slice.end() || next_it->first != it->first + 1) continue;

        struct Pair {
            double iou;
            size_t a, b;
        };
        std::vector<Pair> pairs;
        for (size_t a : it->second) {
            for (size_t b : next_it->second) {
                double v = iou_2d(boxes[a].box, boxes[b].box);
                if (v > theta) pairs.push_back({v, a, b});
            }
        }
        std::sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) {
            if (x.iou != y.iou) return x.iou > y.iou;
            if (x.a != y.a) return x.a < y.a;
            return x.b < y.b;
        });

        std::set<size_t> used_a, used_b;
        for (const Pair& p : pairs) {
            if (used_a.count(p.a) || used_b.count(p.b)) continue;
            used_a.insert(p.a);
            used_b.insert(p.b);
            next_link[p.a] = p.b;
            has_prev[p.b] = true;
        }
    }

    std::vector<Tracklet> tracklets;
    for (size_t i = 0; i < boxes.size(); ++i) {
        if (has_prev[i]) continue;  // not a chain head
        Tracklet t;
        for (size_t cur = i; cur != SIZE_MAX; cur = next_link[cur]) t.members.push_back(boxes[cur]);
        tracklets.push_back(std::move(t));
    }
    return tracklets;
}

Proposal3D stack_to_3d(const Tracklet& tracklet) {
    if (tracklet.members.empty()) throw std::invalid_argument("stack_to_3d: empty tracklet");
    double total = 0.0;
    for (const auto& m : tracklet.members) total += m.score;
    if (total <= 0.0) throw std::invalid_argument("stack_to_3d: zero total score weight");

    Proposal3D p;
    double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;
    std::set<std::string> experts;
    for (const auto& m : tracklet.members) {
        double wgt = m.score / total;
        cx += wgt * m.box.cx;
        cy += wgt * m.box.cy;
        w += wgt * m.box.w;
        h += wgt * m.box.h;
        experts.insert(m.expert_id);
    }
    p.box = Box3D{cx, cy, w, h, tracklet.z_min(), tracklet.z_max()};
    p.score = tracklet.max_score();
    p.expert_ids.assign(experts.begin(), experts.end());
    p.members = tracklet.members;
    return p;
}

std::vector<Proposal3D> stack_to_3d(const std::vector<Tracklet>& tracklets) {
    std::vector<Proposal3D> out;
    out.reserve(tracklets.size());
    for (const auto& t : tracklets) out.push_back(stack_to_3d(t));
    return out;
}

}  // namespace lens
