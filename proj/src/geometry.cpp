#include "lens/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lens {

bool Box2D::valid() const {
    return w > 0.0 && h > 0.0 && std::isfinite(cx) && std::isfinite(cy) && std::isfinite(w) &&
           std::isfinite(h);
}

bool Box3D::valid() const {
    return w > 0.0 && h > 0.0 && z_min <= z_max && std::isfinite(cx) && std::isfinite(cy);
}

namespace {

double overlap_1d(double lo_a, double hi_a, double lo_b, double hi_b) {
    return std::max(0.0, std::min(hi_a, hi_b) - std::max(lo_a, lo_b));
}

}  // namespace

double iou_2d(const Box2D& a, const Box2D& b) {
    double iw = overlap_1d(a.left(), a.right(), b.left(), b.right());
    double ih = overlap_1d(a.top(), a.bottom(), b.top(), b.bottom());
    double inter = iw * ih;
    if (inter <= 0.0) return 0.0;
    double uni = a.area() + b.area() - inter;
    return inter / uni;
}

double iobb_3d(const Box3D& proposal, const Box3D& gt) {
    Box2D p = proposal.xy(), g = gt.xy();
    double iw = overlap_1d(p.left(), p.right(), g.left(), g.right());
    double ih = overlap_1d(p.top(), p.bottom(), g.top(), g.bottom());
    int iz = std::max(0, std::min(proposal.z_max, gt.z_max) - std::max(proposal.z_min, gt.z_min) + 1);
    double inter = iw * ih * static_cast<double>(iz);
    if (inter <= 0.0) return 0.0;
    return inter / proposal.volume();
}

std::vector<size_t> nms_keep_indices(const std::vector<ScoredBox>& boxes, double iou_threshold) {
    std::vector<size_t> order(boxes.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&boxes](size_t a, size_t b) {
        if (boxes[a].score != boxes[b].score) return boxes[a].score > boxes[b].score;
        return a < b;
    });

    std::vector<size_t> kept;
    for (size_t idx : order) {
        bool suppressed = false;
        for (size_t k : kept) {
            if (iou_2d(boxes[idx].box, boxes[k].box) > iou_threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(idx);
    }
    return kept;
}

std::vector<ScoredBox> nms_2d(const std::vector<ScoredBox>& boxes, double iou_threshold) {
    std::vector<ScoredBox> out;
    for (size_t idx : nms_keep_indices(boxes, iou_threshold)) out.push_back(boxes[idx]);
    return out;
}

}  // namespace lens
