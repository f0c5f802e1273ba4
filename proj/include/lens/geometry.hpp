#pragma once

#include <optional>
#include <string>
#include <vector>

namespace lens {

/// Axis-aligned 2D box in center-size form. A box spans
/// [cx - w/2, cx + w/2) x [cy - h/2, cy + h/2) in continuous pixel
/// coordinates; w and h must be positive.
struct Box2D {
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;

    double left() const { return cx - w / 2.0; }
    double right() const { return cx + w / 2.0; }
    double top() const { return cy - h / 2.0; }
    double bottom() const { return cy + h / 2.0; }
    double area() const { return w * h; }

    static Box2D from_edges(double left, double top, double right, double bottom) {
        return Box2D{(left + right) / 2.0, (top + bottom) / 2.0, right - left, bottom - top};
    }

    bool contains(double x, double y) const {
        return x >= left() && x < right() && y >= top() && y < bottom();
    }

    bool valid() const;
};

/// 2D box extruded over an inclusive slice range; each slice counts as one
/// unit of thickness.
struct Box3D {
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;
    int z_min = 0;
    int z_max = 0;

    int depth() const { return z_max - z_min + 1; }
    double volume() const { return w * h * static_cast<double>(depth()); }
    Box2D xy() const { return Box2D{cx, cy, w, h}; }

    bool valid() const;
};

/// A scored 2D detection on one slice, attributed to a dataset expert.
struct ScoredBox {
    Box2D box;
    double score = 0.0;
    int slice = 0;
    std::string expert_id;
    std::string source_id;
    std::optional<std::vector<float>> embedding;
};

double iou_2d(const Box2D& a, const Box2D& b);

/// Intersection volume over the proposal's own volume (not symmetric).
double iobb_3d(const Box3D& proposal, const Box3D& gt);

/// Greedy NMS: boxes processed in descending score (ties broken by ascending
/// input index); a box is suppressed iff its IoU with an already-kept box
/// exceeds the threshold. Returns indices into the input, in processing order.
std::vector<size_t> nms_keep_indices(const std::vector<ScoredBox>& boxes, double iou_threshold);

std::vector<ScoredBox> nms_2d(const std::vector<ScoredBox>& boxes, double iou_threshold);

}  // namespace lens
