#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lens/geometry.hpp"

namespace lens {

inline constexpr int8_t kCenterNegative = 0;
inline constexpr int8_t kCenterPositive = 1;
inline constexpr int8_t kCenterIgnored = -1;

/// Per-pixel supervision for one slice at one stride. The regression map
/// holds (dist_left, dist_right, dist_top, dist_bottom) in image pixels,
/// channel-last, and is defined only where the mask is set; the mask is set
/// exactly at positive centerness pixels.
struct DenseTargetMaps {
    int width = 0;
    int height = 0;
    double stride = 1.0;
    std::vector<int8_t> centerness;   // height*width
    std::vector<float> regression;    // height*width*4
    std::vector<uint8_t> mask;        // height*width

    size_t pixel_count() const { return static_cast<size_t>(width) * height; }
    size_t at(int x, int y) const { return static_cast<size_t>(y) * width + x; }
    int num_positive() const;
};

struct GtBox {
    Box2D box;
    bool uncertain = false;
};

/// Ground-truth boxes of a single slice.
struct GtSlice {
    int slice = 0;
    std::vector<GtBox> boxes;
};

struct LossReport {
    double l_center = 0.0;
    double l_size = 0.0;
    double l_class = 0.0;
    double l_box = 0.0;
    double lambda1 = 0.1;
    double lambda2 = 10.0;
    double total = 0.0;
};

/// Rasterize ground truth into centerness / regression targets.
///
/// For each certain box B=(x,y,w,h): feature pixels whose image coordinate
/// (px*stride, py*stride) falls inside the scaled center box (x,y,r_c*w,r_c*h)
/// are positive and regress the distances to B's four borders; pixels inside
/// (x,y,r_i*w,r_i*h) but not positive are ignored. Uncertain boxes contribute
/// only an ignore region. Precedence across overlapping boxes is
/// positive > ignored > negative; where two positive regions overlap, the
/// pixel regresses to the smaller-area box.
DenseTargetMaps assign_targets(const GtSlice& gt, int map_width, int map_height, double stride,
                               double r_c = 0.2, double r_i = 0.5);

struct ScalarLossGrad {
    double loss = 0.0;
    std::vector<double> grad;
};

/// Binary focal loss on the centerness map, summed over non-ignored pixels
/// and normalized by max(1, #positive pixels). Returns the analytic gradient
/// with respect to each prediction; ignored pixels get zero loss and
/// gradient. Predictions must lie strictly inside (0, 1).
ScalarLossGrad focal_loss(std::span<const double> pred, const DenseTargetMaps& targets,
                          double gamma = 2.0, double alpha = 0.25);

/// Mean absolute error over masked pixels and the 4 distance channels;
/// subgradient 0 at exact equality, zero loss/gradient off-mask.
ScalarLossGrad l1_size_loss(std::span<const double> pred_reg, const DenseTargetMaps& targets);

LossReport combine_losses(double l_center, double l_size, double l_class, double l_box,
                          double lambda1 = 0.1, double lambda2 = 10.0);

/// Invert dense maps into scored boxes: every pixel with centerness >=
/// score_threshold emits the box implied by its four regressed distances,
/// scored by the centerness value; the top_k highest-scoring boxes are kept
/// (ties broken by ascending pixel index). Degenerate boxes (non-positive
/// width or height) are dropped.
std::vector<ScoredBox> decode_proposals(std::span<const float> centerness,
                                        std::span<const float> regression, int map_width,
                                        int map_height, double stride, double score_threshold,
                                        int top_k, int slice = 0,
                                        const std::string& expert_id = "");

}  // namespace lens
