#pragma once

// Independent reference implementations used to cross-check the library:
// rasterized overlap measures, voxel-counting IoBB, exhaustive O(n^2) NMS,
// a re-matching threshold-sweep FROC, and central finite differences.
// Deliberately slow and simple; correctness over speed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "lens/froc.hpp"
#include "lens/geometry.hpp"
#include "lens/rng.hpp"

namespace lens::oracle {

// Sample density for rasterized overlap: kRasterScale^2 sample points per
// square pixel, placed at cell centers. Boxes produced by grid_box() keep
// every edge on the 1/kRasterScale grid, so no sample point ever lands on an
// edge and the counts below are exact (count = scale * extent per axis).
inline constexpr int kRasterScale = 8;

// Random box with cx, cy on the 1/8 grid and w, h on the 1/4 grid inside
// [0, span] x [0, span]; all edges land on the 1/8 grid.
inline Box2D grid_box(Rng& rng, double span, double min_size, double max_size) {
    Box2D b;
    b.w = double(rng.uniform_int(int64_t(min_size * 4), int64_t(max_size * 4))) / 4.0;
    b.h = double(rng.uniform_int(int64_t(min_size * 4), int64_t(max_size * 4))) / 4.0;
    b.cx = double(rng.uniform_int(int64_t(b.w / 2 * 8), int64_t((span - b.w / 2) * 8))) / 8.0;
    b.cy = double(rng.uniform_int(int64_t(b.h / 2 * 8), int64_t((span - b.h / 2) * 8))) / 8.0;
    return b;
}

// Count sample points (i+0.5)/S falling inside both / either box by brute
// scanning of the joint bounding region.
inline double raster_iou(const Box2D& a, const Box2D& b) {
    const int s = kRasterScale;
    const int64_t ix0 = int64_t(std::floor(std::min(a.left(), b.left()) * s)) - 1;
    const int64_t ix1 = int64_t(std::ceil(std::max(a.right(), b.right()) * s)) + 1;
    const int64_t iy0 = int64_t(std::floor(std::min(a.top(), b.top()) * s)) - 1;
    const int64_t iy1 = int64_t(std::ceil(std::max(a.bottom(), b.bottom()) * s)) + 1;
    int64_t in_a = 0, in_b = 0, in_both = 0;
    for (int64_t iy = iy0; iy < iy1; ++iy) {
        const double y = (double(iy) + 0.5) / s;
        for (int64_t ix = ix0; ix < ix1; ++ix) {
            const double x = (double(ix) + 0.5) / s;
            const bool pa = a.contains(x, y);
            const bool pb = b.contains(x, y);
            in_a += pa;
            in_b += pb;
            in_both += pa && pb;
        }
    }
    const int64_t in_union = in_a + in_b - in_both;
    return in_union == 0 ? 0.0 : double(in_both) / double(in_union);
}

// Voxel-counting IoBB: loop the proposal's slices, rasterize the in-plane
// overlap on each, divide by the proposal's own rasterized voxel count.
inline double voxel_iobb(const Box3D& proposal, const Box3D& gt) {
    const int s = kRasterScale;
    const Box2D p = proposal.xy(), g = gt.xy();
    const int64_t ix0 = int64_t(std::floor(p.left() * s)) - 1;
    const int64_t ix1 = int64_t(std::ceil(p.right() * s)) + 1;
    const int64_t iy0 = int64_t(std::floor(p.top() * s)) - 1;
    const int64_t iy1 = int64_t(std::ceil(p.bottom() * s)) + 1;
    int64_t in_p = 0, in_both = 0;
    for (int64_t iy = iy0; iy < iy1; ++iy) {
        const double y = (double(iy) + 0.5) / s;
        for (int64_t ix = ix0; ix < ix1; ++ix) {
            const double x = (double(ix) + 0.5) / s;
            if (!p.contains(x, y)) continue;
            ++in_p;
            in_both += g.contains(x, y);
        }
    }
    int64_t inter_z = 0;
    for (int z = proposal.z_min; z <= proposal.z_max; ++z)
        inter_z += z >= gt.z_min && z <= gt.z_max;
    const int64_t p_vox = in_p * proposal.depth();
    return p_vox == 0 ? 0.0 : double(in_both * inter_z) / double(p_vox);
}

// Exhaustive NMS: precompute the pairwise IoU matrix, then repeatedly take
// the best-scored survivor (ties: lowest index) and erase everything it
// suppresses.
inline std::vector<size_t> brute_nms(const std::vector<ScoredBox>& boxes, double threshold) {
    const size_t n = boxes.size();
    std::vector<std::vector<double>> iou(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j)
            iou[i][j] = iou[j][i] = iou_2d(boxes[i].box, boxes[j].box);

    std::vector<char> alive(n, 1);
    std::vector<size_t> kept;
    for (;;) {
        size_t best = n;
        for (size_t i = 0; i < n; ++i)
            if (alive[i] && (best == n || boxes[i].score > boxes[best].score)) best = i;
        if (best == n) break;
        kept.push_back(best);
        alive[best] = 0;
        for (size_t i = 0; i < n; ++i)
            if (alive[i] && iou[best][i] > threshold) alive[i] = 0;
    }
    return kept;
}

struct VolumeDetections {
    std::vector<Proposal3D> detections;
    std::vector<Box3D> truths;
};

namespace detail {

// Independent greedy matcher used inside the sweep: detections in
// descending-score order (ties by input index) claim their best-IoBB
// unclaimed truth.
struct SweepCounts {
    int64_t tp = 0;
    int64_t fp = 0;
};

inline SweepCounts match_at_threshold(const VolumeDetections& vol, double score_floor,
                                      double iobb_threshold, bool strict) {
    std::vector<size_t> order;
    for (size_t i = 0; i < vol.detections.size(); ++i)
        if (vol.detections[i].score >= score_floor) order.push_back(i);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return vol.detections[a].score > vol.detections[b].score;
    });

    std::vector<char> claimed(vol.truths.size(), 0);
    SweepCounts c;
    for (size_t idx : order) {
        const Proposal3D& d = vol.detections[idx];
        double best_free = 0, best_any = 0;
        size_t who = vol.truths.size();
        for (size_t t = 0; t < vol.truths.size(); ++t) {
            double v = iobb_3d(d.box, vol.truths[t]);
            best_any = std::max(best_any, v);
            if (!claimed[t] && v > best_free) {
                best_free = v;
                who = t;
            }
        }
        if (best_free > iobb_threshold) {
            claimed[who] = 1;
            ++c.tp;
        } else if (best_any > iobb_threshold) {
            if (strict) ++c.fp;  // duplicate hit; inert unless strict
        } else {
            ++c.fp;
        }
    }
    return c;
}

}  // namespace detail

// Exhaustive FROC: re-run matching from scratch at every distinct score
// (admission rule score >= t keeps equal-score groups atomic), then take the
// best sensitivity whose FP rate fits under each operating point.
inline FrocCurve sweep_froc(const std::vector<VolumeDetections>& volumes, double iobb_threshold,
                            bool strict, const std::vector<double>& fp_points) {
    std::vector<double> thresholds;
    int64_t num_truth = 0;
    for (const auto& vol : volumes) {
        num_truth += int64_t(vol.truths.size());
        for (const auto& d : vol.detections) thresholds.push_back(d.score);
    }
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    struct Op {
        double rate;
        double sensitivity;
    };
    std::vector<Op> ops;
    for (double t : thresholds) {
        int64_t tp = 0, fp = 0;
        for (const auto& vol : volumes) {
            auto c = detail::match_at_threshold(vol, t, iobb_threshold, strict);
            tp += c.tp;
            fp += c.fp;
        }
        ops.push_back({double(fp) / double(volumes.size()), double(tp) / double(num_truth)});
    }

    FrocCurve curve;
    curve.num_volumes = int64_t(volumes.size());
    curve.num_truth = num_truth;
    double sum = 0;
    for (double point : fp_points) {
        double sens = 0;
        for (const auto& op : ops)
            if (op.rate <= point) sens = std::max(sens, op.sensitivity);
        curve.points.push_back({point, sens});
        sum += sens;
    }
    curve.average_sensitivity = fp_points.empty() ? 0 : sum / double(fp_points.size());
    return curve;
}

// Central finite differences of a scalar function of a vector.
template <typename F>
std::vector<double> central_differences(F f, std::vector<double> x, double step) {
    std::vector<double> g(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + step;
        const double hi = f(x);
        x[i] = keep - step;
        const double lo = f(x);
        x[i] = keep;
        g[i] = (hi - lo) / (2.0 * step);
    }
    return g;
}

inline double rel_err(double a, double b) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / denom;
}

}  // namespace lens::oracle
