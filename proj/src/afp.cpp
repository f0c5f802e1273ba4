#include "lens/afp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lens {

int DenseTargetMaps::num_positive() const {
    return static_cast<int>(std::count(centerness.begin(), centerness.end(), kCenterPositive));
}

namespace {

Box2D scaled_box(const Box2D& b, double r) { return Box2D{b.cx, b.cy, b.w * r, b.h * r}; }

}  // namespace

DenseTargetMaps assign_targets(const GtSlice& gt, int map_width, int map_height, double stride,
                               double r_c, double r_i) {
    if (stride <= 0.0) throw std::invalid_argument("assign_targets: stride must be positive");
    if (!(r_c > 0.0 && r_c <= r_i && r_i <= 1.0))
        throw std::invalid_argument("assign_targets: need 0 < r_c <= r_i <= 1");

    DenseTargetMaps maps;
    maps.width = map_width;
    maps.height = map_height;
    maps.stride = stride;
    maps.centerness.assign(maps.pixel_count(), kCenterNegative);
    maps.regression.assign(maps.pixel_count() * 4, 0.0f);
    maps.mask.assign(maps.pixel_count(), 0);

    for (int py = 0; py < map_height; ++py) {
        double y = py * stride;
        for (int px = 0; px < map_width; ++px) {
            double x = px * stride;
            size_t idx = maps.at(px, py);

            const GtBox* positive_owner = nullptr;
            bool in_ignore = false;
            for (const GtBox& g : gt.boxes) {
                if (!g.uncertain && scaled_box(g.box, r_c).contains(x, y)) {
                    if (positive_owner == nullptr || g.box.area() < positive_owner->box.area())
                        positive_owner = &g;
                }
                if (scaled_box(g.box, r_i).contains(x, y)) in_ignore = true;
            }

            if (positive_owner != nullptr) {
                maps.centerness[idx] = kCenterPositive;
                maps.mask[idx] = 1;
                const Box2D& b = positive_owner->box;
                maps.regression[idx * 4 + 0] = static_cast<float>(x - b.left());
                maps.regression[idx * 4 + 1] = static_cast<float>(b.right() - x);
                maps.regression[idx * 4 + 2] = static_cast<float>(y - b.top());
                maps.regression[idx * 4 + 3] = static_cast<float>(b.bottom() - y);
            } else if (in_ignore) {
                maps.centerness[idx] = kCenterIgnored;
            }
        }
    }
    return maps;
}

ScalarLossGrad focal_loss(std::span<const double> pred, const DenseTargetMaps& targets,
                          double gamma, double alpha) {
    if (pred.size() != targets.pixel_count())
        throw std::invalid_argument("focal_loss: prediction size does not match target maps");
    for (double p : pred) {
        if (!(p > 0.0 && p < 1.0))
            throw std::invalid_argument("focal_loss: predictions must lie strictly in (0,1)");
    }

    double norm = std::max(1, targets.num_positive());
    ScalarLossGrad out;
    out.grad.assign(pred.size(), 0.0);
    double sum = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        int8_t t = targets.centerness[i];
        if (t == kCenterIgnored) continue;
        double p = pred[i];
        if (t == kCenterPositive) {
            double q = 1.0 - p;
            sum += -alpha * std::pow(q, gamma) * std::log(p);
            out.grad[i] = (alpha * gamma * std::pow(q, gamma - 1.0) * std::log(p) -
                           alpha * std::pow(q, gamma) / p) /
                          norm;
        } else {
            double q = 1.0 - p;
            sum += -(1.0 - alpha) * std::pow(p, gamma) * std::log(q);
            out.grad[i] = (-(1.0 - alpha) * gamma * std::pow(p, gamma - 1.0) * std::log(q) +
                           (1.0 - alpha) * std::pow(p, gamma) / q) /
                          norm;
        }
    }
    out.loss = sum / norm;
    return out;
}

ScalarLossGrad l1_size_loss(std::span<const double> pred_reg, const DenseTargetMaps& targets) {
    if (pred_reg.size() != targets.pixel_count() * 4)
        throw std::invalid_argument("l1_size_loss: prediction size does not match target maps");

    size_t masked = std::count(targets.mask.begin(), targets.mask.end(), uint8_t{1});
    double norm = std::max<size_t>(1, masked) * 4.0;

    ScalarLossGrad out;
    out.grad.assign(pred_reg.size(), 0.0);
    double sum = 0.0;
    for (size_t i = 0; i < targets.pixel_count(); ++i) {
        if (!targets.mask[i]) continue;
        for (int c = 0; c < 4; ++c) {
            size_t j = i * 4 + c;
            double d = pred_reg[j] - targets.regression[j];
            sum += std::abs(d);
            if (d > 0.0)
                out.grad[j] = 1.0 / norm;
            else if (d < 0.0)
                out.grad[j] = -1.0 / norm;
        }
    }
    out.loss = sum / norm;
    return out;
}

LossReport combine_losses(double l_center, double l_size, double l_class, double l_box,
                          double lambda1, double lambda2) {
    LossReport r;
    r.l_center = l_center;
    r.l_size = l_size;
    r.l_class = l_class;
    r.l_box = l_box;
    r.lambda1 = lambda1;
    r.lambda2 = lambda2;
    r.total = l_center + lambda1 * l_size + l_class + lambda2 * l_box;
    return r;
}

std::vector<ScoredBox> decode_proposals(std::span<const float> centerness,
                                        std::span<const float> regression, int map_width,
                                        int map_height, double stride, double score_threshold,
                                        int top_k, int slice, const std::string& expert_id) {
    size_t npix = static_cast<size_t>(map_width) * map_height;
    if (centerness.size() != npix || regression.size() != npix * 4)
        throw std::invalid_argument("decode_proposals: map shapes do not match");
    if (stride <= 0.0) throw std::invalid_argument("decode_proposals: stride must be positive");

    std::vector<size_t> candidates;
    for (size_t i = 0; i < npix; ++i) {
        if (centerness[i] >= score_threshold) candidates.push_back(i);
    }
    std::stable_sort(candidates.begin(), candidates.end(), [&](size_t a, size_t b) {
        if (centerness[a] != centerness[b]) return centerness[a] > centerness[b];
        return a < b;
    });

    std::vector<ScoredBox> out;
    for (size_t i : candidates) {
        if (top_k >= 0 && static_cast<int>(out.size()) >= top_k) break;
        double x = static_cast<double>(i % map_width) * stride;
        double y = static_cast<double>(i / map_width) * stride;
        double left = x - regression[i * 4 + 0];
        double right = x + regression[i * 4 + 1];
        double top = y - regression[i * 4 + 2];
        double bottom = y + regression[i * 4 + 3];
        if (right <= left || bottom <= top) continue;
        ScoredBox sb;
        sb.box = Box2D::from_edges(left, top, right, bottom);
        sb.score = centerness[i];
        sb.slice = slice;
        sb.expert_id = expert_id;
        sb.source_id = "px:" + std::to_string(i);
        out.push_back(std::move(sb));
    }
    return out;
}

}  // namespace lens
