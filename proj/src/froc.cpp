#include "lens/froc.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "lens/errors.hpp"

namespace lens {

namespace {

// Shortest round-trip decimal form, locale-independent.
std::string fmt(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

std::vector<MatchedDetection> match_volume(const std::vector<Proposal3D>& detections,
                                           const std::vector<Box3D>& truths,
                                           double iobb_threshold, bool strict_duplicates) {
    std::vector<size_t> order(detections.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return detections[a].score > detections[b].score;
    });

    std::vector<bool> detected(truths.size(), false);
    std::vector<MatchedDetection> out;
    out.reserve(detections.size());
    for (size_t idx : order) {
        const Proposal3D& p = detections[idx];
        double best_free = 0, best_any = 0;
        size_t best_free_idx = truths.size();
        for (size_t t = 0; t < truths.size(); ++t) {
            double v = iobb_3d(p.box, truths[t]);
            best_any = std::max(best_any, v);
            if (!detected[t] && v > best_free) {
                best_free = v;
                best_free_idx = t;
            }
        }
        MatchedDetection md;
        md.volume_id = p.volume_id;
        md.score = p.score;
        if (best_free > iobb_threshold) {
            md.flag = MatchFlag::tp;
            detected[best_free_idx] = true;
        } else if (best_any > iobb_threshold) {
            md.flag = strict_duplicates ? MatchFlag::fp : MatchFlag::duplicate;
        } else {
            md.flag = MatchFlag::fp;
        }
        out.push_back(std::move(md));
    }
    return out;
}

FrocCurve froc(const std::vector<MatchedDetection>& detections, int64_t num_volumes,
               int64_t num_truth, const std::vector<double>& fp_points) {
    if (num_volumes <= 0) throw EmptyInputError("froc: no volumes");
    if (num_truth <= 0) throw EmptyInputError("froc: no ground-truth lesions");

    std::vector<const MatchedDetection*> active;
    active.reserve(detections.size());
    for (const auto& d : detections)
        if (d.flag != MatchFlag::duplicate) active.push_back(&d);
    std::stable_sort(active.begin(), active.end(),
                     [](const MatchedDetection* a, const MatchedDetection* b) {
                         return a->score > b->score;
                     });

    // Operating points after each atomic equal-score group.
    struct Op {
        double fp_per_volume;
        double sensitivity;
    };
    std::vector<Op> ops;
    int64_t tp = 0, fp = 0;
    size_t i = 0;
    while (i < active.size()) {
        size_t j = i;
        while (j < active.size() && active[j]->score == active[i]->score) {
            if (active[j]->flag == MatchFlag::tp)
                ++tp;
            else
                ++fp;
            ++j;
        }
        ops.push_back({double(fp) / double(num_volumes), double(tp) / double(num_truth)});
        i = j;
    }

    FrocCurve curve;
    curve.num_volumes = num_volumes;
    curve.num_truth = num_truth;
    double sum = 0;
    for (double point : fp_points) {
        double sens = 0;
        for (const auto& op : ops)
            if (op.fp_per_volume <= point) sens = std::max(sens, op.sensitivity);
        curve.points.push_back({point, sens});
        sum += sens;
    }
    curve.average_sensitivity = fp_points.empty() ? 0 : sum / double(fp_points.size());
    return curve;
}

void write_froc_csv(const std::filesystem::path& path, const FrocCurve& curve,
                    const std::string& config_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open for writing: " + path.string());
    out << "# config_hash=" << config_hash << "\n";
    out << "fp_per_volume,sensitivity\n";
    for (const auto& p : curve.points) out << fmt(p.fp_per_volume) << "," << fmt(p.sensitivity) << "\n";
    out << "# average_sensitivity=" << fmt(curve.average_sensitivity) << "\n";
}

void write_froc_svg(const std::filesystem::path& path, const FrocCurve& curve) {
    const int w = 480, h = 320, ml = 48, mr = 16, mt = 16, mb = 40;
    const double x0 = std::log2(0.125), x1 = std::log2(8.0);
    auto px = [&](double fp) {
        double t = (std::log2(std::max(fp, 0.125)) - x0) / (x1 - x0);
        return ml + t * (w - ml - mr);
    };
    auto py = [&](double sens) { return h - mb - sens * (h - mt - mb); };

    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open for writing: " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    out << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << py(0) << "\" x2=\"" << (w - mr) << "\" y2=\""
        << py(0) << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << py(0) << "\" x2=\"" << ml << "\" y2=\"" << py(1)
        << "\" stroke=\"black\"/>\n";
    for (const auto& p : curve.points) {
        out << "<circle cx=\"" << fmt(px(p.fp_per_volume)) << "\" cy=\"" << fmt(py(p.sensitivity))
            << "\" r=\"3\" fill=\"steelblue\"/>\n";
        out << "<text x=\"" << fmt(px(p.fp_per_volume)) << "\" y=\"" << (h - mb + 16)
            << "\" font-size=\"10\" text-anchor=\"middle\">" << fmt(p.fp_per_volume)
            << "</text>\n";
    }
    out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < curve.points.size(); ++i) {
        if (i) out << " ";
        out << fmt(px(curve.points[i].fp_per_volume)) << "," << fmt(py(curve.points[i].sensitivity));
    }
    out << "\"/>\n";
    out << "<text x=\"" << (ml + (w - ml - mr) / 2) << "\" y=\"" << (h - 8)
        << "\" font-size=\"11\" text-anchor=\"middle\">false positives per volume</text>\n";
    out << "<text x=\"12\" y=\"" << (mt + (h - mt - mb) / 2)
        << "\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 12 "
        << (mt + (h - mt - mb) / 2) << ")\">sensitivity</text>\n";
    out << "<text x=\"" << (w - mr) << "\" y=\"" << (mt + 4)
        << "\" font-size=\"11\" text-anchor=\"end\">average sensitivity "
        << fmt(curve.average_sensitivity) << "</text>\n";
    out << "</svg>\n";
}

}  // namespace lens
