#include "dmsort/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dmsort {

namespace {

constexpr double kWindowLow = -2.0;
constexpr double kWindowHigh = 3.0;

void check_increasing(std::span<const TimedBox> seq, const char* what) {
    for (std::size_t i = 1; i < seq.size(); ++i) {
        if (seq[i].frame <= seq[i - 1].frame) {
            throw std::invalid_argument(std::string(what) + ": frames must be strictly increasing");
        }
    }
}

struct ChannelAccumulator {
    std::array<std::vector<double>, 4> values;

    void add(const Coords4& v) {
        for (int c = 0; c < 4; ++c) values[c].push_back(v[c]);
    }

    // Sorted summation keeps the result independent of insertion order.
    void finish(Coords4& mean, Coords4& stddev) {
        for (int c = 0; c < 4; ++c) {
            auto& vs = values[c];
            if (vs.empty()) {
                mean[c] = 0.0;
                stddev[c] = 1.0;
                continue;
            }
            std::sort(vs.begin(), vs.end());
            double sum = 0.0;
            for (double v : vs) sum += v;
            const double m = sum / static_cast<double>(vs.size());
            std::vector<double> sq;
            sq.reserve(vs.size());
            for (double v : vs) sq.push_back((v - m) * (v - m));
            std::sort(sq.begin(), sq.end());
            double ss = 0.0;
            for (double v : sq) ss += v;
            mean[c] = m;
            stddev[c] = std::max(std::sqrt(ss / static_cast<double>(vs.size())), kMinFeatureStd);
        }
    }
};

Coords4 scaled_difference(const TimedBox& a, const TimedBox& b) {
    // (b - a) / (frame_b - frame_a)
    const double dt = static_cast<double>(b.frame - a.frame);
    const Coords4 ca = coords_of(a.box);
    const Coords4 cb = coords_of(b.box);
    return {(cb[0] - ca[0]) / dt, (cb[1] - ca[1]) / dt, (cb[2] - ca[2]) / dt, (cb[3] - ca[3]) / dt};
}

// (cur - last) / (frame_last - frame_cur), defined for cur before last.
Coords4 relative_to_last(const TimedBox& cur, const TimedBox& last) {
    const double dt = static_cast<double>(last.frame - cur.frame);
    const Coords4 cc = coords_of(cur.box);
    const Coords4 cl = coords_of(last.box);
    return {(cc[0] - cl[0]) / dt, (cc[1] - cl[1]) / dt, (cc[2] - cl[2]) / dt, (cc[3] - cl[3]) / dt};
}

Coords4 offset(const BoundingBox& from, const BoundingBox& to) {
    return {to.x - from.x, to.y - from.y, to.w - from.w, to.h - from.h};
}

}  // namespace

void validate_normalized(const TimedBox& tb) {
    const BoundingBox& b = tb.box;
    if (tb.frame < 0) throw std::invalid_argument("timed box has a negative frame");
    const bool ok = std::isfinite(b.x) && std::isfinite(b.y) && std::isfinite(b.w) && std::isfinite(b.h) &&
                    b.w > 0.0 && b.h > 0.0 && b.x >= kWindowLow && b.y >= kWindowLow &&
                    b.right() <= kWindowHigh && b.bottom() <= kWindowHigh;
    if (!ok) throw std::invalid_argument("normalized box outside the sanity window");
}

FeatureMatrix extract_input(std::span<const TimedBox> history, const FeatureStats& stats) {
    if (history.empty()) throw std::invalid_argument("extract_input: empty history");
    check_increasing(history, "extract_input");
    const auto n = static_cast<Eigen::Index>(history.size());
    const TimedBox& last = history.back();
    FeatureMatrix out = FeatureMatrix::Zero(n, kInputFeatureWidth);
    for (Eigen::Index k = 0; k < n; ++k) {
        const TimedBox& cur = history[static_cast<std::size_t>(k)];
        const Coords4 abs = coords_of(cur.box);
        for (int c = 0; c < 4; ++c) out(k, c) = abs[c];
        if (k > 0) {
            const Coords4 d = scaled_difference(history[static_cast<std::size_t>(k - 1)], cur);
            for (int c = 0; c < 4; ++c) out(k, 4 + c) = (d[c] - stats.diff_mean[c]) / stats.diff_std[c];
        }
        if (k + 1 < n) {
            const Coords4 r = relative_to_last(cur, last);
            for (int c = 0; c < 4; ++c) out(k, 8 + c) = (r[c] - stats.rel_mean[c]) / stats.rel_std[c];
        }
        out(k, 12) = static_cast<double>(cur.frame - last.frame);
    }
    return out;
}

FeatureMatrix extract_target(const TimedBox& last, std::span<const TimedBox> future, const FeatureStats& stats) {
    check_increasing(future, "extract_target");
    const auto m = static_cast<Eigen::Index>(future.size());
    FeatureMatrix out(m, kTargetFeatureWidth);
    for (Eigen::Index j = 0; j < m; ++j) {
        const TimedBox& f = future[static_cast<std::size_t>(j)];
        if (f.frame <= last.frame) throw std::invalid_argument("extract_target: non-causal future frame");
        const Coords4 o = offset(last.box, f.box);
        for (int c = 0; c < 4; ++c) out(j, c) = (o[c] - stats.target_mean[c]) / stats.target_std[c];
        out(j, 4) = static_cast<double>(f.frame - last.frame);
    }
    return out;
}

BoundingBox target_row_to_box(const TimedBox& last, const Eigen::Ref<const Eigen::RowVectorXd>& row,
                              const FeatureStats& stats) {
    Coords4 o;
    for (int c = 0; c < 4; ++c) o[c] = row(c) * stats.target_std[c] + stats.target_mean[c];
    return {last.box.x + o[0], last.box.y + o[1], last.box.w + o[2], last.box.h + o[3], last.box.confidence};
}

FeatureStats fit_stats(std::span<const std::vector<TimedBox>> histories,
                       std::span<const std::vector<TimedBox>> futures) {
    std::size_t usable = 0;
    for (const auto& h : histories) usable += h.size() >= 2 ? 1 : 0;
    if (usable < 2) throw std::invalid_argument("fit_stats: need at least 2 histories with 2 or more observations");
    if (!futures.empty() && futures.size() != histories.size()) {
        throw std::invalid_argument("fit_stats: futures must align with histories");
    }

    ChannelAccumulator diff, rel, target;
    for (std::size_t i = 0; i < histories.size(); ++i) {
        const auto& h = histories[i];
        if (h.empty()) continue;
        check_increasing(h, "fit_stats");
        const TimedBox& last = h.back();
        for (std::size_t k = 1; k < h.size(); ++k) diff.add(scaled_difference(h[k - 1], h[k]));
        for (std::size_t k = 0; k + 1 < h.size(); ++k) rel.add(relative_to_last(h[k], last));
        if (!futures.empty()) {
            for (const TimedBox& f : futures[i]) target.add(offset(last.box, f.box));
        }
    }

    FeatureStats s;
    diff.finish(s.diff_mean, s.diff_std);
    rel.finish(s.rel_mean, s.rel_std);
    target.finish(s.target_mean, s.target_std);
    return s;
}

}  // namespace dmsort
