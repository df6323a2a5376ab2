#include "dmsort/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

#include "dmsort/assignment.hpp"

namespace dmsort {

namespace {

std::map<int, std::vector<const MotRecord*>> by_frame(std::span<const MotRecord> records) {
    std::map<int, std::vector<const MotRecord*>> out;
    for (const auto& r : records) out[r.frame].push_back(&r);
    return out;
}

void check_unique_ids(const std::map<int, std::vector<const MotRecord*>>& frames, const char* what) {
    for (const auto& [f, rs] : frames) {
        std::vector<int> ids;
        for (const auto* r : rs) ids.push_back(r->id);
        std::sort(ids.begin(), ids.end());
        if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
            throw std::invalid_argument(std::string(what) + ": repeated id in frame " + std::to_string(f + 1));
        }
    }
}

}  // namespace

std::vector<FrameMatching> match_frames(std::span<const MotRecord> gt, std::span<const MotRecord> pred,
                                        double min_iou) {
    const auto g = by_frame(gt);
    const auto p = by_frame(pred);
    check_unique_ids(g, "ground truth");
    check_unique_ids(p, "results");
    std::vector<int> frames;
    for (const auto& [f, r] : g) frames.push_back(f);
    for (const auto& [f, r] : p) frames.push_back(f);
    std::sort(frames.begin(), frames.end());
    frames.erase(std::unique(frames.begin(), frames.end()), frames.end());

    static const std::vector<const MotRecord*> kEmpty;
    std::vector<FrameMatching> out;
    for (int f : frames) {
        const auto gi = g.find(f);
        const auto pi = p.find(f);
        const auto& gs = gi == g.end() ? kEmpty : gi->second;
        const auto& ps = pi == p.end() ? kEmpty : pi->second;
        CostMatrix c(static_cast<Eigen::Index>(gs.size()), static_cast<Eigen::Index>(ps.size()));
        for (std::size_t i = 0; i < gs.size(); ++i) {
            for (std::size_t j = 0; j < ps.size(); ++j) {
                const double v = iou(gs[i]->box, ps[j]->box);
                c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v >= min_iou ? 1.0 - v : kGated;
            }
        }
        const Assignment a = solve(c);
        FrameMatching m;
        m.frame = f;
        for (const auto& [i, j] : a.matches) {
            m.pairs.emplace_back(gs[i]->id, ps[j]->id);
            m.pair_iou.push_back(1.0 - c(i, j));
        }
        for (int i : a.unmatched_rows) m.false_negatives.push_back(gs[i]->id);
        for (int j : a.unmatched_cols) m.false_positives.push_back(ps[j]->id);
        out.push_back(std::move(m));
    }
    return out;
}

ClearMetrics clear_metrics(std::span<const MotRecord> gt, std::span<const MotRecord> pred, double min_iou) {
    if (gt.empty()) throw std::invalid_argument("clear metrics: no ground-truth boxes");
    ClearMetrics m;
    m.gt = static_cast<long>(gt.size());
    std::map<int, int> last_match;  // gt id -> predicted id at its previous matched frame
    double iou_sum = 0.0;
    for (const auto& fm : match_frames(gt, pred, min_iou)) {
        m.fp += static_cast<long>(fm.false_positives.size());
        m.fn += static_cast<long>(fm.false_negatives.size());
        for (std::size_t k = 0; k < fm.pairs.size(); ++k) {
            const auto [g, p] = fm.pairs[k];
            const auto it = last_match.find(g);
            if (it != last_match.end() && it->second != p) ++m.idsw;
            last_match[g] = p;
            iou_sum += fm.pair_iou[k];
            ++m.matches;
        }
    }
    m.mota = 1.0 - static_cast<double>(m.fn + m.fp + m.idsw) / static_cast<double>(m.gt);
    m.mean_iou = m.matches > 0 ? iou_sum / static_cast<double>(m.matches) : 0.0;
    return m;
}

double mota(std::span<const MotRecord> gt, std::span<const MotRecord> pred) { return clear_metrics(gt, pred).mota; }

IdentityMetrics identity_metrics(std::span<const MotRecord> gt, std::span<const MotRecord> pred, double min_iou) {
    if (gt.empty()) throw std::invalid_argument("identity metrics: no ground-truth boxes");
    std::map<int, int> gid, pid;
    std::vector<long> g_len, p_len;
    for (const auto& r : gt) {
        if (gid.emplace(r.id, static_cast<int>(gid.size())).second) g_len.push_back(0);
        ++g_len[gid[r.id]];
    }
    for (const auto& r : pred) {
        if (pid.emplace(r.id, static_cast<int>(pid.size())).second) p_len.push_back(0);
        ++p_len[pid[r.id]];
    }
    const auto ng = static_cast<Eigen::Index>(g_len.size());
    const auto np = static_cast<Eigen::Index>(p_len.size());

    // Co-occurrence counts of (gt id, predicted id) pairs overlapping by at
    // least min_iou in the same frame.
    Eigen::MatrixXd overlap = Eigen::MatrixXd::Zero(ng, np);
    const auto g = by_frame(gt);
    const auto p = by_frame(pred);
    for (const auto& [f, gs] : g) {
        const auto pi = p.find(f);
        if (pi == p.end()) continue;
        for (const auto* a : gs) {
            for (const auto* b : pi->second) {
                if (iou(a->box, b->box) >= min_iou) overlap(gid[a->id], pid[b->id]) += 1.0;
            }
        }
    }

    // Every complete matching has min(ng, np) pairs, so minimizing
    // (max - overlap) maximizes the total overlap.
    const double top = overlap.size() ? overlap.maxCoeff() : 0.0;
    const CostMatrix c = (top - overlap.array()).matrix();
    const Assignment a = solve(c);
    double idtp = 0.0;
    for (const auto& [i, j] : a.matches) {
        idtp += overlap(i, j);
    }

    IdentityMetrics m;
    m.idtp = idtp;
    m.idfn = static_cast<double>(gt.size()) - idtp;
    m.idfp = static_cast<double>(pred.size()) - idtp;
    m.idf1 = 2.0 * idtp / (2.0 * idtp + m.idfp + m.idfn);
    return m;
}

double idf1(std::span<const MotRecord> gt, std::span<const MotRecord> pred) {
    return identity_metrics(gt, pred).idf1;
}

double ade(std::span<const BoundingBox> truth, std::span<const BoundingBox> predicted) {
    if (truth.size() != predicted.size()) throw std::invalid_argument("ade: sequence lengths differ");
    if (truth.empty()) throw std::invalid_argument("ade: empty sequences");
    double s = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        s += std::abs(truth[i].x - predicted[i].x) + std::abs(truth[i].y - predicted[i].y) +
             std::abs(truth[i].w - predicted[i].w) + std::abs(truth[i].h - predicted[i].h);
    }
    return s / (4.0 * static_cast<double>(truth.size()));
}

EvalReport evaluate(std::span<const MotRecord> gt, std::span<const MotRecord> pred) {
    return {clear_metrics(gt, pred), identity_metrics(gt, pred)};
}

std::string EvalReport::format(const std::string& title) const {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "%-20s %8s %8s %6s %6s %6s %8s\n%-20s %8.4f %8.4f %6ld %6ld %6ld %8.4f\n", "sequence", "MOTA",
                  "IDF1", "IDSW", "FP", "FN", "meanIoU", title.c_str(), clear.mota, identity.idf1, clear.idsw,
                  clear.fp, clear.fn, clear.mean_iou);
    std::string out = buf;
    std::snprintf(buf, sizeof buf,
                  "sequence=%s\nmota=%.6f\nidf1=%.6f\nidsw=%ld\nfp=%ld\nfn=%ld\ngt=%ld\nmean_iou=%.6f\n",
                  title.c_str(), clear.mota, identity.idf1, clear.idsw, clear.fp, clear.fn, clear.gt,
                  clear.mean_iou);
    return out + buf;
}

}  // namespace dmsort
