#include "dmsort/association.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dmsort {

void DtIouParams::validate() const {
    if (!(lower >= 0.0) || !(upper >= lower) || !(decay >= 0.0) || !(e_rate >= 0.0)) {
        throw std::invalid_argument("dt-iou: need upper >= lower >= 0, decay >= 0, expansion rate >= 0");
    }
}

void AssociationWeights::validate() const {
    const double all[] = {dtiou, hpc, hpc_height, hpc_vertical, atcm, appearance};
    for (double v : all) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("association weights must be finite and >= 0");
    }
    if (dtiou + hpc + atcm + appearance <= 0.0) {
        throw std::invalid_argument("association weights: at least one cost weight must be positive");
    }
}

double dtiou_threshold(const DtIouParams& p, int t_occluded) {
    return std::max(p.upper - p.decay * t_occluded, p.lower);
}

double dtiou_cost(const BoundingBox& pred, const BoundingBox& det, int t_occluded, const DtIouParams& p) {
    double score = iou(expand(pred, p.e_rate), expand(det, p.e_rate));
    if (p.fuse_detection_score) score *= det.confidence;
    if (score < dtiou_threshold(p, t_occluded)) return kGated;
    return 1.0 - score;
}

double hpc_cost(const BoundingBox& pred, const BoundingBox& det, double lambda_h, double lambda_y) {
    return lambda_h * std::abs(pred.h - det.h) + lambda_y * std::abs(pred.bottom() - det.bottom());
}

double atcm_cost(double predicted_conf, double detected_conf) {
    return std::abs(std::clamp(predicted_conf, 0.0, 1.0) - detected_conf);
}

double appearance_cost(const Embedding& track, const Embedding& det) {
    if (track.size() != det.size()) throw std::invalid_argument("appearance cost: embedding dimensions differ");
    if (track.norm() < 1e-12 || det.norm() < 1e-12) throw std::invalid_argument("appearance cost: zero-norm embedding");
    return 1.0 - track.dot(det);
}

Embedding normalized(const Embedding& e) {
    const double n = e.norm();
    if (!(n > 1e-12) || !std::isfinite(n)) throw std::invalid_argument("embedding has zero or non-finite norm");
    return e / n;
}

Embedding update_track_embedding(const std::optional<Embedding>& current, const Embedding& next, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("embedding EMA: alpha must lie in [0, 1]");
    if (!current) return next;
    if (current->size() != next.size()) throw std::invalid_argument("embedding EMA: dimensions differ");
    const Embedding blend = alpha * *current + (1.0 - alpha) * next;
    const double n = blend.norm();
    if (n < 1e-12) return *current;
    return blend / n;
}

namespace {

void check_shape(const CostMatrix& m, const CostMatrix& ref, const char* what) {
    if (m.size() == 0 && ref.size() != 0) return;
    if (m.rows() != ref.rows() || m.cols() != ref.cols()) {
        throw std::invalid_argument(std::string("fuse: ") + what + " matrix shape differs from the dt-iou matrix");
    }
}

}  // namespace

CostMatrix fuse(const CostTerms& t, const AssociationWeights& w) {
    check_shape(t.hpc, t.dtiou, "hpc");
    check_shape(t.atcm, t.dtiou, "atcm");
    check_shape(t.appearance, t.dtiou, "appearance");
    CostMatrix out(t.dtiou.rows(), t.dtiou.cols());
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        for (Eigen::Index j = 0; j < out.cols(); ++j) {
            if (is_gated(t.dtiou(i, j))) {
                out(i, j) = kGated;
                continue;
            }
            double c = w.dtiou * t.dtiou(i, j);
            if (w.hpc != 0.0 && t.hpc.size() != 0) c += w.hpc * t.hpc(i, j);
            if (w.atcm != 0.0 && t.atcm.size() != 0) c += w.atcm * t.atcm(i, j);
            if (w.appearance != 0.0 && t.appearance.size() != 0 && !std::isnan(t.appearance(i, j))) {
                c += w.appearance * t.appearance(i, j);
            }
            out(i, j) = c;
        }
    }
    return out;
}

}  // namespace dmsort
