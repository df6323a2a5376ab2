#pragma once

#include <optional>

#include <Eigen/Dense>

#include "dmsort/assignment.hpp"
#include "dmsort/geometry.hpp"

namespace dmsort {

using Embedding = Eigen::VectorXd;

/// Decaying IoU gate. upper == lower with decay 0 is a plain IoU gate.
struct DtIouParams {
    double upper = 0.5;
    double lower = 0.5;
    double decay = 0.0;
    double e_rate = 0.0;
    bool fuse_detection_score = false;

    void validate() const;
};

/// Cost weights of one cascade. The appearance weight is only honoured where
/// embeddings exist.
struct AssociationWeights {
    double dtiou = 1.0;
    double hpc = 0.0;
    double hpc_height = 1.0;
    double hpc_vertical = 1.0;
    double atcm = 0.0;
    double appearance = 0.0;

    void validate() const;
};

/// max(upper - decay * t_occluded, lower)
double dtiou_threshold(const DtIouParams& p, int t_occluded);

/// 1 - score, or kGated when the (possibly confidence-fused) expanded IoU
/// falls below the threshold.
double dtiou_cost(const BoundingBox& pred, const BoundingBox& det, int t_occluded, const DtIouParams& p);

/// Height and bottom-edge distance; expects normalized boxes.
double hpc_cost(const BoundingBox& pred, const BoundingBox& det, double lambda_h, double lambda_y);

/// |clamp(predicted, 0, 1) - detected|
double atcm_cost(double predicted_conf, double detected_conf);

/// Cosine distance of unit vectors. Throws on zero-norm input.
double appearance_cost(const Embedding& track, const Embedding& det);

/// EMA of unit embeddings, re-normalized. A near-zero blend keeps `current`.
Embedding update_track_embedding(const std::optional<Embedding>& current, const Embedding& next, double alpha);

/// L2-normalizes; throws std::invalid_argument for a (near) zero vector.
Embedding normalized(const Embedding& e);

/// Per-method matrices of one cascade. Unused methods may be left empty;
/// appearance cells without an embedding hold NaN.
struct CostTerms {
    CostMatrix dtiou;
    CostMatrix hpc;
    CostMatrix atcm;
    CostMatrix appearance;
};

/// Weighted sum; cells gated in `dtiou` stay gated.
CostMatrix fuse(const CostTerms& terms, const AssociationWeights& w);

}  // namespace dmsort
