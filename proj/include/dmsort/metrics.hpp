#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dmsort/io.hpp"

namespace dmsort {

/// GT / prediction correspondences of one frame.
struct FrameMatching {
    int frame = 0;
    std::vector<std::pair<int, int>> pairs;  // (gt id, predicted id)
    std::vector<double> pair_iou;
    std::vector<int> false_positives;        // predicted ids
    std::vector<int> false_negatives;        // gt ids
};

/// Per-frame Hungarian on -IoU among pairs with IoU >= `min_iou`.
std::vector<FrameMatching> match_frames(std::span<const MotRecord> gt, std::span<const MotRecord> pred,
                                        double min_iou = 0.5);

struct ClearMetrics {
    long gt = 0;
    long fp = 0;
    long fn = 0;
    long idsw = 0;
    long matches = 0;
    double mota = 0.0;
    double mean_iou = 0.0;  // over matched pairs, 0 when there are none
};

struct IdentityMetrics {
    double idtp = 0.0;
    double idfp = 0.0;
    double idfn = 0.0;
    double idf1 = 0.0;
};

/// MOTA with CLEAR-MOT identity switches. Throws on empty ground truth.
ClearMetrics clear_metrics(std::span<const MotRecord> gt, std::span<const MotRecord> pred, double min_iou = 0.5);
double mota(std::span<const MotRecord> gt, std::span<const MotRecord> pred);

/// Global one-to-one identity matching maximizing IDTP. Throws on empty
/// ground truth.
IdentityMetrics identity_metrics(std::span<const MotRecord> gt, std::span<const MotRecord> pred,
                                 double min_iou = 0.5);
double idf1(std::span<const MotRecord> gt, std::span<const MotRecord> pred);

/// Mean absolute difference over the 4 coordinates of aligned boxes.
double ade(std::span<const BoundingBox> truth, std::span<const BoundingBox> predicted);

struct EvalReport {
    ClearMetrics clear;
    IdentityMetrics identity;

    /// Table followed by a key=value block.
    std::string format(const std::string& title) const;
};

EvalReport evaluate(std::span<const MotRecord> gt, std::span<const MotRecord> pred);

}  // namespace dmsort
