#pragma once

#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dmsort/geometry.hpp"

namespace dmsort {

using Vector8d = Eigen::Matrix<double, 8, 1>;
using Matrix8d = Eigen::Matrix<double, 8, 8>;

/// Constant-velocity state over (cx, cy, w, h) and their per-frame velocities.
struct KalmanState {
    Vector8d mean = Vector8d::Zero();
    Matrix8d covariance = Matrix8d::Identity();
};

/// Box Kalman filter with noise proportional to the box size (width for the
/// x/w channels, height for the y/h channels).
class BoxKalmanFilter {
public:
    double std_weight_position = 1.0 / 20.0;
    double std_weight_velocity = 1.0 / 160.0;

    KalmanState initiate(const BoundingBox& box) const;

    KalmanState predict(const KalmanState& state) const;

    /// Applies the transition `steps` times and returns every intermediate
    /// state, first element being one step ahead.
    std::vector<KalmanState> predict_steps(const KalmanState& state, int steps) const;

    /// `noise_scale` multiplies the measurement standard deviation.
    KalmanState update(const KalmanState& state, const BoundingBox& observation, double noise_scale = 1.0) const;

    /// Moves the state into the coordinate frame of the transform: the linear
    /// part acts on every (x, y)-pair of the state, the translation on the center.
    KalmanState apply_affine(const KalmanState& state, const AffineTransform& t) const;

    static BoundingBox to_box(const KalmanState& state, double confidence = 1.0);

private:
    static Matrix8d transition();
};

/// 1-D constant-velocity model of detection confidence whose measurement
/// variance shrinks with the detected confidence.
struct ConfidenceKalman {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d covariance = Eigen::Matrix2d::Identity();
    double sigma_conf = 0.2;

    static constexpr double kProcessStdValue = 1e-2;
    static constexpr double kProcessStdVelocity = 1e-3;

    static ConfidenceKalman initiate(double confidence, double sigma_conf = 0.2);

    double measurement_variance(double detected_confidence) const {
        const double s = sigma_conf * (1.0 - detected_confidence);
        return s * s;
    }

    /// Advances one frame in place and returns the predicted (unclamped) value.
    double predict();
    void update(double detected_confidence);
};

/// One frame of the confidence model: predict, then update when a detection
/// is present. Returns the predicted confidence and the new model.
std::pair<double, ConfidenceKalman> atcm_step(const ConfidenceKalman& ck, std::optional<double> detected_conf);

}  // namespace dmsort
