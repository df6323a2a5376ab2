#include "dmsort/kalman.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dmsort {

namespace {

constexpr double kMinSize = 1e-6;

Matrix8d symmetrized(const Matrix8d& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

Matrix8d BoxKalmanFilter::transition() {
    Matrix8d f = Matrix8d::Identity();
    for (int i = 0; i < 4; ++i) f(i, 4 + i) = 1.0;
    return f;
}

KalmanState BoxKalmanFilter::initiate(const BoundingBox& box) const {
    KalmanState s;
    s.mean << box.center_x(), box.center_y(), box.w, box.h, 0, 0, 0, 0;
    const double pw = std_weight_position, vw = std_weight_velocity;
    Vector8d stds;
    stds << 2 * pw * box.w, 2 * pw * box.h, 2 * pw * box.w, 2 * pw * box.h, 10 * vw * box.w, 10 * vw * box.h,
        10 * vw * box.w, 10 * vw * box.h;
    s.covariance = stds.array().square().matrix().asDiagonal();
    return s;
}

KalmanState BoxKalmanFilter::predict(const KalmanState& state) const {
    const double w = state.mean(2), h = state.mean(3);
    const double pw = std_weight_position, vw = std_weight_velocity;
    Vector8d stds;
    stds << pw * w, pw * h, pw * w, pw * h, vw * w, vw * h, vw * w, vw * h;
    const Matrix8d q = stds.array().square().matrix().asDiagonal();
    const Matrix8d f = transition();
    KalmanState out;
    out.mean = f * state.mean;
    out.covariance = symmetrized(f * state.covariance * f.transpose() + q);
    return out;
}

std::vector<KalmanState> BoxKalmanFilter::predict_steps(const KalmanState& state, int steps) const {
    std::vector<KalmanState> out;
    if (steps <= 0) return out;
    out.reserve(static_cast<std::size_t>(steps));
    KalmanState cur = state;
    for (int i = 0; i < steps; ++i) {
        cur = predict(cur);
        out.push_back(cur);
    }
    return out;
}

KalmanState BoxKalmanFilter::update(const KalmanState& state, const BoundingBox& observation,
                                    double noise_scale) const {
    if (!std::isfinite(observation.x) || !std::isfinite(observation.y) || !std::isfinite(observation.w) ||
        !std::isfinite(observation.h)) {
        throw std::invalid_argument("kalman update: non-finite observation");
    }
    const double w = state.mean(2), h = state.mean(3);
    const double pw = std_weight_position * noise_scale;
    Eigen::Vector4d rstd(pw * w, pw * h, pw * w, pw * h);
    const Eigen::Matrix4d r = rstd.array().square().matrix().asDiagonal();

    Eigen::Matrix<double, 4, 8> hm = Eigen::Matrix<double, 4, 8>::Zero();
    hm.leftCols<4>().setIdentity();

    const Eigen::Vector4d z(observation.center_x(), observation.center_y(), observation.w, observation.h);
    const Eigen::Vector4d projected = hm * state.mean;
    const Eigen::Matrix4d s = hm * state.covariance * hm.transpose() + r;
    const Eigen::Matrix<double, 8, 4> pht = state.covariance * hm.transpose();
    // K = P H^T S^-1, solved through the Cholesky factor of S.
    const Eigen::Matrix<double, 8, 4> gain = s.llt().solve(pht.transpose()).transpose();

    KalmanState out;
    out.mean = state.mean + gain * (z - projected);
    const Matrix8d i_kh = Matrix8d::Identity() - gain * hm;
    out.covariance = symmetrized(i_kh * state.covariance * i_kh.transpose() + gain * r * gain.transpose());
    return out;
}

KalmanState BoxKalmanFilter::apply_affine(const KalmanState& state, const AffineTransform& t) const {
    const auto& c = t.coefficients();
    Eigen::Matrix2d lin;
    lin << c[0], c[1], c[3], c[4];
    Matrix8d r = Matrix8d::Zero();
    for (int b = 0; b < 4; ++b) r.block<2, 2>(2 * b, 2 * b) = lin;
    KalmanState out;
    out.mean = r * state.mean;
    out.mean(0) += c[2];
    out.mean(1) += c[5];
    out.covariance = symmetrized(r * state.covariance * r.transpose());
    return out;
}

BoundingBox BoxKalmanFilter::to_box(const KalmanState& state, double confidence) {
    const double w = std::max(state.mean(2), kMinSize);
    const double h = std::max(state.mean(3), kMinSize);
    return BoundingBox::from_center(state.mean(0), state.mean(1), w, h, confidence);
}

ConfidenceKalman ConfidenceKalman::initiate(double confidence, double sigma_conf) {
    ConfidenceKalman ck;
    ck.sigma_conf = sigma_conf;
    ck.mean << confidence, 0.0;
    const double v0 = std::max(ck.measurement_variance(confidence), kProcessStdValue * kProcessStdValue);
    ck.covariance << v0, 0.0, 0.0, 10.0 * kProcessStdVelocity * 10.0 * kProcessStdVelocity;
    return ck;
}

double ConfidenceKalman::predict() {
    Eigen::Matrix2d f;
    f << 1.0, 1.0, 0.0, 1.0;
    Eigen::Matrix2d q = Eigen::Matrix2d::Zero();
    q(0, 0) = kProcessStdValue * kProcessStdValue;
    q(1, 1) = kProcessStdVelocity * kProcessStdVelocity;
    mean = f * mean;
    covariance = f * covariance * f.transpose() + q;
    covariance = 0.5 * (covariance + covariance.transpose());
    return mean(0);
}

void ConfidenceKalman::update(double detected_confidence) {
    const double r = measurement_variance(detected_confidence);
    const double p00 = covariance(0, 0);
    const double s = p00 + r;
    const double innovation = detected_confidence - mean(0);
    // Weighted form so that r == 0 reproduces the measurement exactly.
    mean(0) = (r * mean(0) + p00 * detected_confidence) / s;
    mean(1) += covariance(1, 0) / s * innovation;
    const Eigen::Vector2d k(p00 / s, covariance(1, 0) / s);
    Eigen::Matrix2d i_kh = Eigen::Matrix2d::Identity();
    i_kh(0, 0) -= k(0);
    i_kh(1, 0) -= k(1);
    // Joseph form keeps the covariance PSD.
    covariance = i_kh * covariance * i_kh.transpose() + r * k * k.transpose();
    covariance = 0.5 * (covariance + covariance.transpose());
}

std::pair<double, ConfidenceKalman> atcm_step(const ConfidenceKalman& ck, std::optional<double> detected_conf) {
    ConfidenceKalman next = ck;
    const double predicted = next.predict();
    if (detected_conf) next.update(*detected_conf);
    return {predicted, next};
}

}  // namespace dmsort
