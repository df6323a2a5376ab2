#pragma once

#include <atomic>
#include <memory>
#include <optional>

#include "dmsort/buffer.hpp"
#include "dmsort/kalman.hpp"
#include "dmsort/transfilter.hpp"

namespace dmsort {

struct ImageSize {
    double width = 1920.0;
    double height = 1080.0;
};

BoundingBox to_normalized(const BoundingBox& px, const ImageSize& s);
BoundingBox to_pixels(const BoundingBox& n, const ImageSize& s);

/// Motion state of one track. Boxes at this interface are in pixels; the
/// buffer is owned by the track and passed in.
class TrackMotion {
public:
    virtual ~TrackMotion() = default;

    /// Camera motion between the previous and the current frame.
    virtual void align(const AffineTransform& a) = 0;

    /// Box expected at `frame`. Called once per frame before any correction.
    virtual BoundingBox predict(MeasurementBuffer& buffer, int frame) = 0;

    /// Consumes the detection matched at its frame and returns the box to
    /// store: the filtered estimate when `filter` is set, else the detection.
    virtual BoundingBox correct(const MeasurementBuffer& buffer, const TimedBox& detection, bool filter) = 0;
};

/// Factory shared by all tracks of a tracker.
class MotionModel {
public:
    virtual ~MotionModel() = default;
    virtual std::unique_ptr<TrackMotion> start(const TimedBox& first, const ImageSize& image) const = 0;
    virtual const char* name() const = 0;
};

class KalmanMotionModel final : public MotionModel {
public:
    explicit KalmanMotionModel(BoxKalmanFilter kf = {}) : kf_(kf) {}
    std::unique_ptr<TrackMotion> start(const TimedBox& first, const ImageSize& image) const override;
    const char* name() const override { return "kalman"; }

private:
    BoxKalmanFilter kf_;
};

class TransFilterMotionModel final : public MotionModel {
public:
    explicit TransFilterMotionModel(std::shared_ptr<const TransFilterModel> model);
    std::unique_ptr<TrackMotion> start(const TimedBox& first, const ImageSize& image) const override;
    const char* name() const override { return "transfilter"; }

    const TransFilterModel& model() const { return *model_; }
    /// Encoder passes run by every track started from this factory.
    long encoder_passes() const { return passes_->load(); }

private:
    std::shared_ptr<const TransFilterModel> model_;
    std::shared_ptr<std::atomic<long>> passes_;
};

}  // namespace dmsort
