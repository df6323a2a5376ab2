#include "dmsort/motion_model.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace dmsort {

BoundingBox to_normalized(const BoundingBox& px, const ImageSize& s) {
    return {px.x / s.width, px.y / s.height, px.w / s.width, px.h / s.height, px.confidence};
}

BoundingBox to_pixels(const BoundingBox& n, const ImageSize& s) {
    return {n.x * s.width, n.y * s.height, n.w * s.width, n.h * s.height, n.confidence};
}

namespace {

class KalmanTrack final : public TrackMotion {
public:
    KalmanTrack(const BoxKalmanFilter& kf, const TimedBox& first)
        : kf_(kf), state_(kf.initiate(first.box)), frame_(first.frame) {}

    void align(const AffineTransform& a) override { state_ = kf_.apply_affine(state_, a); }

    BoundingBox predict(MeasurementBuffer&, int frame) override {
        if (frame < frame_) throw std::invalid_argument("kalman track: prediction into the past");
        for (; frame_ < frame; ++frame_) state_ = kf_.predict(state_);
        return BoxKalmanFilter::to_box(state_);
    }

    BoundingBox correct(const MeasurementBuffer&, const TimedBox& detection, bool filter) override {
        state_ = kf_.update(state_, detection.box);
        if (!filter) return detection.box;
        return BoxKalmanFilter::to_box(state_, detection.box.confidence);
    }

private:
    const BoxKalmanFilter& kf_;
    KalmanState state_;
    int frame_;
};

class TransFilterTrack final : public TrackMotion {
public:
    TransFilterTrack(const TransFilterModel& model, ImageSize image, std::atomic<long>& passes)
        : model_(model), image_(image), passes_(passes) {}

    void align(const AffineTransform&) override {}

    BoundingBox predict(MeasurementBuffer& buffer, int frame) override {
        if (buffer.empty()) throw std::logic_error("transfilter track: empty buffer");
        if (!ctx_ || buffer.dirty()) {
            const auto& entries = buffer.entries();
            const std::size_t h = static_cast<std::size_t>(model_.config().history);
            const std::size_t begin = entries.size() > h ? entries.size() - h : 0;
            std::vector<TimedBox> history;
            history.reserve(entries.size() - begin);
            for (std::size_t i = begin; i < entries.size(); ++i) {
                history.push_back({entries[i].frame, to_normalized(entries[i].box, image_)});
            }
            ctx_ = model_.encode(history);
            buffer.clear_dirty();
            passes_.fetch_add(1, std::memory_order_relaxed);
        }
        const int m = std::clamp(frame - ctx_->last.frame, 1, model_.config().horizon);
        BoundingBox b = to_pixels(model_.predictions(*ctx_, m).back(), image_);
        b.confidence = buffer.last().box.confidence;
        return b;
    }

    BoundingBox correct(const MeasurementBuffer&, const TimedBox& detection, bool filter) override {
        if (!filter) return detection.box;
        if (!ctx_) throw std::logic_error("transfilter track: correction without an encoder context");
        const TimedBox obs{detection.frame, to_normalized(detection.box, image_)};
        return to_pixels(model_.filter(*ctx_, obs), image_);
    }

private:
    const TransFilterModel& model_;
    ImageSize image_;
    std::atomic<long>& passes_;
    std::optional<EncoderContext> ctx_;
};

}  // namespace

std::unique_ptr<TrackMotion> KalmanMotionModel::start(const TimedBox& first, const ImageSize&) const {
    return std::make_unique<KalmanTrack>(kf_, first);
}

TransFilterMotionModel::TransFilterMotionModel(std::shared_ptr<const TransFilterModel> model)
    : model_(std::move(model)), passes_(std::make_shared<std::atomic<long>>(0)) {
    if (!model_) throw std::invalid_argument("transfilter motion model: null model");
}

std::unique_ptr<TrackMotion> TransFilterMotionModel::start(const TimedBox&, const ImageSize& image) const {
    return std::make_unique<TransFilterTrack>(*model_, image, *passes_);
}

}  // namespace dmsort
