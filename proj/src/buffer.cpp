#include "dmsort/buffer.hpp"

#include <stdexcept>
#include <string>

namespace dmsort {

MeasurementBuffer::MeasurementBuffer(BufferPolicy policy, int t_max, int l_min)
    : policy_(policy), t_max_(t_max), l_min_(l_min) {
    if (t_max < 1) throw std::invalid_argument("measurement buffer: t_max must be at least 1");
    if (l_min < 0) throw std::invalid_argument("measurement buffer: l_min must be non-negative");
}

void MeasurementBuffer::check_time(const std::optional<TimedBox>& x, int t) const {
    if (t < last_time_) {
        throw std::invalid_argument("measurement buffer: time " + std::to_string(t) + " precedes " +
                                    std::to_string(last_time_));
    }
    if (!entries_.empty() && t < entries_.back().frame) {
        throw std::invalid_argument("measurement buffer: time precedes the last stored frame");
    }
    if (x) {
        if (x->frame != t) throw std::invalid_argument("measurement buffer: measurement frame differs from time");
        if (!entries_.empty() && x->frame <= entries_.back().frame) {
            throw std::invalid_argument("measurement buffer: measurement frames must be strictly increasing");
        }
    }
}

void MeasurementBuffer::update(const std::optional<TimedBox>& x, int t) {
    if (policy_ == BufferPolicy::movesort) {
        update_movesort(x, t);
    } else {
        update_deepmovesort(x, t);
    }
}

void MeasurementBuffer::update_movesort(const std::optional<TimedBox>& x, int t) {
    check_time(x, t);
    last_time_ = t;
    if (x) {
        entries_.push_back(*x);
        dirty_ = true;
    }
    if (!entries_.empty() && t - frame_first() >= t_max_ && static_cast<int>(entries_.size()) > l_min_) {
        entries_.pop_front();
        dirty_ = true;
    }
}

void MeasurementBuffer::update_deepmovesort(const std::optional<TimedBox>& x, int t) {
    check_time(x, t);
    last_time_ = t;
    if (!x) {
        dirty_ = false;
        return;
    }
    entries_.push_back(*x);
    while (t - frame_first() >= t_max_) entries_.pop_front();
    dirty_ = true;
}

void MeasurementBuffer::align_to_camera(const AffineTransform& a) {
    if (a.is_identity() || entries_.empty()) return;
    for (auto& e : entries_) e.box = apply_affine(a, e.box);
    dirty_ = true;
}

int MeasurementBuffer::stale_count(int t) const {
    int n = 0;
    for (const auto& e : entries_) n += t - e.frame >= t_max_ ? 1 : 0;
    return n;
}

void LazyAlignment::flush(MeasurementBuffer& buffer) {
    buffer.align_to_camera(pending_);
    pending_ = AffineTransform{};
}

}  // namespace dmsort
