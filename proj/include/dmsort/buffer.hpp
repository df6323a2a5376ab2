#pragma once

#include <deque>
#include <optional>

#include "dmsort/features.hpp"
#include "dmsort/geometry.hpp"

namespace dmsort {

enum class BufferPolicy {
    movesort,      // age-based pop guarded by a minimum length, runs every frame
    deepmovesort,  // untouched during occlusion, drains stale entries on a new observation
};

/// Per-track, time-stamped box history (pixel coordinates).
class MeasurementBuffer {
public:
    MeasurementBuffer(BufferPolicy policy, int t_max, int l_min = 1);

    /// Dispatches on the policy. `x` may be empty (no association at `t`).
    /// Throws std::invalid_argument on time regression.
    void update(const std::optional<TimedBox>& x, int t);

    void update_movesort(const std::optional<TimedBox>& x, int t);
    void update_deepmovesort(const std::optional<TimedBox>& x, int t);

    /// Replaces every stored box by its image under `a`.
    void align_to_camera(const AffineTransform& a);

    const std::deque<TimedBox>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }
    const TimedBox& last() const { return entries_.back(); }
    int frame_first() const { return entries_.front().frame; }

    BufferPolicy policy() const { return policy_; }
    int t_max() const { return t_max_; }
    int l_min() const { return l_min_; }

    /// True when contents changed since the flag was last cleared.
    bool dirty() const { return dirty_; }
    void clear_dirty() { dirty_ = false; }
    /// Entries at least `t_max` frames older than `t`.
    int stale_count(int t) const;

private:
    void check_time(const std::optional<TimedBox>& x, int t) const;

    BufferPolicy policy_;
    int t_max_;
    int l_min_;
    std::deque<TimedBox> entries_;
    bool dirty_ = false;
    int last_time_ = -1;
};

/// Deferred camera alignment: transforms are composed as they arrive and
/// applied to buffer contents on demand. Equivalent to eager per-frame
/// alignment.
class LazyAlignment {
public:
    void push(const AffineTransform& a) { pending_ = compose(a, pending_); }
    const AffineTransform& pending() const { return pending_; }
    /// Applies the accumulated transform to `buffer` and resets it.
    void flush(MeasurementBuffer& buffer);

private:
    AffineTransform pending_;
};

}  // namespace dmsort
