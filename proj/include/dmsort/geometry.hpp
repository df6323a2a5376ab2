#pragma once

#include <array>
#include <cmath>

namespace dmsort {

/// Axis-aligned box in MOTChallenge layout: top-left corner plus size.
/// Center and corner forms are derived views.
struct BoundingBox {
    double x = 0.0;  // left
    double y = 0.0;  // top
    double w = 1.0;
    double h = 1.0;
    double confidence = 1.0;

    double right() const { return x + w; }
    double bottom() const { return y + h; }
    double center_x() const { return x + 0.5 * w; }
    double center_y() const { return y + 0.5 * h; }
    double area() const { return w * h; }

    static BoundingBox from_center(double cx, double cy, double w, double h, double conf = 1.0) {
        return {cx - 0.5 * w, cy - 0.5 * h, w, h, conf};
    }

    bool operator==(const BoundingBox&) const = default;
};

/// Positive size, confidence in [0,1], all fields finite.
bool is_valid(const BoundingBox& b);

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// 2x3 planar affine map  p' = [a b; d e] p + [c; f].
class AffineTransform {
public:
    /// Identity.
    AffineTransform() = default;

    /// Coefficients in row-major order (a, b, c, d, e, f). Throws
    /// std::invalid_argument when the linear part is singular.
    explicit AffineTransform(const std::array<double, 6>& coefficients);

    static AffineTransform identity() { return {}; }
    static AffineTransform translation(double tx, double ty);
    static AffineTransform scaling(double sx, double sy);

    const std::array<double, 6>& coefficients() const { return m_; }
    double determinant() const { return m_[0] * m_[4] - m_[1] * m_[3]; }
    bool is_identity() const;

    Point2 apply(Point2 p) const {
        return {m_[0] * p.x + m_[1] * p.y + m_[2], m_[3] * p.x + m_[4] * p.y + m_[5]};
    }

    bool operator==(const AffineTransform&) const = default;

private:
    std::array<double, 6> m_{1.0, 0.0, 0.0, 0.0, 1.0, 0.0};
};

double iou(const BoundingBox& a, const BoundingBox& b);

/// Grows width and height by `e_rate` of themselves around the fixed center.
BoundingBox expand(const BoundingBox& b, double e_rate);

/// Maps the top-left and bottom-right corners and returns the axis-aligned
/// box they span.
BoundingBox apply_affine(const AffineTransform& t, const BoundingBox& b);

/// apply(compose(outer, inner), p) == apply(outer, apply(inner, p))
AffineTransform compose(const AffineTransform& outer, const AffineTransform& inner);

}  // namespace dmsort
