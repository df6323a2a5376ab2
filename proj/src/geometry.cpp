#include "dmsort/geometry.hpp"

#include <algorithm>
#include <stdexcept>

namespace dmsort {

namespace {
constexpr double kMinDeterminant = 1e-9;
}

bool is_valid(const BoundingBox& b) {
    return std::isfinite(b.x) && std::isfinite(b.y) && std::isfinite(b.w) && std::isfinite(b.h) &&
           b.w > 0.0 && b.h > 0.0 && b.confidence >= 0.0 && b.confidence <= 1.0;
}

AffineTransform::AffineTransform(const std::array<double, 6>& coefficients) : m_(coefficients) {
    for (double c : m_) {
        if (!std::isfinite(c)) throw std::invalid_argument("affine transform has a non-finite coefficient");
    }
    if (std::abs(determinant()) <= kMinDeterminant) {
        throw std::invalid_argument("affine transform is singular");
    }
}

AffineTransform AffineTransform::translation(double tx, double ty) {
    return AffineTransform({1.0, 0.0, tx, 0.0, 1.0, ty});
}

AffineTransform AffineTransform::scaling(double sx, double sy) {
    return AffineTransform({sx, 0.0, 0.0, 0.0, sy, 0.0});
}

bool AffineTransform::is_identity() const { return *this == AffineTransform{}; }

double iou(const BoundingBox& a, const BoundingBox& b) {
    const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
    const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    return std::clamp(inter / uni, 0.0, 1.0);
}

BoundingBox expand(const BoundingBox& b, double e_rate) {
    if (e_rate == 0.0) return b;
    const double w = b.w * (1.0 + e_rate);
    const double h = b.h * (1.0 + e_rate);
    return BoundingBox::from_center(b.center_x(), b.center_y(), w, h, b.confidence);
}

BoundingBox apply_affine(const AffineTransform& t, const BoundingBox& b) {
    const Point2 p1 = t.apply({b.x, b.y});
    const Point2 p2 = t.apply({b.right(), b.bottom()});
    const double x0 = std::min(p1.x, p2.x);
    const double y0 = std::min(p1.y, p2.y);
    return {x0, y0, std::max(p1.x, p2.x) - x0, std::max(p1.y, p2.y) - y0, b.confidence};
}

AffineTransform compose(const AffineTransform& outer, const AffineTransform& inner) {
    const auto& o = outer.coefficients();
    const auto& i = inner.coefficients();
    return AffineTransform({
        o[0] * i[0] + o[1] * i[3],
        o[0] * i[1] + o[1] * i[4],
        o[0] * i[2] + o[1] * i[5] + o[2],
        o[3] * i[0] + o[4] * i[3],
        o[3] * i[1] + o[4] * i[4],
        o[3] * i[2] + o[4] * i[5] + o[5],
    });
}

}  // namespace dmsort
