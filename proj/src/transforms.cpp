#include "sria/transforms.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numbers>

namespace sria::transforms {
namespace {

struct Vec2 {
    double x;
    double y;
};

// Source position (continuous pixel coordinates, centers at i + 0.5) for the
// center of output pixel (x, y).
using InverseMap = std::function<Vec2(int x, int y)>;

struct Sample {
    double alpha;  // in [0, 1]
    std::array<double, 3> color;
};

// Bilinear alpha with transparent surroundings; color weighted by alpha so
// that colors hidden under zero alpha never bleed into the result.
Sample sample_bilinear(const RgbaImage& src, Vec2 p) {
    const double fx = p.x - 0.5;
    const double fy = p.y - 0.5;
    const double x0f = std::floor(fx);
    const double y0f = std::floor(fy);
    const double tx = fx - x0f;
    const double ty = fy - y0f;
    const int x0 = static_cast<int>(x0f);
    const int y0 = static_cast<int>(y0f);

    double alpha = 0.0;
    std::array<double, 3> weighted{0.0, 0.0, 0.0};
    const std::array<std::pair<Point, double>, 4> taps{{{{x0, y0}, (1 - tx) * (1 - ty)},
                                                        {{x0 + 1, y0}, tx * (1 - ty)},
                                                        {{x0, y0 + 1}, (1 - tx) * ty},
                                                        {{x0 + 1, y0 + 1}, tx * ty}}};
    for (const auto& [pt, w] : taps) {
        if (w == 0.0 || !src.contains(pt.x, pt.y)) continue;
        const auto& px = src.at(pt.x, pt.y);
        const double a = w * (px[3] / 255.0);
        alpha += a;
        for (int c = 0; c < 3; ++c) weighted[c] += a * px[c];
    }
    Sample s{alpha, {0.0, 0.0, 0.0}};
    if (alpha > 0.0) {
        for (int c = 0; c < 3; ++c) s.color[c] = weighted[c] / alpha;
    }
    return s;
}

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Samples every output pixel, hardens alpha at 0.5 and crops tight. When no
// sample reaches 0.5 the single strongest one is kept so the object survives.
Cutout resample(const Cutout& c, int out_w, int out_h, const InverseMap& inverse) {
    RgbaImage out(out_w, out_h, Rgba{0, 0, 0, 0});
    bool any = false;
    double best_alpha = 0.0;
    Point best{0, 0};
    Rgba best_px{0, 0, 0, 0};
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            const Sample s = sample_bilinear(c.rgba, inverse(x, y));
            const Rgba px{to_byte(s.color[0]), to_byte(s.color[1]), to_byte(s.color[2]), 255};
            if (s.alpha >= 0.5) {
                out.at(x, y) = px;
                any = true;
            } else if (s.alpha > best_alpha) {
                best_alpha = s.alpha;
                best = {x, y};
                best_px = px;
            }
        }
    }
    if (!any) {
        if (best_alpha <= 0.0) {
            throw InvalidArgument("transform left no visible pixel of '" + c.source_id + "'");
        }
        out.at(best.x, best.y) = best_px;
    }
    const auto box = alpha_bounds(out);
    return Cutout{c.class_id, crop(out, *box), c.source_id};
}

Cutout rotate_lattice(const Cutout& c, int quarter_turns) {
    const int w = c.width();
    const int h = c.height();
    const bool swap = quarter_turns % 2 != 0;
    RgbaImage out(swap ? h : w, swap ? w : h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const auto& px = c.rgba.at(x, y);
            switch (quarter_turns) {
                case 0: out.at(x, y) = px; break;
                case 1: out.at(y, w - 1 - x) = px; break;
                case 2: out.at(w - 1 - x, h - 1 - y) = px; break;
                default: out.at(h - 1 - y, x) = px; break;
            }
        }
    }
    return Cutout{c.class_id, std::move(out), c.source_id};
}

// Solves the homography taking `from[i]` to `to[i]`.
Eigen::Matrix3d homography(const std::array<Vec2, 4>& from, const std::array<Vec2, 4>& to) {
    Eigen::Matrix<double, 8, 8> a;
    Eigen::Matrix<double, 8, 1> b;
    for (int i = 0; i < 4; ++i) {
        const double x = from[i].x, y = from[i].y, u = to[i].x, v = to[i].y;
        a.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
        a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
        b(2 * i) = u;
        b(2 * i + 1) = v;
    }
    const Eigen::Matrix<double, 8, 1> h = a.fullPivLu().solve(b);
    Eigen::Matrix3d m;
    m << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
    return m;
}

}  // namespace

void AugmentParams::validate() const {
    if (!(std::abs(rotation_deg) <= 180.0)) throw InvalidArgument("rotation must lie in [-180, 180] degrees");
    if (!(scale > 0.0)) throw InvalidArgument("scale must be positive");
    if (!(perspective_tilt >= 0.0 && perspective_tilt <= kMaxTilt)) {
        throw InvalidArgument("perspective tilt must lie in [0, 0.05]");
    }
}

void AugmentRanges::validate() const {
    if (!(rotation_min_deg <= rotation_max_deg) || rotation_min_deg < -180.0 || rotation_max_deg > 180.0) {
        throw InvalidArgument("rotation range must be ordered and within [-180, 180]");
    }
    if (!(scale_min > 0.0 && scale_min <= scale_max)) {
        throw InvalidArgument("scale range must be positive and ordered");
    }
    if (!(tilt_max >= 0.0 && tilt_max <= kMaxTilt)) {
        throw InvalidArgument("perspective tilt bound must lie in [0, 0.05]");
    }
    if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) {
        throw InvalidArgument("flip probability must lie in [0, 1]");
    }
}

Cutout rotate_cutout(const Cutout& c, double deg) {
    if (!(std::abs(deg) <= 180.0)) throw InvalidArgument("rotation must lie in [-180, 180] degrees");
    const double quarters = deg / 90.0;
    if (quarters == std::floor(quarters)) {
        const int q = ((static_cast<int>(quarters) % 4) + 4) % 4;
        return rotate_lattice(c, q);
    }

    const double theta = deg * std::numbers::pi / 180.0;
    const double cs = std::cos(theta);
    const double sn = std::sin(theta);
    const double w = c.width();
    const double h = c.height();
    const int out_w = static_cast<int>(std::ceil(std::abs(w * cs) + std::abs(h * sn))) + 2;
    const int out_h = static_cast<int>(std::ceil(std::abs(w * sn) + std::abs(h * cs))) + 2;
    const double cx = w / 2.0, cy = h / 2.0;
    const double ox = out_w / 2.0, oy = out_h / 2.0;
    // Forward: out − o = R (p − c), R = [[cos, sin], [−sin, cos]] in y-down
    // coordinates. Inverse uses Rᵀ.
    return resample(c, out_w, out_h, [=](int x, int y) {
        const double dx = x + 0.5 - ox;
        const double dy = y + 0.5 - oy;
        return Vec2{cx + cs * dx - sn * dy, cy + sn * dx + cs * dy};
    });
}

Cutout scale_cutout(const Cutout& c, double s) {
    if (!(s > 0.0)) throw InvalidArgument("scale must be positive");
    if (s == 1.0) return c;
    const long out_w = std::lround(s * c.width());
    const long out_h = std::lround(s * c.height());
    if (out_w < 1 || out_h < 1) {
        throw InvalidArgument("scaling '" + c.source_id + "' by " + std::to_string(s) +
                              " leaves less than one pixel");
    }
    const double rx = static_cast<double>(c.width()) / static_cast<double>(out_w);
    const double ry = static_cast<double>(c.height()) / static_cast<double>(out_h);
    return resample(c, static_cast<int>(out_w), static_cast<int>(out_h), [=](int x, int y) {
        return Vec2{(x + 0.5) * rx, (y + 0.5) * ry};
    });
}

Cutout perspective_warp(const Cutout& c, double tilt) {
    if (!(tilt >= 0.0 && tilt <= kMaxTilt)) {
        throw InvalidArgument("perspective tilt must lie in [0, 0.05]");
    }
    if (tilt == 0.0) return c;
    const double w = c.width();
    const double h = c.height();
    const double inset = tilt * w;
    const std::array<Vec2, 4> rect{{{0, 0}, {w, 0}, {w, h}, {0, h}}};
    const std::array<Vec2, 4> quad{{{inset, 0}, {w - inset, 0}, {w, h}, {0, h}}};
    const Eigen::Matrix3d to_source = homography(quad, rect);
    return resample(c, c.width(), c.height(), [&to_source](int x, int y) {
        const Eigen::Vector3d p = to_source * Eigen::Vector3d(x + 0.5, y + 0.5, 1.0);
        return Vec2{p.x() / p.z(), p.y() / p.z()};
    });
}

Cutout flip_horizontal(const Cutout& c) {
    RgbaImage out(c.width(), c.height());
    for (int y = 0; y < c.height(); ++y) {
        for (int x = 0; x < c.width(); ++x) out.at(c.width() - 1 - x, y) = c.rgba.at(x, y);
    }
    return Cutout{c.class_id, std::move(out), c.source_id};
}

Cutout apply_augment(const Cutout& c, const AugmentParams& params) {
    params.validate();
    Cutout out = params.flip_h ? flip_horizontal(c) : c;
    if (params.scale != 1.0) out = scale_cutout(out, params.scale);
    if (params.rotation_deg != 0.0) out = rotate_cutout(out, params.rotation_deg);
    if (params.perspective_tilt != 0.0) out = perspective_warp(out, params.perspective_tilt);
    return out;
}

}  // namespace sria::transforms
