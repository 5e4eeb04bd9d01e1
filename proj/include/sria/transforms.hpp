#pragma once

#include "sria/cutout_catalog.hpp"
#include "sria/rng.hpp"

/// Geometric augmentations of cutouts. Every transform resamples color with
/// alpha-weighted bilinear interpolation, re-binarizes alpha at 0.5 and
/// returns a tight crop. Class and source ids are carried through.
namespace sria::transforms {

/// Concrete parameters applied to one instance. Identity values mean "off".
struct AugmentParams {
    double rotation_deg = 0.0;
    double scale = 1.0;
    double perspective_tilt = 0.0;
    bool flip_h = false;

    static AugmentParams identity() { return {}; }
    bool is_identity() const noexcept {
        return rotation_deg == 0.0 && scale == 1.0 && perspective_tilt == 0.0 && !flip_h;
    }
    /// |rotation| <= 180, scale > 0, tilt in [0, 0.05].
    void validate() const;

    bool operator==(const AugmentParams&) const = default;
};

/// Sampling bounds for enabled augmentations.
struct AugmentRanges {
    double rotation_min_deg = -45.0;
    double rotation_max_deg = 45.0;
    double scale_min = 0.25;
    double scale_max = 0.6;
    double tilt_max = 0.001;
    double flip_probability = 0.0;

    void validate() const;
    bool operator==(const AugmentRanges&) const = default;
};

inline constexpr double kMaxTilt = 0.05;

/// Rotation about the cutout center; positive angles turn counter-clockwise
/// as displayed. Multiples of 90 degrees permute pixels exactly.
Cutout rotate_cutout(const Cutout& c, double deg);

/// Resamples to round(s·w) × round(s·h), then crops to the alpha support.
/// Throws InvalidArgument when either scaled dimension is below one pixel.
Cutout scale_cutout(const Cutout& c, double s);

/// Out-of-plane tilt approximated by a homography that moves both top
/// corners inward by tilt·width while the bottom edge stays fixed.
Cutout perspective_warp(const Cutout& c, double tilt);

Cutout flip_horizontal(const Cutout& c);

/// Applies flip, scale, rotation and perspective in that order.
Cutout apply_augment(const Cutout& c, const AugmentParams& params);

}  // namespace sria::transforms
