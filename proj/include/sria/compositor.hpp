#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sria/cutout_catalog.hpp"
#include "sria/rng.hpp"
#include "sria/transforms.hpp"

/// Cut-paste compositing: placement under a truncation floor, overlap-based
/// occlusion capping, direct-overwrite pasting and automatic boxes.
namespace sria::compositor {

struct Constraints {
    /// Minimum fraction of an instance's alpha pixels that must land in frame.
    double truncation_floor = 0.25;
    /// Maximum fraction of an instance's in-frame alpha pixels that later
    /// instances may cover.
    double occlusion_cap = 0.6;

    void validate() const;
    bool operator==(const Constraints&) const = default;
};

inline constexpr int kDefaultPlacementRetries = 20;

struct PlacedInstance {
    ClassId class_id;
    std::string source_id;
    transforms::AugmentParams params;
    /// Canvas position of the transformed cutout's top-left pixel. May be
    /// negative or beyond the canvas when the instance is truncated.
    Point offset;
    Cutout transformed;
    std::size_t alpha_pixels = 0;
    std::size_t in_frame_pixels = 0;
    double visible_fraction = 0.0;
    double occluded_fraction = 0.0;
    /// Tight box over in-frame alpha pixels, occluded ones included.
    BoundingBox bbox;
};

struct AnnotatedImage {
    RgbImage canvas;
    std::vector<PlacedInstance> instances;
    std::string background_id;
    std::uint64_t seed = 0;
};

/// The ratio used for every visibility/occlusion comparison, so placement
/// decisions and post-hoc audits agree bit for bit.
inline double fraction(std::size_t part, std::size_t whole) {
    return whole == 0 ? 0.0 : static_cast<double>(part) / static_cast<double>(whole);
}

/// Evaluates a placement without touching any canvas. Returns nullopt when
/// the visible fraction is below `trunc_floor`.
std::optional<PlacedInstance> try_place(int canvas_w, int canvas_h, const Cutout& cutout,
                                        Point offset, double trunc_floor);

/// Overwrites canvas pixels under the instance's in-frame alpha. No blending.
void composite(RgbImage& canvas, const PlacedInstance& inst);

/// try_place followed by composite on success.
std::optional<PlacedInstance> place(RgbImage& canvas, const Cutout& cutout, Point offset,
                                    double trunc_floor);

/// Fraction of `earlier`'s in-frame alpha pixels covered by the alpha of any
/// instance in `later`.
double occlusion_of(const PlacedInstance& earlier, std::span<const PlacedInstance> later,
                    int canvas_w, int canvas_h);

/// Brute-force tight box over the instance's in-frame alpha pixels.
BoundingBox derive_bbox(const PlacedInstance& inst, int canvas_w, int canvas_h);

/// Inclusive range of offsets along one axis for which a `extent`-pixel
/// object can keep at least `trunc_floor` of itself inside `canvas` pixels.
std::pair<int, int> offset_range(int canvas, int extent, double trunc_floor);

struct Pick {
    Cutout cutout;
    transforms::AugmentParams params;
    /// Tried first when set; later attempts sample uniformly.
    std::optional<Point> offset;
};

struct SynthesisOptions {
    int placement_retries = kDefaultPlacementRetries;
    /// Canvas size; the background is resized when it differs. Defaults to the
    /// background's native size.
    std::optional<std::pair<int, int>> canvas_size;
};

/// Places the picks in order. A pick is retried at fresh random offsets while
/// it violates the truncation floor or would push any earlier instance past
/// the occlusion cap, and dropped after the retries run out. Throws
/// DataError when no pick could be placed.
AnnotatedImage synthesize_image(const Background& bg, std::span<const Pick> picks,
                                const Constraints& constraints, Rng& rng,
                                const SynthesisOptions& options = {});

/// Bilinear resize used to bring backgrounds to the canvas size.
RgbImage resize(const RgbImage& img, int width, int height);

}  // namespace sria::compositor
