#include "sria/compositor.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace sria::compositor {
namespace {

bool opaque(const Rgba& p) { return p[3] != 0; }

// Calls fn(canvas_x, canvas_y, local_x, local_y) for each in-frame alpha pixel.
template <typename Fn>
void for_each_in_frame(const Cutout& c, Point offset, int canvas_w, int canvas_h, Fn&& fn) {
    const int x_lo = std::max(0, -offset.x);
    const int y_lo = std::max(0, -offset.y);
    const int x_hi = std::min(c.width(), canvas_w - offset.x);
    const int y_hi = std::min(c.height(), canvas_h - offset.y);
    for (int y = y_lo; y < y_hi; ++y) {
        for (int x = x_lo; x < x_hi; ++x) {
            if (opaque(c.rgba.at(x, y))) fn(offset.x + x, offset.y + y, x, y);
        }
    }
}

std::size_t count_alpha(const Cutout& c) {
    return static_cast<std::size_t>(
        std::count_if(c.rgba.pixels().begin(), c.rgba.pixels().end(), opaque));
}

}  // namespace

void Constraints::validate() const {
    if (!(truncation_floor > 0.0 && truncation_floor <= 1.0)) {
        throw InvalidArgument("truncation floor must lie in (0, 1]");
    }
    if (!(occlusion_cap >= 0.0 && occlusion_cap < 1.0)) {
        throw InvalidArgument("occlusion cap must lie in [0, 1)");
    }
}

std::optional<PlacedInstance> try_place(int canvas_w, int canvas_h, const Cutout& cutout,
                                        Point offset, double trunc_floor) {
    if (!(trunc_floor > 0.0 && trunc_floor <= 1.0)) {
        throw InvalidArgument("truncation floor must lie in (0, 1]");
    }
    const std::size_t total = count_alpha(cutout);
    if (total == 0) throw InvalidArgument("cannot place a cutout without opaque pixels");

    std::size_t inside = 0;
    int x0 = canvas_w, y0 = canvas_h, x1 = -1, y1 = -1;
    for_each_in_frame(cutout, offset, canvas_w, canvas_h, [&](int cx, int cy, int, int) {
        ++inside;
        x0 = std::min(x0, cx);
        y0 = std::min(y0, cy);
        x1 = std::max(x1, cx);
        y1 = std::max(y1, cy);
    });
    const double visible = fraction(inside, total);
    if (inside == 0 || visible < trunc_floor) return std::nullopt;

    PlacedInstance inst;
    inst.class_id = cutout.class_id;
    inst.source_id = cutout.source_id;
    inst.offset = offset;
    inst.transformed = cutout;
    inst.alpha_pixels = total;
    inst.in_frame_pixels = inside;
    inst.visible_fraction = visible;
    inst.bbox = BoundingBox{x0, y0, x1 + 1, y1 + 1};
    return inst;
}

void composite(RgbImage& canvas, const PlacedInstance& inst) {
    const auto& c = inst.transformed;
    for_each_in_frame(c, inst.offset, canvas.width(), canvas.height(), [&](int cx, int cy, int x, int y) {
        const auto& p = c.rgba.at(x, y);
        canvas.at(cx, cy) = {p[0], p[1], p[2]};
    });
}

std::optional<PlacedInstance> place(RgbImage& canvas, const Cutout& cutout, Point offset,
                                    double trunc_floor) {
    auto inst = try_place(canvas.width(), canvas.height(), cutout, offset, trunc_floor);
    if (inst) composite(canvas, *inst);
    return inst;
}

double occlusion_of(const PlacedInstance& earlier, std::span<const PlacedInstance> later,
                    int canvas_w, int canvas_h) {
    std::vector<std::uint8_t> covered(static_cast<std::size_t>(canvas_w) * canvas_h, 0);
    for (const auto& l : later) {
        for_each_in_frame(l.transformed, l.offset, canvas_w, canvas_h, [&](int cx, int cy, int, int) {
            covered[static_cast<std::size_t>(cy) * canvas_w + cx] = 1;
        });
    }
    std::size_t mine = 0, hidden = 0;
    for_each_in_frame(earlier.transformed, earlier.offset, canvas_w, canvas_h, [&](int cx, int cy, int, int) {
        ++mine;
        hidden += covered[static_cast<std::size_t>(cy) * canvas_w + cx];
    });
    return fraction(hidden, mine);
}

BoundingBox derive_bbox(const PlacedInstance& inst, int canvas_w, int canvas_h) {
    int x0 = canvas_w, y0 = canvas_h, x1 = -1, y1 = -1;
    for_each_in_frame(inst.transformed, inst.offset, canvas_w, canvas_h, [&](int cx, int cy, int, int) {
        x0 = std::min(x0, cx);
        y0 = std::min(y0, cy);
        x1 = std::max(x1, cx);
        y1 = std::max(y1, cy);
    });
    if (x1 < 0) throw InvalidArgument("instance has no in-frame pixel");
    return {x0, y0, x1 + 1, y1 + 1};
}

std::pair<int, int> offset_range(int canvas, int extent, double trunc_floor) {
    // For a solid object this is exactly the feasible set; for other shapes
    // it is a superset and infeasible draws are rejected by try_place.
    const int lo = -static_cast<int>(std::floor((1.0 - trunc_floor) * extent));
    const int hi = canvas - static_cast<int>(std::ceil(trunc_floor * extent));
    return {lo, std::max(lo, hi)};
}

RgbImage resize(const RgbImage& img, int width, int height) {
    if (img.same_shape(width, height)) return img;
    if (width < 1 || height < 1) throw InvalidArgument("resize target must be at least 1x1");
    RgbImage out(width, height);
    const double rx = static_cast<double>(img.width()) / width;
    const double ry = static_cast<double>(img.height()) / height;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * ry - 0.5, 0.0, img.height() - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, img.height() - 1);
        const double ty = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * rx - 0.5, 0.0, img.width() - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, img.width() - 1);
            const double tx = fx - x0;
            Rgb px;
            for (int c = 0; c < 3; ++c) {
                const double top = img.at(x0, y0)[c] * (1 - tx) + img.at(x1, y0)[c] * tx;
                const double bottom = img.at(x0, y1)[c] * (1 - tx) + img.at(x1, y1)[c] * tx;
                px[c] = static_cast<std::uint8_t>(std::lround(top * (1 - ty) + bottom * ty));
            }
            out.at(x, y) = px;
        }
    }
    return out;
}

AnnotatedImage synthesize_image(const Background& bg, std::span<const Pick> picks,
                                const Constraints& constraints, Rng& rng,
                                const SynthesisOptions& options) {
    constraints.validate();
    if (picks.empty() || picks.size() > 6) {
        throw InvalidArgument("an image takes between 1 and 6 picks");
    }
    if (bg.rgb.empty()) throw InvalidArgument("background '" + bg.id + "' is empty");

    AnnotatedImage out;
    out.background_id = bg.id;
    out.canvas = options.canvas_size ? resize(bg.rgb, options.canvas_size->first, options.canvas_size->second)
                                     : bg.rgb;
    const int cw = out.canvas.width();
    const int ch = out.canvas.height();

    // owner[p] = index of the topmost accepted instance at canvas pixel p.
    std::vector<int> owner(static_cast<std::size_t>(cw) * ch, -1);
    std::vector<std::size_t> covered;  // per accepted instance

    for (const auto& pick : picks) {
        const Cutout shaped = transforms::apply_augment(pick.cutout, pick.params);
        const auto xr = offset_range(cw, shaped.width(), constraints.truncation_floor);
        const auto yr = offset_range(ch, shaped.height(), constraints.truncation_floor);

        std::optional<PlacedInstance> accepted;
        for (int attempt = 0; attempt <= options.placement_retries && !accepted; ++attempt) {
            Point offset;
            if (attempt == 0 && pick.offset) {
                offset = *pick.offset;
            } else {
                offset = {static_cast<int>(uniform_int(rng, xr.first, xr.second)),
                          static_cast<int>(uniform_int(rng, yr.first, yr.second))};
            }
            auto candidate = try_place(cw, ch, shaped, offset, constraints.truncation_floor);
            if (!candidate) continue;

            std::unordered_map<int, std::size_t> newly_covered;
            for_each_in_frame(shaped, offset, cw, ch, [&](int cx, int cy, int, int) {
                const int o = owner[static_cast<std::size_t>(cy) * cw + cx];
                if (o >= 0) ++newly_covered[o];
            });
            const bool fits = std::all_of(newly_covered.begin(), newly_covered.end(), [&](const auto& kv) {
                const auto& prev = out.instances[static_cast<std::size_t>(kv.first)];
                return fraction(covered[kv.first] + kv.second, prev.in_frame_pixels) <=
                       constraints.occlusion_cap;
            });
            if (!fits) continue;

            for (const auto& [o, n] : newly_covered) covered[o] += n;
            accepted = std::move(candidate);
        }

        if (!accepted) {
            spdlog::debug("dropping '{}' after {} placement retries", pick.cutout.source_id,
                          options.placement_retries);
            continue;
        }
        accepted->params = pick.params;
        const int index = static_cast<int>(out.instances.size());
        for_each_in_frame(shaped, accepted->offset, cw, ch, [&](int cx, int cy, int, int) {
            owner[static_cast<std::size_t>(cy) * cw + cx] = index;
        });
        covered.push_back(0);
        out.instances.push_back(std::move(*accepted));
    }

    if (out.instances.empty()) {
        throw DataError("no instance could be placed on background '" + bg.id + "'");
    }
    for (std::size_t i = 0; i < out.instances.size(); ++i) {
        out.instances[i].occluded_fraction = fraction(covered[i], out.instances[i].in_frame_pixels);
        composite(out.canvas, out.instances[i]);
    }
    return out;
}

}  // namespace sria::compositor
