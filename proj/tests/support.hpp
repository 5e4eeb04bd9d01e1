#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "sria/cutout_catalog.hpp"
#include "sria/png_io.hpp"
#include "sria/raster.hpp"
#include "sria/rng.hpp"

namespace test {

namespace fs = std::filesystem;

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        std::random_device rd;
        path_ = fs::temp_directory_path() /
                ("sria_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline sria::RgbImage random_rgb(sria::Rng& rng, int w, int h) {
    sria::RgbImage img(w, h);
    for (auto& p : img.pixels()) {
        for (auto& c : p) c = static_cast<std::uint8_t>(sria::uniform_int(rng, 0, 255));
    }
    return img;
}

/// Random blob: union of a few filled ellipses, never empty.
inline sria::BinaryMask random_blob(sria::Rng& rng, int w, int h) {
    sria::BinaryMask m(w, h);
    const int n = static_cast<int>(sria::uniform_int(rng, 1, 3));
    for (int k = 0; k < n; ++k) {
        const double cx = sria::uniform_real(rng, 0.3 * w, 0.7 * w);
        const double cy = sria::uniform_real(rng, 0.3 * h, 0.7 * h);
        const double rx = sria::uniform_real(rng, 0.15 * w, 0.45 * w);
        const double ry = sria::uniform_real(rng, 0.15 * h, 0.45 * h);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
                if (dx * dx + dy * dy <= 1.0) m.at(x, y) = 1;
            }
        }
    }
    m.at(w / 2, h / 2) = 1;
    return m;
}

inline sria::Cutout random_cutout(sria::Rng& rng, int w, int h, int class_index = 0) {
    const auto img = random_rgb(rng, w, h);
    const auto mask = random_blob(rng, w, h);
    return sria::extract_cutout(img, mask, {class_index, "c" + std::to_string(class_index)},
                                "src" + std::to_string(rng() % 1000));
}

inline sria::Cutout solid_cutout(int w, int h, sria::Rgb color = {200, 10, 10}) {
    sria::RgbaImage rgba(w, h);
    for (auto& p : rgba.pixels()) p = {color[0], color[1], color[2], 255};
    return sria::cutout_from_rgba(rgba, {0, "solid"}, "solid");
}

/// In-memory catalog with `classes` classes of `per_class` random cutouts.
inline sria::catalog::Catalog toy_catalog(std::uint64_t seed, int classes, int per_class, int backgrounds,
                                          int bg_w = 160, int bg_h = 120) {
    sria::Rng rng(seed);
    sria::catalog::Catalog cat;
    for (int c = 0; c < classes; ++c) {
        sria::catalog::ClassEntry e;
        e.id = {c, "class" + std::to_string(c)};
        for (int i = 0; i < per_class; ++i) {
            const int w = static_cast<int>(sria::uniform_int(rng, 30, 70));
            const int h = static_cast<int>(sria::uniform_int(rng, 30, 70));
            auto cut = random_cutout(rng, w, h, c);
            cut.class_id = e.id;
            cut.source_id = e.id.name + "/" + std::to_string(i);
            e.cutouts.push_back(std::move(cut));
        }
        cat.classes.push_back(std::move(e));
    }
    for (int b = 0; b < backgrounds; ++b) {
        cat.backgrounds.push_back({"bg" + std::to_string(b), random_rgb(rng, bg_w, bg_h), {}});
    }
    return cat;
}

/// Writes a catalog directory: objects/<class>/<i>.png + <i>_mask.png and
/// backgrounds/bg<i>.png.
inline void write_toy_catalog_dir(const fs::path& root, std::uint64_t seed, const std::vector<std::string>& classes,
                                  int per_class, int backgrounds) {
    sria::Rng rng(seed);
    for (const auto& name : classes) {
        const auto dir = root / "objects" / name;
        fs::create_directories(dir);
        for (int i = 0; i < per_class; ++i) {
            const int w = static_cast<int>(sria::uniform_int(rng, 30, 60));
            const int h = static_cast<int>(sria::uniform_int(rng, 30, 60));
            sria::png::write(dir / (std::to_string(i) + ".png"), random_rgb(rng, w, h));
            sria::png::write(dir / (std::to_string(i) + "_mask.png"), random_blob(rng, w, h));
        }
    }
    fs::create_directories(root / "backgrounds");
    for (int b = 0; b < backgrounds; ++b) {
        sria::png::write(root / "backgrounds" / ("bg" + std::to_string(b) + ".png"), random_rgb(rng, 160, 120));
    }
}

/// Independent alpha scan of a pasted cutout: counts of total / in-frame
/// alpha pixels and the tight in-frame box (x1, y1 exclusive).
struct AlphaScan {
    std::size_t total = 0;
    std::size_t inside = 0;
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

inline AlphaScan scan_alpha(const sria::RgbaImage& rgba, int ox, int oy, int cw, int ch) {
    AlphaScan s;
    int x0 = 1 << 30, y0 = 1 << 30, x1 = -(1 << 30), y1 = -(1 << 30);
    for (int y = 0; y < rgba.height(); ++y) {
        for (int x = 0; x < rgba.width(); ++x) {
            if (rgba.at(x, y)[3] == 0) continue;
            ++s.total;
            const int X = ox + x, Y = oy + y;
            if (X < 0 || Y < 0 || X >= cw || Y >= ch) continue;
            ++s.inside;
            x0 = std::min(x0, X);
            y0 = std::min(y0, Y);
            x1 = std::max(x1, X + 1);
            y1 = std::max(y1, Y + 1);
        }
    }
    if (s.inside) s.x0 = x0, s.y0 = y0, s.x1 = x1, s.y1 = y1;
    return s;
}

}  // namespace test
