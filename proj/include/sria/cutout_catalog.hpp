#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sria/raster.hpp"

namespace sria {

inline constexpr int kMaxClasses = 31;

struct ClassId {
    int index = 0;
    std::string name;

    bool operator==(const ClassId&) const = default;
};

/// Alpha-matted object crop. Alpha is hard (0 or 255) and its support
/// touches all four edges of the raster.
struct Cutout {
    ClassId class_id;
    RgbaImage rgba;
    std::string source_id;

    int width() const noexcept { return rgba.width(); }
    int height() const noexcept { return rgba.height(); }
};

struct Background {
    std::string id;
    RgbImage rgb;
    std::vector<std::string> tags;
};

/// The 31 object classes of the FOD-A synthesis set, in table order.
const std::array<std::string_view, kMaxClasses>& fod_class_names();

/// Checks the tight-crop invariant: non-empty raster, some opaque pixel, and
/// no fully transparent border row or column.
bool is_tight(const RgbaImage& rgba);

/// Crops `img` to the bounding box of `mask`; alpha is 255 on mask pixels and
/// 0 elsewhere. Throws InvalidArgument on an empty mask or a size mismatch.
Cutout extract_cutout(const RgbImage& img, const BinaryMask& mask, ClassId cls,
                      std::string source_id = {});

/// Re-crops an RGBA raster to its alpha support and hardens alpha at 128.
/// Throws InvalidArgument when no pixel is opaque.
Cutout cutout_from_rgba(const RgbaImage& rgba, ClassId cls, std::string source_id = {});

namespace catalog {

struct ClassEntry {
    ClassId id;
    std::vector<Cutout> cutouts;
};

struct Catalog {
    std::vector<ClassEntry> classes;  // sorted by class index
    std::vector<Background> backgrounds;
    std::vector<std::string> warnings;

    std::size_t cutout_count() const;
    const ClassEntry* find(std::string_view name) const;
};

struct LoadOptions {
    /// When set, directory names must appear here and take their position as
    /// class index. Otherwise indices follow sorted directory names.
    std::optional<std::vector<std::string>> vocabulary;
    unsigned workers = 1;
};

/// Reads `<root>/objects/<class>/` and `<root>/backgrounds/`.
///
/// Objects are either `<id>.png` with a sibling `<id>_mask.png`, or a pre-cut
/// `<id>_rgba.png`. Backgrounds are every `*.png` under `backgrounds/`, with
/// optional tags from `backgrounds/tags.json` ({"file.png": ["crack"]}).
/// Missing subdirectories and empty classes produce warnings, not errors.
/// Unreadable files and image/mask size mismatches raise DataError naming the
/// offending path(s).
Catalog load_catalog(const std::filesystem::path& root, const LoadOptions& options = {});

}  // namespace catalog
}  // namespace sria
