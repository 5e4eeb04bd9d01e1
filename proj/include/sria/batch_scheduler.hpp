#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sria/compositor.hpp"
#include "sria/cutout_catalog.hpp"
#include "sria/transforms.hpp"

namespace sria::batch {

/// One batch of the per-class synthesis loop: which augmentations are drawn
/// at random. Disabled augmentations use identity values.
struct BatchRecipe {
    int id = 1;  // 1..6
    bool use_rotation = false;
    bool use_scale = false;
    bool use_occlusion = false;
    bool use_truncation = true;
    bool use_instances = false;

    std::string name() const { return "B" + std::to_string(id); }
    bool operator==(const BatchRecipe&) const = default;
};

inline constexpr int kBatchCount = 6;

/// B1 = {O,T}, B2 = {R,S,O,T}, B3 = {I,T}, B4 = {S,R,I,T}, B5 = {R,T,O},
/// B6 = {S,T,O}.
const std::array<BatchRecipe, kBatchCount>& standard_recipes();

enum class CountMode { uniform, fixed };

struct SynthesisConfig {
    /// Class names to synthesize; empty means every catalog class.
    std::vector<std::string> classes;
    int per_batch_cap = 65;
    /// uniform: each batch draws its image count from [1, cap]; fixed: cap.
    CountMode count_mode = CountMode::uniform;
    transforms::AugmentRanges ranges;
    compositor::Constraints constraints;
    int instances_min = 1;
    int instances_max = 6;
    std::uint64_t master_seed = 0;
    int placement_retries = compositor::kDefaultPlacementRetries;
    std::optional<std::pair<int, int>> canvas_size;

    void validate() const;
    bool operator==(const SynthesisConfig&) const = default;
};

/// Field names mirror the struct; missing keys keep their defaults.
void to_json(nlohmann::json& j, const SynthesisConfig& cfg);
void from_json(const nlohmann::json& j, SynthesisConfig& cfg);

/// Stable 64-bit FNV-1a of the canonical JSON form.
std::uint64_t config_hash(const SynthesisConfig& cfg);

/// The FOD preset: 300×300 canvas, defaults elsewhere.
SynthesisConfig fod_preset();

struct ImageJob {
    ClassId class_id;
    std::size_t class_slot = 0;  // index into the catalog's class list
    int batch = 1;               // recipe id
    int index = 0;               // position within the batch
    std::uint64_t seed = 0;

    /// File stem, e.g. "07_B2_012".
    std::string stem() const;
};

/// One image of a batch with recipe `recipe`. Instance count, background,
/// cutouts and enabled parameters are drawn from `seed` only.
compositor::AnnotatedImage generate_image(const BatchRecipe& recipe, std::span<const Cutout> cutouts,
                                          std::span<const Background> backgrounds,
                                          const SynthesisConfig& cfg, std::uint64_t seed);

/// `count` images for one class. Image i uses derive_seed(batch_seed, {i}).
std::vector<compositor::AnnotatedImage> run_batch(const BatchRecipe& recipe,
                                                  std::span<const Cutout> cutouts,
                                                  std::span<const Background> backgrounds, int count,
                                                  const SynthesisConfig& cfg, std::uint64_t batch_seed);

struct ClassStats {
    ClassId id;
    std::size_t masks_used = 0;
    std::size_t images_produced = 0;
    std::size_t instances = 0;
    std::array<std::size_t, kBatchCount> per_batch{};
};

struct DatasetManifest {
    std::vector<ClassStats> classes;
    std::size_t total_masks = 0;
    std::size_t total_images = 0;
    std::size_t total_instances = 0;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;

    nlohmann::json to_json() const;
    static DatasetManifest from_json(const nlohmann::json& j);
};

/// Every image the configuration will produce, in canonical order
/// (class index, batch, image index), plus the manifest skeleton with
/// masks_used filled in. Classes without cutouts are kept in the manifest
/// with zero images and a warning.
struct Plan {
    std::vector<ImageJob> jobs;
    DatasetManifest manifest;
};
Plan plan_dataset(const SynthesisConfig& cfg, const catalog::Catalog& cat);

/// Receives each finished image; may be called concurrently from workers.
using ImageSink = std::function<void(std::size_t job_index, const ImageJob&, compositor::AnnotatedImage&&)>;

/// Runs every planned job on `workers` threads and returns the manifest.
/// Output depends only on (catalog, config), never on worker count.
DatasetManifest run_all(const SynthesisConfig& cfg, const catalog::Catalog& cat, unsigned workers,
                        const ImageSink& sink);

struct GeneratedImage {
    ImageJob job;
    compositor::AnnotatedImage image;
};

/// In-memory variant, images in canonical job order.
std::pair<std::vector<GeneratedImage>, DatasetManifest> run_all(const SynthesisConfig& cfg,
                                                                const catalog::Catalog& cat,
                                                                unsigned workers = 1);

}  // namespace sria::batch
