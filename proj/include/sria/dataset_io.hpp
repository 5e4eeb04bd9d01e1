#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sria/batch_scheduler.hpp"
#include "sria/cutout_catalog.hpp"
#include "sria/raster.hpp"
#include "sria/rng.hpp"

namespace sria::dataset_io {

/// Center/size form with every value a fraction of the image dimensions.
struct NormalizedBox {
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;
};

struct Annotation {
    int class_index = 0;
    BoundingBox bbox;

    bool operator==(const Annotation&) const = default;
};

NormalizedBox normalize(const BoundingBox& box, int image_w, int image_h);
BoxF denormalize(const NormalizedBox& box, int image_w, int image_h);
/// Denormalizes and rounds every edge to the nearest pixel.
BoundingBox denormalize_rounded(const NormalizedBox& box, int image_w, int image_h);

// ---------------------------------------------------------------------------
// Detector text format: one object per line, `class cx cy w h` with six
// decimals, LF endings. Prediction files append a confidence column.

std::string write_detector_txt(std::span<const Annotation> annotations, int image_w, int image_h);

struct DetectorLine {
    int class_index = 0;
    NormalizedBox box;
    std::optional<double> confidence;
};

/// Parses 5-field (ground truth) or 6-field (prediction) lines. Blank lines
/// are skipped. Malformed content raises DataError mentioning `source`.
std::vector<DetectorLine> parse_detector_txt(std::string_view text, std::string_view source = "<text>");

// ---------------------------------------------------------------------------
// COCO-style manifest.

struct CocoImage {
    std::string file_name;
    int width = 0;
    int height = 0;
    std::vector<Annotation> annotations;
};

/// images / annotations / categories arrays with dense ids starting at 1 for
/// images and annotations; category ids are class indices. Boxes are
/// absolute [x, y, w, h] with area = w·h.
nlohmann::json write_coco_manifest(std::span<const CocoImage> images, std::span<const ClassId> categories);

std::vector<CocoImage> read_coco_manifest(const nlohmann::json& doc);

/// UTF-8, sorted keys, two-space indentation, trailing newline.
std::string dump_json(const nlohmann::json& doc);

// ---------------------------------------------------------------------------
// Mix-up.

struct WeightedAnnotation {
    Annotation annotation;
    double weight = 1.0;
};

struct LabeledImage {
    RgbImage image;
    std::vector<Annotation> labels;
};

struct MixupSample {
    RgbImage image;
    std::vector<WeightedAnnotation> labels;
    double lambda = 1.0;
    std::optional<BinaryMask> mask;
};

/// Without a mask every channel becomes round(λ·x1 + (1−λ)·x2); with a mask
/// pixels come from `a` where the mask is set and from `b` elsewhere. Labels
/// are the union of both sets weighted λ and 1−λ. The weight pair is derived
/// from the larger weight so mixup(a, b, λ) and mixup(b, a, 1−λ) agree bit
/// for bit.
MixupSample mixup(const LabeledImage& a, const LabeledImage& b, double lambda,
                  const BinaryMask* mask = nullptr);

struct MixupPair {
    std::size_t first = 0;
    std::size_t second = 0;
    double lambda = 0.5;
};

/// Beta(a, b) draw from gamma variates generated on top of uniform01.
double beta_sample(Rng& rng, double a, double b);

/// Dataset pass policy: shuffle, pair neighbours without replacement, keep a
/// pair with `probability`, and draw λ ~ Beta(alpha, alpha).
std::vector<MixupPair> plan_mixup(std::size_t count, double probability, double alpha, Rng& rng);

// ---------------------------------------------------------------------------
// Statistics.

struct StatsRow {
    int class_index = 0;
    std::string name;
    std::size_t masks = 0;
    std::size_t images = 0;
    std::size_t instances = 0;
};

struct StatsTable {
    std::vector<StatsRow> rows;  // sorted by class index
    StatsRow totals;
};

StatsTable stats_from_manifest(const batch::DatasetManifest& manifest);
StatsTable stats_from_catalog(const catalog::Catalog& cat);

/// Recounts a dataset directory: images and instances come from meta/ and
/// labels/, mask counts from manifest.json when present. A directory with
/// none of these yields an all-zero table.
StatsTable dataset_stats(const std::filesystem::path& dataset_dir);

/// Fixed-width table: Class, No of masks extracted, No of images produced,
/// Instances, and a Total row.
std::string format_stats_table(const StatsTable& table);
nlohmann::json stats_to_json(const StatsTable& table);

// ---------------------------------------------------------------------------
// Dataset directory writer.

/// Per-image audit record: job identity and every instance's parameters,
/// placement and derived box.
nlohmann::json image_meta(const batch::ImageJob& job, const compositor::AnnotatedImage& image);

std::vector<Annotation> annotations_of(const compositor::AnnotatedImage& image);

/// Writes images/, labels/, meta/, coco.json, manifest.json, manifest.txt
/// and config.json under `out_dir` and returns the manifest.
batch::DatasetManifest write_synthetic_dataset(const std::filesystem::path& out_dir,
                                               const batch::SynthesisConfig& cfg,
                                               const catalog::Catalog& cat, unsigned workers);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace sria::dataset_io
