#include "sria/dataset_io.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "sria/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace sria::dataset_io {
namespace {

template <typename T>
bool parse_number(std::string_view token, T& out) {
    const auto* end = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(token.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

std::uint8_t round_byte(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

std::vector<fs::path> sorted_files(const fs::path& dir, std::string_view extension) {
    std::vector<fs::path> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == extension) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

StatsRow& row_for(std::map<int, StatsRow>& rows, int index, const std::string& name) {
    auto [it, inserted] = rows.try_emplace(index);
    if (inserted) {
        it->second.class_index = index;
        it->second.name = name;
    }
    return it->second;
}

StatsTable finish(std::map<int, StatsRow> rows) {
    StatsTable t;
    t.totals.name = "Total";
    t.totals.class_index = -1;
    for (auto& [index, row] : rows) {
        t.totals.masks += row.masks;
        t.totals.images += row.images;
        t.totals.instances += row.instances;
        t.rows.push_back(std::move(row));
    }
    return t;
}

// Marsaglia-Tsang with Box-Muller normals; built on uniform01 so draws do not
// depend on the standard library's distributions.
double standard_normal(Rng& rng) {
    const double u1 = 1.0 - uniform01(rng);  // (0, 1]
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double gamma_sample(Rng& rng, double shape) {
    if (shape < 1.0) {
        const double u = 1.0 - uniform01(rng);
        return gamma_sample(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = standard_normal(rng);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = 1.0 - uniform01(rng);
        if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
}

}  // namespace

double beta_sample(Rng& rng, double a, double b) {
    if (!(a > 0.0 && b > 0.0)) throw InvalidArgument("Beta parameters must be positive");
    const double x = gamma_sample(rng, a);
    const double y = gamma_sample(rng, b);
    return x + y > 0.0 ? x / (x + y) : 0.5;
}

NormalizedBox normalize(const BoundingBox& box, int image_w, int image_h) {
    const double w = image_w, h = image_h;
    return {(box.x_min + box.x_max) / 2.0 / w, (box.y_min + box.y_max) / 2.0 / h, box.width() / w,
            box.height() / h};
}

BoxF denormalize(const NormalizedBox& b, int image_w, int image_h) {
    return {(b.cx - b.w / 2.0) * image_w, (b.cy - b.h / 2.0) * image_h, (b.cx + b.w / 2.0) * image_w,
            (b.cy + b.h / 2.0) * image_h};
}

BoundingBox denormalize_rounded(const NormalizedBox& b, int image_w, int image_h) {
    const BoxF f = denormalize(b, image_w, image_h);
    return {static_cast<int>(std::lround(f.x_min)), static_cast<int>(std::lround(f.y_min)),
            static_cast<int>(std::lround(f.x_max)), static_cast<int>(std::lround(f.y_max))};
}

std::string write_detector_txt(std::span<const Annotation> annotations, int image_w, int image_h) {
    std::string out;
    for (const auto& a : annotations) {
        const auto& b = a.bbox;
        if (!b.valid() || b.x_min < 0 || b.y_min < 0 || b.x_max > image_w || b.y_max > image_h) {
            throw InvalidArgument(fmt::format("box [{}, {}, {}, {}] is outside the {}x{} image", b.x_min,
                                              b.y_min, b.x_max, b.y_max, image_w, image_h));
        }
        const auto n = normalize(b, image_w, image_h);
        out += fmt::format("{} {:.6f} {:.6f} {:.6f} {:.6f}\n", a.class_index, n.cx, n.cy, n.w, n.h);
    }
    return out;
}

std::vector<DetectorLine> parse_detector_txt(std::string_view text, std::string_view source) {
    std::vector<DetectorLine> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++line_no;
        const auto fields = split_ws(line);
        if (fields.empty()) continue;
        auto fail = [&](std::string_view why) {
            return DataError(fmt::format("{}:{}: {}", source, line_no, why));
        };
        if (fields.size() != 5 && fields.size() != 6) throw fail("expected 5 or 6 fields");
        DetectorLine d;
        if (!parse_number(fields[0], d.class_index) || d.class_index < 0) throw fail("bad class index");
        double v[4];
        for (int i = 0; i < 4; ++i) {
            if (!parse_number(fields[1 + i], v[i]) || !std::isfinite(v[i])) throw fail("bad coordinate");
        }
        d.box = {v[0], v[1], v[2], v[3]};
        if (d.box.w < 0 || d.box.h < 0) throw fail("negative box size");
        if (fields.size() == 6) {
            double c;
            if (!parse_number(fields[5], c) || !(c >= 0.0 && c <= 1.0)) throw fail("bad confidence");
            d.confidence = c;
        }
        out.push_back(d);
    }
    return out;
}

json write_coco_manifest(std::span<const CocoImage> images, std::span<const ClassId> categories) {
    json images_json = json::array();
    json annotations_json = json::array();
    json categories_json = json::array();
    std::int64_t ann_id = 1;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto& img = images[i];
        const auto image_id = static_cast<std::int64_t>(i + 1);
        images_json.push_back(
            {{"id", image_id}, {"file_name", img.file_name}, {"width", img.width}, {"height", img.height}});
        for (const auto& a : img.annotations) {
            const auto& b = a.bbox;
            annotations_json.push_back({{"id", ann_id++},
                                        {"image_id", image_id},
                                        {"category_id", a.class_index},
                                        {"bbox", {b.x_min, b.y_min, b.width(), b.height()}},
                                        {"area", b.width() * b.height()},
                                        {"iscrowd", 0}});
        }
    }
    std::vector<ClassId> cats(categories.begin(), categories.end());
    std::sort(cats.begin(), cats.end(), [](const ClassId& a, const ClassId& b) { return a.index < b.index; });
    for (const auto& c : cats) categories_json.push_back({{"id", c.index}, {"name", c.name}});
    return {{"images", images_json}, {"annotations", annotations_json}, {"categories", categories_json}};
}

std::vector<CocoImage> read_coco_manifest(const json& doc) {
    try {
        std::vector<CocoImage> images;
        std::map<std::int64_t, std::size_t> by_id;
        for (const auto& im : doc.at("images")) {
            by_id[im.at("id").get<std::int64_t>()] = images.size();
            images.push_back({im.at("file_name").get<std::string>(), im.at("width").get<int>(),
                              im.at("height").get<int>(), {}});
        }
        for (const auto& a : doc.at("annotations")) {
            const auto it = by_id.find(a.at("image_id").get<std::int64_t>());
            if (it == by_id.end()) throw DataError("annotation refers to an unknown image id");
            const auto& box = a.at("bbox");
            const int x = box.at(0).get<int>(), y = box.at(1).get<int>();
            images[it->second].annotations.push_back(
                {a.at("category_id").get<int>(), {x, y, x + box.at(2).get<int>(), y + box.at(3).get<int>()}});
        }
        return images;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed COCO manifest: ") + e.what());
    }
}

std::string dump_json(const json& doc) { return doc.dump(2) + "\n"; }

MixupSample mixup(const LabeledImage& a, const LabeledImage& b, double lambda, const BinaryMask* mask) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("mix-up lambda must lie in [0, 1]");
    if (!a.image.same_shape(b.image)) throw InvalidArgument("mix-up images differ in size");
    if (mask && !mask->same_shape(a.image)) throw InvalidArgument("mix-up mask differs in size");

    double wa, wb;
    if (lambda >= 0.5) {
        wa = lambda;
        wb = 1.0 - lambda;  // exact for lambda >= 0.5
    } else {
        wb = 1.0 - lambda;
        wa = 1.0 - wb;
    }

    MixupSample out;
    out.lambda = lambda;
    out.image = RgbImage(a.image.width(), a.image.height());
    auto pa = a.image.pixels();
    auto pb = b.image.pixels();
    auto dst = out.image.pixels();
    if (mask) {
        out.mask = *mask;
        auto pm = mask->pixels();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = pm[i] ? pa[i] : pb[i];
    } else {
        for (std::size_t i = 0; i < dst.size(); ++i) {
            for (int c = 0; c < 3; ++c) dst[i][c] = round_byte(wa * pa[i][c] + wb * pb[i][c]);
        }
    }
    for (const auto& l : a.labels) out.labels.push_back({l, wa});
    for (const auto& l : b.labels) out.labels.push_back({l, wb});
    return out;
}

std::vector<MixupPair> plan_mixup(std::size_t count, double probability, double alpha, Rng& rng) {
    if (!(probability >= 0.0 && probability <= 1.0)) throw InvalidArgument("mix-up probability must lie in [0, 1]");
    if (!(alpha > 0.0)) throw InvalidArgument("Beta parameter must be positive");
    std::vector<std::size_t> order(count);
    for (std::size_t i = 0; i < count; ++i) order[i] = i;
    for (std::size_t i = count; i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i) - 1));
        std::swap(order[i - 1], order[j]);
    }
    std::vector<MixupPair> pairs;
    for (std::size_t i = 0; i + 1 < count; i += 2) {
        if (!bernoulli(rng, probability)) continue;
        pairs.push_back({order[i], order[i + 1], beta_sample(rng, alpha, alpha)});
    }
    return pairs;
}

StatsTable stats_from_manifest(const batch::DatasetManifest& manifest) {
    std::map<int, StatsRow> rows;
    for (const auto& c : manifest.classes) {
        auto& r = row_for(rows, c.id.index, c.id.name);
        r.masks = c.masks_used;
        r.images = c.images_produced;
        r.instances = c.instances;
    }
    return finish(std::move(rows));
}

StatsTable stats_from_catalog(const catalog::Catalog& cat) {
    std::map<int, StatsRow> rows;
    for (const auto& c : cat.classes) row_for(rows, c.id.index, c.id.name).masks = c.cutouts.size();
    return finish(std::move(rows));
}

StatsTable dataset_stats(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw DataError("dataset directory '" + dir.string() + "' does not exist");
    std::map<int, StatsRow> rows;
    const fs::path manifest_path = dir / "manifest.json";
    if (fs::exists(manifest_path)) {
        json doc;
        try {
            doc = json::parse(read_text_file(manifest_path));
        } catch (const json::exception& e) {
            throw DataError("cannot parse '" + manifest_path.string() + "': " + e.what());
        }
        const auto manifest = batch::DatasetManifest::from_json(doc);
        for (const auto& c : manifest.classes) row_for(rows, c.id.index, c.id.name).masks = c.masks_used;
    }
    for (const auto& meta_path : sorted_files(dir / "meta", ".json")) {
        int index = 0;
        std::string name;
        try {
            const auto meta = json::parse(read_text_file(meta_path));
            index = meta.at("class").at("index").get<int>();
            name = meta.at("class").at("name").get<std::string>();
        } catch (const json::exception& e) {
            throw DataError("corrupt meta file '" + meta_path.string() + "': " + e.what());
        }
        const fs::path label = dir / "labels" / (meta_path.stem().string() + ".txt");
        if (!fs::exists(label)) throw DataError("missing label file '" + label.string() + "'");
        const auto lines = parse_detector_txt(read_text_file(label), label.string());
        auto& r = row_for(rows, index, name);
        r.images += 1;
        r.instances += lines.size();
    }
    return finish(std::move(rows));
}

std::string format_stats_table(const StatsTable& table) {
    std::size_t name_w = 5;
    for (const auto& r : table.rows) name_w = std::max(name_w, r.name.size());
    constexpr std::string_view kMasks = "No of masks extracted";
    constexpr std::string_view kImages = "No of images produced";
    constexpr std::string_view kInstances = "Instances";
    std::string out = fmt::format("{:<{}}  {:>{}}  {:>{}}  {:>{}}\n", "Class", name_w, kMasks, kMasks.size(),
                                  kImages, kImages.size(), kInstances, kInstances.size());
    auto line = [&](const StatsRow& r) {
        out += fmt::format("{:<{}}  {:>{}}  {:>{}}  {:>{}}\n", r.name, name_w, r.masks, kMasks.size(), r.images,
                           kImages.size(), r.instances, kInstances.size());
    };
    const std::string rule(name_w + kMasks.size() + kImages.size() + kInstances.size() + 6, '-');
    out += rule + "\n";
    for (const auto& r : table.rows) line(r);
    out += rule + "\n";
    line(table.totals);
    return out;
}

json stats_to_json(const StatsTable& table) {
    json rows = json::array();
    for (const auto& r : table.rows) {
        rows.push_back({{"index", r.class_index},
                        {"name", r.name},
                        {"masks", r.masks},
                        {"images", r.images},
                        {"instances", r.instances}});
    }
    return {{"classes", rows},
            {"totals",
             {{"masks", table.totals.masks}, {"images", table.totals.images}, {"instances", table.totals.instances}}}};
}

json image_meta(const batch::ImageJob& job, const compositor::AnnotatedImage& image) {
    json instances = json::array();
    for (const auto& inst : image.instances) {
        const auto& b = inst.bbox;
        instances.push_back({{"source", inst.source_id},
                             {"params",
                              {{"rotation_deg", inst.params.rotation_deg},
                               {"scale", inst.params.scale},
                               {"perspective_tilt", inst.params.perspective_tilt},
                               {"flip_h", inst.params.flip_h}}},
                             {"offset", {inst.offset.x, inst.offset.y}},
                             {"size", {inst.transformed.width(), inst.transformed.height()}},
                             {"alpha_pixels", inst.alpha_pixels},
                             {"in_frame_pixels", inst.in_frame_pixels},
                             {"visible_fraction", inst.visible_fraction},
                             {"occluded_fraction", inst.occluded_fraction},
                             {"bbox", {b.x_min, b.y_min, b.x_max, b.y_max}}});
    }
    return {{"stem", job.stem()},
            {"class", {{"index", job.class_id.index}, {"name", job.class_id.name}}},
            {"batch", "B" + std::to_string(job.batch)},
            {"seed", job.seed},
            {"background", image.background_id},
            {"canvas", {image.canvas.width(), image.canvas.height()}},
            {"instances", instances}};
}

std::vector<Annotation> annotations_of(const compositor::AnnotatedImage& image) {
    std::vector<Annotation> out;
    out.reserve(image.instances.size());
    for (const auto& inst : image.instances) out.push_back({inst.class_id.index, inst.bbox});
    return out;
}

batch::DatasetManifest write_synthetic_dataset(const fs::path& out_dir, const batch::SynthesisConfig& cfg,
                                               const catalog::Catalog& cat, unsigned workers) {
    if (fs::exists(out_dir) && !fs::is_empty(out_dir)) {
        throw DataError("output directory '" + out_dir.string() + "' is not empty");
    }
    for (const char* sub : {"images", "labels", "meta"}) fs::create_directories(out_dir / sub);

    const auto plan_size = batch::plan_dataset(cfg, cat).jobs.size();
    std::vector<CocoImage> summaries(plan_size);

    auto manifest = batch::run_all(cfg, cat, workers,
                                   [&](std::size_t i, const batch::ImageJob& job, compositor::AnnotatedImage&& image) {
                                       const std::string stem = job.stem();
                                       const auto anns = annotations_of(image);
                                       png::write(out_dir / "images" / (stem + ".png"), image.canvas);
                                       write_text_file(out_dir / "labels" / (stem + ".txt"),
                                                       write_detector_txt(anns, image.canvas.width(),
                                                                          image.canvas.height()));
                                       write_text_file(out_dir / "meta" / (stem + ".json"),
                                                       dump_json(image_meta(job, image)));
                                       summaries[i] = {"images/" + stem + ".png", image.canvas.width(),
                                                       image.canvas.height(), anns};
                                   });

    std::vector<ClassId> categories;
    for (const auto& c : manifest.classes) categories.push_back(c.id);
    write_text_file(out_dir / "coco.json", dump_json(write_coco_manifest(summaries, categories)));
    write_text_file(out_dir / "manifest.json", dump_json(manifest.to_json()));
    write_text_file(out_dir / "manifest.txt", format_stats_table(stats_from_manifest(manifest)));
    write_text_file(out_dir / "config.json", dump_json(json(cfg)));
    spdlog::info("wrote {} images to '{}'", manifest.total_images, out_dir.string());
    return manifest;
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const fs::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw DataError("failed writing '" + path.string() + "'");
}

}  // namespace sria::dataset_io
