#include "sria/batch_scheduler.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>

#include <fmt/format.h>

#include "sria/parallel.hpp"
#include "sria/rng.hpp"

namespace sria::batch {
namespace {

using nlohmann::json;

constexpr std::uint64_t kCountStream = 0xC0C0;
constexpr int kParamRedraws = 20;
constexpr int kImageAttempts = 10;

std::uint64_t batch_seed_for(std::uint64_t master, int class_index, int batch) {
    return derive_seed(master, {static_cast<std::uint64_t>(class_index), static_cast<std::uint64_t>(batch)});
}

bool scale_keeps_pixels(const Cutout& c, double s) {
    return std::lround(s * c.width()) >= 1 && std::lround(s * c.height()) >= 1;
}

void check_known_keys(const json& j, std::initializer_list<const char*> keys, const char* where) {
    const std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& [k, v] : j.items()) {
        if (!known.count(k)) throw InvalidArgument(fmt::format("unknown key '{}' in {}", k, where));
    }
}

compositor::AnnotatedImage generate_once(const BatchRecipe& recipe, std::span<const Cutout> cutouts,
                                         std::span<const Background> backgrounds,
                                         const SynthesisConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    const int instances = recipe.use_instances
                              ? static_cast<int>(uniform_int(rng, cfg.instances_min, cfg.instances_max))
                              : 1;
    const auto& bg = backgrounds[static_cast<std::size_t>(
        uniform_int(rng, 0, static_cast<std::int64_t>(backgrounds.size()) - 1))];

    std::vector<compositor::Pick> picks;
    picks.reserve(static_cast<std::size_t>(instances));
    for (int i = 0; i < instances; ++i) {
        const auto& cutout =
            cutouts[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(cutouts.size()) - 1))];
        transforms::AugmentParams p;
        // Every draw happens regardless of the recipe so that streams line up
        // across recipes; disabled augmentations simply discard theirs.
        const double rotation = uniform_real(rng, cfg.ranges.rotation_min_deg, cfg.ranges.rotation_max_deg);
        const double tilt = uniform_real(rng, 0.0, cfg.ranges.tilt_max);
        double scale = uniform_real(rng, cfg.ranges.scale_min, cfg.ranges.scale_max);
        const bool flip = bernoulli(rng, cfg.ranges.flip_probability);
        if (recipe.use_scale) {
            for (int redraw = 0; !scale_keeps_pixels(cutout, scale); ++redraw) {
                if (redraw == kParamRedraws) {
                    throw DataError("cutout '" + cutout.source_id + "' is too small to scale");
                }
                scale = uniform_real(rng, cfg.ranges.scale_min, cfg.ranges.scale_max);
            }
        }
        p.rotation_deg = recipe.use_rotation ? rotation : 0.0;
        p.perspective_tilt = recipe.use_rotation ? tilt : 0.0;
        p.scale = recipe.use_scale ? scale : 1.0;
        p.flip_h = flip;
        picks.push_back({cutout, p, std::nullopt});
    }

    compositor::Constraints constraints{recipe.use_truncation ? cfg.constraints.truncation_floor : 1.0,
                                        recipe.use_occlusion ? cfg.constraints.occlusion_cap : 0.0};
    compositor::SynthesisOptions options{cfg.placement_retries, cfg.canvas_size};
    auto image = compositor::synthesize_image(bg, picks, constraints, rng, options);
    image.seed = seed;
    return image;
}

}  // namespace

const std::array<BatchRecipe, kBatchCount>& standard_recipes() {
    //                                            R      S      O      T      I
    static const std::array<BatchRecipe, kBatchCount> recipes{{{1, false, false, true, true, false},
                                                               {2, true, true, true, true, false},
                                                               {3, false, false, false, true, true},
                                                               {4, true, true, false, true, true},
                                                               {5, true, false, true, true, false},
                                                               {6, false, true, true, true, false}}};
    return recipes;
}

void SynthesisConfig::validate() const {
    if (per_batch_cap < 1) throw InvalidArgument("per_batch_cap must be positive");
    ranges.validate();
    constraints.validate();
    if (instances_min < 1 || instances_max > 6 || instances_min > instances_max) {
        throw InvalidArgument("instance_range must satisfy 1 <= min <= max <= 6");
    }
    if (placement_retries < 0) throw InvalidArgument("placement_retries must be non-negative");
    if (canvas_size && (canvas_size->first < 1 || canvas_size->second < 1)) {
        throw InvalidArgument("canvas must be at least 1x1");
    }
}

void to_json(json& j, const SynthesisConfig& cfg) {
    j = json{
        {"classes", cfg.classes},
        {"per_batch_cap", cfg.per_batch_cap},
        {"count_mode", cfg.count_mode == CountMode::uniform ? "uniform" : "fixed"},
        {"ranges",
         {{"rotation_deg", {cfg.ranges.rotation_min_deg, cfg.ranges.rotation_max_deg}},
          {"scale", {cfg.ranges.scale_min, cfg.ranges.scale_max}},
          {"perspective_tilt_max", cfg.ranges.tilt_max},
          {"flip_probability", cfg.ranges.flip_probability}}},
        {"constraints",
         {{"truncation", cfg.constraints.truncation_floor}, {"occlusion", cfg.constraints.occlusion_cap}}},
        {"instance_range", {cfg.instances_min, cfg.instances_max}},
        {"master_seed", cfg.master_seed},
        {"placement_retries", cfg.placement_retries},
        {"canvas", cfg.canvas_size ? json{cfg.canvas_size->first, cfg.canvas_size->second} : json(nullptr)},
    };
}

void from_json(const json& j, SynthesisConfig& cfg) {
    try {
        check_known_keys(j,
                         {"classes", "per_batch_cap", "count_mode", "ranges", "constraints", "instance_range",
                          "master_seed", "placement_retries", "canvas"},
                         "synthesis config");
        if (j.contains("classes")) cfg.classes = j.at("classes").get<std::vector<std::string>>();
        if (j.contains("per_batch_cap")) cfg.per_batch_cap = j.at("per_batch_cap").get<int>();
        if (j.contains("count_mode")) {
            const auto mode = j.at("count_mode").get<std::string>();
            if (mode == "uniform") cfg.count_mode = CountMode::uniform;
            else if (mode == "fixed") cfg.count_mode = CountMode::fixed;
            else throw InvalidArgument("count_mode must be 'uniform' or 'fixed'");
        }
        if (j.contains("ranges")) {
            const auto& r = j.at("ranges");
            check_known_keys(r, {"rotation_deg", "scale", "perspective_tilt_max", "flip_probability"}, "ranges");
            if (r.contains("rotation_deg")) {
                cfg.ranges.rotation_min_deg = r.at("rotation_deg").at(0).get<double>();
                cfg.ranges.rotation_max_deg = r.at("rotation_deg").at(1).get<double>();
            }
            if (r.contains("scale")) {
                cfg.ranges.scale_min = r.at("scale").at(0).get<double>();
                cfg.ranges.scale_max = r.at("scale").at(1).get<double>();
            }
            if (r.contains("perspective_tilt_max")) cfg.ranges.tilt_max = r.at("perspective_tilt_max").get<double>();
            if (r.contains("flip_probability")) cfg.ranges.flip_probability = r.at("flip_probability").get<double>();
        }
        if (j.contains("constraints")) {
            const auto& c = j.at("constraints");
            check_known_keys(c, {"truncation", "occlusion"}, "constraints");
            if (c.contains("truncation")) cfg.constraints.truncation_floor = c.at("truncation").get<double>();
            if (c.contains("occlusion")) cfg.constraints.occlusion_cap = c.at("occlusion").get<double>();
        }
        if (j.contains("instance_range")) {
            cfg.instances_min = j.at("instance_range").at(0).get<int>();
            cfg.instances_max = j.at("instance_range").at(1).get<int>();
        }
        if (j.contains("master_seed")) cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
        if (j.contains("placement_retries")) cfg.placement_retries = j.at("placement_retries").get<int>();
        if (j.contains("canvas")) {
            const auto& c = j.at("canvas");
            if (c.is_null()) cfg.canvas_size.reset();
            else cfg.canvas_size = std::pair{c.at(0).get<int>(), c.at(1).get<int>()};
        }
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("malformed synthesis config: ") + e.what());
    }
}

std::uint64_t config_hash(const SynthesisConfig& cfg) {
    const std::string text = json(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

SynthesisConfig fod_preset() {
    SynthesisConfig cfg;
    cfg.canvas_size = std::pair{300, 300};
    return cfg;
}

std::string ImageJob::stem() const { return fmt::format("{:02d}_B{}_{:03d}", class_id.index, batch, index); }

compositor::AnnotatedImage generate_image(const BatchRecipe& recipe, std::span<const Cutout> cutouts,
                                          std::span<const Background> backgrounds,
                                          const SynthesisConfig& cfg, std::uint64_t seed) {
    if (cutouts.empty()) throw DataError("cannot synthesize a class without cutouts");
    if (backgrounds.empty()) throw DataError("cannot synthesize without backgrounds");
    // A draw whose every pick fails placement is redrawn from a child seed.
    for (int attempt = 0;; ++attempt) {
        const std::uint64_t s = attempt == 0 ? seed : derive_seed(seed, {static_cast<std::uint64_t>(attempt)});
        try {
            auto image = generate_once(recipe, cutouts, backgrounds, cfg, s);
            image.seed = seed;
            return image;
        } catch (const DataError&) {
            if (attempt + 1 == kImageAttempts) throw;
        }
    }
}

std::vector<compositor::AnnotatedImage> run_batch(const BatchRecipe& recipe, std::span<const Cutout> cutouts,
                                                  std::span<const Background> backgrounds, int count,
                                                  const SynthesisConfig& cfg, std::uint64_t batch_seed) {
    cfg.validate();
    if (count < 0 || count > cfg.per_batch_cap) {
        throw InvalidArgument(fmt::format("batch size {} outside [0, {}]", count, cfg.per_batch_cap));
    }
    if (cutouts.empty()) throw DataError("class has no cutouts");
    std::vector<compositor::AnnotatedImage> images;
    images.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        images.push_back(generate_image(recipe, cutouts, backgrounds, cfg,
                                        derive_seed(batch_seed, {static_cast<std::uint64_t>(i)})));
    }
    return images;
}

json DatasetManifest::to_json() const {
    json classes_json = json::array();
    for (const auto& c : classes) {
        json batches;
        for (int b = 0; b < kBatchCount; ++b) batches["B" + std::to_string(b + 1)] = c.per_batch[b];
        classes_json.push_back({{"index", c.id.index},
                                {"name", c.id.name},
                                {"masks_used", c.masks_used},
                                {"images_produced", c.images_produced},
                                {"instances", c.instances},
                                {"batches", batches}});
    }
    return {{"classes", classes_json},
            {"totals",
             {{"masks_used", total_masks}, {"images_produced", total_images}, {"instances", total_instances}}},
            {"seed", seed},
            {"config_hash", fmt::format("{:016x}", config_hash)}};
}

DatasetManifest DatasetManifest::from_json(const json& j) {
    try {
        DatasetManifest m;
        for (const auto& c : j.at("classes")) {
            ClassStats s;
            s.id = {c.at("index").get<int>(), c.at("name").get<std::string>()};
            s.masks_used = c.at("masks_used").get<std::size_t>();
            s.images_produced = c.at("images_produced").get<std::size_t>();
            s.instances = c.at("instances").get<std::size_t>();
            for (int b = 0; b < kBatchCount; ++b) {
                s.per_batch[b] = c.at("batches").at("B" + std::to_string(b + 1)).get<std::size_t>();
            }
            m.classes.push_back(std::move(s));
        }
        const auto& t = j.at("totals");
        m.total_masks = t.at("masks_used").get<std::size_t>();
        m.total_images = t.at("images_produced").get<std::size_t>();
        m.total_instances = t.at("instances").get<std::size_t>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
        return m;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed manifest: ") + e.what());
    }
}

Plan plan_dataset(const SynthesisConfig& cfg, const catalog::Catalog& cat) {
    cfg.validate();
    std::vector<std::size_t> slots;
    if (cfg.classes.empty()) {
        for (std::size_t i = 0; i < cat.classes.size(); ++i) slots.push_back(i);
    } else {
        for (const auto& name : cfg.classes) {
            const auto it = std::find_if(cat.classes.begin(), cat.classes.end(),
                                         [&](const auto& c) { return c.id.name == name; });
            if (it == cat.classes.end()) throw InvalidArgument("class '" + name + "' is not in the catalog");
            slots.push_back(static_cast<std::size_t>(it - cat.classes.begin()));
        }
        std::sort(slots.begin(), slots.end());
        slots.erase(std::unique(slots.begin(), slots.end()), slots.end());
    }
    if (slots.empty()) throw DataError("catalog has no object classes");
    if (cat.backgrounds.empty()) throw DataError("catalog has no backgrounds");

    Plan plan;
    plan.manifest.seed = cfg.master_seed;
    plan.manifest.config_hash = config_hash(cfg);
    for (const auto slot : slots) {
        const auto& entry = cat.classes[slot];
        ClassStats stats;
        stats.id = entry.id;
        stats.masks_used = entry.cutouts.size();
        plan.manifest.total_masks += stats.masks_used;
        if (entry.cutouts.empty()) {
            spdlog::warn("class '{}' has no cutouts; skipped", entry.id.name);
            plan.manifest.classes.push_back(stats);
            continue;
        }
        for (const auto& recipe : standard_recipes()) {
            int count = cfg.per_batch_cap;
            if (cfg.count_mode == CountMode::uniform) {
                Rng rng(derive_seed(cfg.master_seed, {static_cast<std::uint64_t>(entry.id.index),
                                                      static_cast<std::uint64_t>(recipe.id), kCountStream}));
                count = static_cast<int>(uniform_int(rng, 1, cfg.per_batch_cap));
            }
            const auto bseed = batch_seed_for(cfg.master_seed, entry.id.index, recipe.id);
            for (int i = 0; i < count; ++i) {
                plan.jobs.push_back({entry.id, slot, recipe.id, i,
                                     derive_seed(bseed, {static_cast<std::uint64_t>(i)})});
            }
            stats.per_batch[static_cast<std::size_t>(recipe.id - 1)] = static_cast<std::size_t>(count);
            stats.images_produced += static_cast<std::size_t>(count);
        }
        plan.manifest.total_images += stats.images_produced;
        plan.manifest.classes.push_back(stats);
    }
    return plan;
}

DatasetManifest run_all(const SynthesisConfig& cfg, const catalog::Catalog& cat, unsigned workers,
                        const ImageSink& sink) {
    Plan plan = plan_dataset(cfg, cat);
    const auto& recipes = standard_recipes();
    std::vector<std::size_t> instance_counts(plan.jobs.size(), 0);

    parallel_for(plan.jobs.size(), workers, [&](std::size_t i) {
        const auto& job = plan.jobs[i];
        const auto& entry = cat.classes[job.class_slot];
        auto image = generate_image(recipes[static_cast<std::size_t>(job.batch - 1)], entry.cutouts,
                                    cat.backgrounds, cfg, job.seed);
        instance_counts[i] = image.instances.size();
        sink(i, job, std::move(image));
    });

    // Manifest reduction is serial and in job order.
    for (std::size_t i = 0; i < plan.jobs.size(); ++i) {
        const auto& job = plan.jobs[i];
        auto it = std::find_if(plan.manifest.classes.begin(), plan.manifest.classes.end(),
                               [&](const ClassStats& s) { return s.id.index == job.class_id.index; });
        it->instances += instance_counts[i];
        plan.manifest.total_instances += instance_counts[i];
    }
    return plan.manifest;
}

std::pair<std::vector<GeneratedImage>, DatasetManifest> run_all(const SynthesisConfig& cfg,
                                                                const catalog::Catalog& cat,
                                                                unsigned workers) {
    std::vector<std::optional<GeneratedImage>> slots;
    const Plan plan = plan_dataset(cfg, cat);
    slots.resize(plan.jobs.size());
    auto manifest = run_all(cfg, cat, workers, [&](std::size_t i, const ImageJob& job, compositor::AnnotatedImage&& img) {
        slots[i] = GeneratedImage{job, std::move(img)};
    });
    std::vector<GeneratedImage> images;
    images.reserve(slots.size());
    for (auto& s : slots) images.push_back(std::move(*s));
    return {std::move(images), std::move(manifest)};
}

}  // namespace sria::batch
