#include "sria/cutout_catalog.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <map>

#include "sria/parallel.hpp"
#include "sria/png_io.hpp"

namespace fs = std::filesystem;

namespace sria {
namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories) {
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (directories ? entry.is_directory()
                        : (entry.is_regular_file() && entry.path().extension() == ".png")) {
            out.push_back(entry.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

// One object source on disk, loaded independently of the others.
struct ObjectJob {
    std::size_t class_slot;
    fs::path image;
    fs::path mask;  // empty for pre-cut RGBA
};

}  // namespace

const std::array<std::string_view, kMaxClasses>& fod_class_names() {
    static constexpr std::array<std::string_view, kMaxClasses> names{
        "Battery",      "Bolt washer",   "Bolt",         "Clamp part",       "Fuel cap",
        "Metal part",   "Nut",           "Plastic part", "Rock",             "Washer",
        "Wire",         "Wrench",        "Cutter",       "Label",            "Luggage tag",
        "Nail",         "Pliers",        "Metal sheet",  "Hose",             "Adjustable clamp",
        "Adjustable wrench", "Bolt nut", "Hammer",       "Luggage part",     "Paint chip",
        "Pen",          "Screw",         "Screw driver", "Soda can",         "Wood",
        "Tape"};
    return names;
}

bool is_tight(const RgbaImage& rgba) {
    if (rgba.empty()) return false;
    const auto b = alpha_bounds(rgba);
    return b && b->x_min == 0 && b->y_min == 0 && b->x_max == rgba.width() &&
           b->y_max == rgba.height();
}

Cutout extract_cutout(const RgbImage& img, const BinaryMask& mask, ClassId cls, std::string source_id) {
    if (!img.same_shape(mask)) {
        throw InvalidArgument("extract_cutout: image and mask dimensions differ");
    }
    const auto box = tight_bounds(mask);
    if (!box) {
        throw InvalidArgument("extract_cutout: mask has no foreground pixel");
    }
    RgbaImage rgba(box->width(), box->height());
    for (int y = 0; y < box->height(); ++y) {
        for (int x = 0; x < box->width(); ++x) {
            const auto& c = img.at(box->x_min + x, box->y_min + y);
            const bool on = mask.at(box->x_min + x, box->y_min + y) != 0;
            rgba.at(x, y) = {c[0], c[1], c[2], static_cast<std::uint8_t>(on ? 255 : 0)};
        }
    }
    return Cutout{std::move(cls), std::move(rgba), std::move(source_id)};
}

Cutout cutout_from_rgba(const RgbaImage& rgba, ClassId cls, std::string source_id) {
    RgbaImage hard = rgba;
    for (auto& p : hard.pixels()) p[3] = p[3] >= 128 ? 255 : 0;
    const auto box = alpha_bounds(hard);
    if (!box) {
        throw InvalidArgument("cutout_from_rgba: no opaque pixel");
    }
    return Cutout{std::move(cls), crop(hard, *box), std::move(source_id)};
}

namespace catalog {

std::size_t Catalog::cutout_count() const {
    std::size_t n = 0;
    for (const auto& c : classes) n += c.cutouts.size();
    return n;
}

const ClassEntry* Catalog::find(std::string_view name) const {
    for (const auto& c : classes) {
        if (c.id.name == name) return &c;
    }
    return nullptr;
}

Catalog load_catalog(const fs::path& root, const LoadOptions& options) {
    if (!fs::is_directory(root)) {
        throw DataError("catalog root '" + root.string() + "' is not a directory");
    }
    Catalog cat;
    auto warn = [&cat](std::string msg) {
        spdlog::warn("{}", msg);
        cat.warnings.push_back(std::move(msg));
    };

    const fs::path objects = root / "objects";
    std::vector<ObjectJob> jobs;
    if (fs::is_directory(objects)) {
        auto dirs = sorted_entries(objects, true);
        if (dirs.size() > static_cast<std::size_t>(kMaxClasses) && !options.vocabulary) {
            throw DataError("'" + objects.string() + "' holds more than 31 classes");
        }
        for (const auto& dir : dirs) {
            const std::string name = dir.filename().string();
            int index = static_cast<int>(cat.classes.size());
            if (options.vocabulary) {
                const auto& vocab = *options.vocabulary;
                const auto it = std::find(vocab.begin(), vocab.end(), name);
                if (it == vocab.end()) {
                    throw DataError("class directory '" + dir.string() + "' is not in the vocabulary");
                }
                index = static_cast<int>(it - vocab.begin());
                if (index >= kMaxClasses) {
                    throw DataError("vocabulary position of '" + name + "' exceeds the 31-class limit");
                }
            }
            const std::size_t slot = cat.classes.size();
            cat.classes.push_back({ClassId{index, name}, {}});

            for (const auto& file : sorted_entries(dir, false)) {
                const std::string fname = file.filename().string();
                if (ends_with(fname, "_mask.png")) continue;
                if (ends_with(fname, "_rgba.png")) {
                    jobs.push_back({slot, file, {}});
                    continue;
                }
                fs::path mask = file;
                mask.replace_filename(file.stem().string() + "_mask.png");
                if (!fs::exists(mask)) {
                    warn("image '" + file.string() + "' has no mask; skipped");
                    continue;
                }
                jobs.push_back({slot, file, mask});
            }
        }
    } else {
        warn("no objects directory under '" + root.string() + "'");
    }

    // Load every object independently, then file them in job order.
    std::vector<std::optional<Cutout>> loaded(jobs.size());
    parallel_for(jobs.size(), options.workers, [&](std::size_t i) {
        const auto& job = jobs[i];
        const ClassId& id = cat.classes[job.class_slot].id;
        const std::string source = id.name + "/" + job.image.stem().string();
        if (job.mask.empty()) {
            try {
                loaded[i] = cutout_from_rgba(png::read_rgba(job.image), id, source);
            } catch (const InvalidArgument&) {
                throw DataError("pre-cut object '" + job.image.string() + "' is fully transparent");
            }
            return;
        }
        const auto img = png::read_rgb(job.image);
        const auto mask = png::read_mask(job.mask);
        if (!img.same_shape(mask)) {
            throw DataError("size mismatch between '" + job.image.string() + "' and '" +
                            job.mask.string() + "'");
        }
        if (!tight_bounds(mask)) {
            throw DataError("mask '" + job.mask.string() + "' has no foreground pixel");
        }
        loaded[i] = extract_cutout(img, mask, id, source);
    });
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        cat.classes[jobs[i].class_slot].cutouts.push_back(std::move(*loaded[i]));
    }
    for (const auto& c : cat.classes) {
        if (c.cutouts.empty()) warn("class '" + c.id.name + "' has no cutouts");
    }
    std::sort(cat.classes.begin(), cat.classes.end(),
              [](const ClassEntry& a, const ClassEntry& b) { return a.id.index < b.id.index; });

    const fs::path backgrounds = root / "backgrounds";
    if (fs::is_directory(backgrounds)) {
        std::map<std::string, std::vector<std::string>> tags;
        const fs::path tag_file = backgrounds / "tags.json";
        if (fs::exists(tag_file)) {
            std::ifstream in(tag_file);
            try {
                tags = nlohmann::json::parse(in).get<std::map<std::string, std::vector<std::string>>>();
            } catch (const nlohmann::json::exception& e) {
                throw DataError("cannot parse '" + tag_file.string() + "': " + e.what());
            }
        }
        const auto files = sorted_entries(backgrounds, false);
        cat.backgrounds.resize(files.size());
        parallel_for(files.size(), options.workers, [&](std::size_t i) {
            const std::string fname = files[i].filename().string();
            const auto it = tags.find(fname);
            cat.backgrounds[i] = Background{files[i].stem().string(), png::read_rgb(files[i]),
                                            it == tags.end() ? std::vector<std::string>{} : it->second};
        });
    } else {
        warn("no backgrounds directory under '" + root.string() + "'");
    }

    if (cat.classes.empty() && cat.backgrounds.empty()) {
        warn("catalog '" + root.string() + "' is empty");
    }
    return cat;
}

}  // namespace catalog
}  // namespace sria
