// Command-line front end: segment, dice, extract, synth, stats, mixup, eval.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include "sria/batch_scheduler.hpp"
#include "sria/cutout_catalog.hpp"
#include "sria/dataset_io.hpp"
#include "sria/errors.hpp"
#include "sria/evaluator.hpp"
#include "sria/mask_lab.hpp"
#include "sria/parallel.hpp"
#include "sria/png_io.hpp"
#include "sria/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct Globals {
    std::uint64_t seed = 0;
    unsigned workers = sria::default_worker_count();
    std::string config;
};

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("sria");
    logger->set_pattern("%^%l%$: %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("SRIA_LOG")) {
        const auto level = spdlog::level::from_str(env);
        if (level == spdlog::level::off && std::string_view(env) != "off") {
            spdlog::warn("unknown SRIA_LOG level '{}'", env);
        } else {
            spdlog::set_level(level);
        }
    }
}

void write_out(const std::string& path, std::string_view text) {
    if (path.empty() || path == "-") {
        std::cout << text;
    } else {
        sria::dataset_io::write_text_file(path, text);
    }
}

// Removes a previous dataset's outputs; anything unrecognized stays and
// makes the writer refuse the directory.
void clear_dataset(const fs::path& dir) {
    for (const char* name : {"images", "labels", "meta", "coco.json", "manifest.json", "manifest.txt",
                             "config.json"}) {
        fs::remove_all(dir / name);
    }
}

std::vector<sria::dataset_io::Annotation> read_labels(const fs::path& path, int w, int h) {
    std::vector<sria::dataset_io::Annotation> out;
    for (const auto& line :
         sria::dataset_io::parse_detector_txt(sria::dataset_io::read_text_file(path), path.string())) {
        out.push_back({line.class_index, sria::dataset_io::denormalize_rounded(line.box, w, h)});
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();

    CLI::App app{"Synthetic cut-paste dataset generator and detection evaluation toolkit", "sria"};
    app.require_subcommand(1);
    Globals g;
    bool seed_given = false;
    app.add_option_function<std::uint64_t>(
           "--seed", [&](std::uint64_t s) { g.seed = s, seed_given = true; }, "Master seed (default 0)")
        ->type_name("UINT");
    app.add_option("--workers", g.workers, "Worker threads (default: logical CPUs)")
        ->check(CLI::PositiveNumber);
    app.add_option("--config", g.config, "Synthesis config JSON")->check(CLI::ExistingFile);

    // segment
    auto* seg = app.add_subcommand("segment", "Otsu-threshold an image into a binary mask");
    std::string seg_in, seg_out;
    seg->add_option("image", seg_in)->required()->check(CLI::ExistingFile);
    seg->add_option("out", seg_out, "Output mask PNG")->required();

    // dice
    auto* dice = app.add_subcommand("dice", "Dice coefficient of two mask PNGs");
    std::string dice_a, dice_b;
    dice->add_option("mask_a", dice_a)->required()->check(CLI::ExistingFile);
    dice->add_option("mask_b", dice_b)->required()->check(CLI::ExistingFile);

    // extract
    auto* ext = app.add_subcommand("extract", "Cut a tight RGBA object out of an image and mask");
    std::string ext_img, ext_mask, ext_out;
    ext->add_option("image", ext_img)->required()->check(CLI::ExistingFile);
    ext->add_option("mask", ext_mask)->required()->check(CLI::ExistingFile);
    ext->add_option("out", ext_out, "Output RGBA PNG")->required();

    // synth
    auto* syn = app.add_subcommand("synth", "Generate a synthetic dataset from a catalog");
    std::string syn_catalog, syn_out;
    std::optional<int> syn_cap;
    bool syn_fixed = false, syn_overwrite = false, syn_fod = false;
    std::vector<std::string> syn_classes;
    std::vector<int> syn_canvas;
    syn->add_option("--catalog", syn_catalog, "Catalog root with objects/ and backgrounds/")->required();
    syn->add_option("--out", syn_out, "Output dataset directory")->required();
    syn->add_option("--cap", syn_cap, "Per-batch image cap")->check(CLI::PositiveNumber);
    syn->add_flag("--fixed-count", syn_fixed, "Produce exactly cap images per batch");
    syn->add_option("--classes", syn_classes, "Restrict to these class names");
    syn->add_option("--canvas", syn_canvas, "Canvas width and height")->expected(2);
    syn->add_flag("--fod", syn_fod, "FOD preset: 300x300 canvas and the 31-class vocabulary");
    syn->add_flag("--overwrite", syn_overwrite, "Replace a previous dataset in --out");

    // stats
    auto* sts = app.add_subcommand("stats", "Per-class statistics of a dataset or catalog");
    std::string sts_dir, sts_json;
    bool sts_catalog = false;
    sts->add_option("dir", sts_dir)->required();
    sts->add_flag("--catalog", sts_catalog, "Treat dir as a catalog root and count masks only");
    sts->add_option("--json", sts_json, "Also write the table as JSON");

    // mixup
    auto* mix = app.add_subcommand("mixup", "Blend two labelled images");
    std::string mix_a, mix_b, mix_la, mix_lb, mix_mask, mix_out, mix_labels_out;
    std::optional<double> mix_lambda;
    double mix_alpha = 1.0;
    mix->add_option("image_a", mix_a)->required()->check(CLI::ExistingFile);
    mix->add_option("image_b", mix_b)->required()->check(CLI::ExistingFile);
    mix->add_option("--lambda", mix_lambda, "Weight of image_a; drawn from Beta(alpha, alpha) if omitted")
        ->check(CLI::Range(0.0, 1.0));
    mix->add_option("--alpha", mix_alpha, "Beta parameter")->check(CLI::PositiveNumber);
    mix->add_option("--labels-a", mix_la)->check(CLI::ExistingFile);
    mix->add_option("--labels-b", mix_lb)->check(CLI::ExistingFile);
    mix->add_option("--mask", mix_mask, "Binary mask selecting pixels of image_a")->check(CLI::ExistingFile);
    mix->add_option("--out", mix_out, "Output image PNG")->required();
    mix->add_option("--out-labels", mix_labels_out, "Output labels with a weight column");

    // eval
    auto* evl = app.add_subcommand("eval", "Score predictions against ground truth");
    std::string ev_gt, ev_pred, ev_json, ev_coco_gt, ev_coco_pred;
    double ev_conf = 0.25;
    bool ev_all_point = false;
    evl->add_option("--gt", ev_gt, "Ground-truth label directory");
    evl->add_option("--pred", ev_pred, "Prediction label directory");
    evl->add_option("--coco-gt", ev_coco_gt, "COCO ground-truth manifest")->check(CLI::ExistingFile);
    evl->add_option("--coco-pred", ev_coco_pred, "COCO results array")->check(CLI::ExistingFile);
    evl->add_option("--conf", ev_conf, "Confidence for precision and recall")->check(CLI::Range(0.0, 1.0));
    evl->add_flag("--all-point", ev_all_point, "All-point interpolation instead of 101 points");
    evl->add_option("--json", ev_json, "Write the report as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*seg) {
            const auto result = sria::mask_lab::otsu_threshold(sria::png::read_gray(seg_in));
            sria::png::write(seg_out, result.mask);
            fmt::print("threshold {}{}\n", result.threshold, result.degenerate ? " (constant image)" : "");
        } else if (*dice) {
            const double d = sria::mask_lab::dice(sria::png::read_mask(dice_a), sria::png::read_mask(dice_b));
            fmt::print("{:.4f}\n", d);
        } else if (*ext) {
            const auto cut = sria::extract_cutout(sria::png::read_rgb(ext_img), sria::png::read_mask(ext_mask),
                                                  {}, fs::path(ext_img).stem().string());
            sria::png::write(ext_out, cut.rgba);
            fmt::print("{}x{}\n", cut.width(), cut.height());
        } else if (*syn) {
            const fs::path root = syn_catalog;
            if (!fs::is_directory(root)) throw sria::DataError("catalog '" + root.string() + "' is not a directory");
            if (!fs::is_directory(root / "backgrounds")) {
                throw sria::DataError("backgrounds directory '" + (root / "backgrounds").string() + "' not found");
            }
            sria::batch::SynthesisConfig cfg = syn_fod ? sria::batch::fod_preset() : sria::batch::SynthesisConfig{};
            if (!g.config.empty()) {
                json doc;
                try {
                    doc = json::parse(sria::dataset_io::read_text_file(g.config));
                } catch (const json::parse_error& e) {
                    throw sria::InvalidArgument("cannot parse '" + g.config + "': " + e.what());
                }
                cfg = doc.get<sria::batch::SynthesisConfig>();
            }
            if (seed_given || g.config.empty()) cfg.master_seed = g.seed;
            if (syn_cap) cfg.per_batch_cap = *syn_cap;
            if (syn_fixed) cfg.count_mode = sria::batch::CountMode::fixed;
            if (!syn_classes.empty()) cfg.classes = syn_classes;
            if (!syn_canvas.empty()) cfg.canvas_size = std::pair{syn_canvas[0], syn_canvas[1]};
            cfg.validate();

            sria::catalog::LoadOptions load;
            load.workers = g.workers;
            if (syn_fod) {
                const auto& names = sria::fod_class_names();
                load.vocabulary = std::vector<std::string>(names.begin(), names.end());
            }
            const auto cat = sria::catalog::load_catalog(root, load);
            if (syn_overwrite && fs::is_directory(syn_out)) clear_dataset(syn_out);
            const auto manifest = sria::dataset_io::write_synthetic_dataset(syn_out, cfg, cat, g.workers);
            fmt::print("{}", sria::dataset_io::format_stats_table(sria::dataset_io::stats_from_manifest(manifest)));
        } else if (*sts) {
            const auto table = sts_catalog ? sria::dataset_io::stats_from_catalog(sria::catalog::load_catalog(sts_dir))
                                           : sria::dataset_io::dataset_stats(sts_dir);
            fmt::print("{}", sria::dataset_io::format_stats_table(table));
            if (!sts_json.empty()) write_out(sts_json, sria::dataset_io::dump_json(sria::dataset_io::stats_to_json(table)));
        } else if (*mix) {
            sria::dataset_io::LabeledImage a{sria::png::read_rgb(mix_a), {}};
            sria::dataset_io::LabeledImage b{sria::png::read_rgb(mix_b), {}};
            if (!mix_la.empty()) a.labels = read_labels(mix_la, a.image.width(), a.image.height());
            if (!mix_lb.empty()) b.labels = read_labels(mix_lb, b.image.width(), b.image.height());
            double lambda = 0.0;
            if (mix_lambda) {
                lambda = *mix_lambda;
            } else {
                sria::Rng rng(sria::derive_seed(g.seed, {}));
                lambda = sria::dataset_io::plan_mixup(2, 1.0, mix_alpha, rng).front().lambda;
            }
            std::optional<sria::BinaryMask> mask;
            if (!mix_mask.empty()) mask = sria::png::read_mask(mix_mask);
            const auto out = sria::dataset_io::mixup(a, b, lambda, mask ? &*mask : nullptr);
            sria::png::write(mix_out, out.image);
            if (!mix_labels_out.empty()) {
                std::string text;
                for (const auto& l : out.labels) {
                    const auto n = sria::dataset_io::normalize(l.annotation.bbox, out.image.width(), out.image.height());
                    text += fmt::format("{} {:.6f} {:.6f} {:.6f} {:.6f} {:.6f}\n", l.annotation.class_index, n.cx, n.cy,
                                        n.w, n.h, l.weight);
                }
                sria::dataset_io::write_text_file(mix_labels_out, text);
            }
            fmt::print("lambda {:.6f}\n", lambda);
        } else if (*evl) {
            sria::eval::EvalInputs in;
            if (!ev_gt.empty() && !ev_pred.empty()) {
                in = sria::eval::read_detector_dirs(ev_gt, ev_pred);
            } else if (!ev_coco_gt.empty() && !ev_coco_pred.empty()) {
                try {
                    in = sria::eval::read_coco(json::parse(sria::dataset_io::read_text_file(ev_coco_gt)),
                                               json::parse(sria::dataset_io::read_text_file(ev_coco_pred)));
                } catch (const json::parse_error& e) {
                    throw sria::DataError(std::string("cannot parse COCO input: ") + e.what());
                }
            } else {
                throw sria::InvalidArgument("eval needs --gt and --pred, or --coco-gt and --coco-pred");
            }
            if (in.ground_truth.empty()) throw sria::DataError("no ground-truth boxes found");
            sria::eval::EvalOptions opts;
            opts.confidence_threshold = ev_conf;
            if (ev_all_point) opts.interpolation = sria::eval::Interpolation::all_point;
            const auto report = sria::eval::map_range(in.detections, in.ground_truth, opts);
            fmt::print("{}", report.to_table());
            if (!ev_json.empty()) write_out(ev_json, sria::dataset_io::dump_json(report.to_json()));
        }
    } catch (const sria::InvalidArgument& e) {
        spdlog::error("{}", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitData;
    }
    return 0;
}
