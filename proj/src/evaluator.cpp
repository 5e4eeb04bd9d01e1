#include "sria/evaluator.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

#include "sria/dataset_io.hpp"
#include "sria/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace sria::eval {
namespace {

std::vector<std::size_t> by_confidence(std::span<const double> conf) {
    std::vector<std::size_t> order(conf.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return conf[a] > conf[b]; });
    return order;
}

// Index of the best unmatched candidate at or above the threshold, or -1.
int best_unmatched(const BoxF& det, std::span<const BoxF> gts, const std::vector<bool>& taken,
                   double threshold) {
    int best = -1;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
        if (taken[g]) continue;
        const double v = iou(det, gts[g]);
        if (v >= threshold && v > best_iou) {
            best = static_cast<int>(g);
            best_iou = v;
        }
    }
    return best;
}

void check_confidence(double c) {
    if (!(c >= 0.0 && c <= 1.0)) throw InvalidArgument(fmt::format("confidence {} is outside [0, 1]", c));
}

BoxF to_box(const dataset_io::NormalizedBox& b) {
    return {b.cx - b.w / 2.0, b.cy - b.h / 2.0, b.cx + b.w / 2.0, b.cy + b.h / 2.0};
}

BoxF from_xywh(const json& a) {
    const double x = a.at(0).get<double>(), y = a.at(1).get<double>();
    return {x, y, x + a.at(2).get<double>(), y + a.at(3).get<double>()};
}

// Extended accumulation: the mean of n equal values is that value exactly, so
// a mean never exceeds its largest term.
double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    const long double sum = std::accumulate(v.begin(), v.end(), 0.0L);
    return static_cast<double>(sum / static_cast<long double>(v.size()));
}

}  // namespace

double iou(const BoxF& a, const BoxF& b) {
    if (!a.valid() || !b.valid()) return 0.0;
    const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    return inter / (a.area() + b.area() - inter);
}

MatchResult match(std::span<const BoxF> dets, std::span<const double> confidences, std::span<const BoxF> gts,
                  double iou_threshold) {
    if (dets.size() != confidences.size()) throw InvalidArgument("one confidence per detection is required");
    for (double c : confidences) check_confidence(c);
    MatchResult r;
    r.assigned_gt.assign(dets.size(), -1);
    std::vector<bool> taken(gts.size(), false);
    for (const std::size_t d : by_confidence(confidences)) {
        const int g = best_unmatched(dets[d], gts, taken, iou_threshold);
        if (g < 0) {
            ++r.fp;
            continue;
        }
        taken[static_cast<std::size_t>(g)] = true;
        r.assigned_gt[d] = g;
        ++r.tp;
    }
    r.fn = gts.size() - r.tp;
    return r;
}

PrCurve pr_curve(std::span<const Detection> dets, std::span<const GroundTruth> gts, int class_id,
                 double iou_threshold) {
    std::unordered_map<std::string, std::vector<BoxF>> gt_by_image;
    PrCurve curve;
    for (const auto& g : gts) {
        if (g.class_id != class_id) continue;
        gt_by_image[g.image_id].push_back(g.bbox);
        ++curve.gt_count;
    }
    std::unordered_map<std::string, std::vector<bool>> taken;
    for (const auto& [id, boxes] : gt_by_image) taken[id].assign(boxes.size(), false);

    std::vector<const Detection*> mine;
    std::vector<double> conf;
    for (const auto& d : dets) {
        if (d.class_id != class_id) continue;
        check_confidence(d.confidence);
        mine.push_back(&d);
        conf.push_back(d.confidence);
    }

    std::size_t tp = 0, fp = 0;
    const double total = static_cast<double>(curve.gt_count);
    for (const std::size_t i : by_confidence(conf)) {
        const Detection& d = *mine[i];
        const auto it = gt_by_image.find(d.image_id);
        int g = -1;
        if (it != gt_by_image.end()) g = best_unmatched(d.bbox, it->second, taken[d.image_id], iou_threshold);
        if (g >= 0) {
            taken[d.image_id][static_cast<std::size_t>(g)] = true;
            ++tp;
        } else {
            ++fp;
        }
        curve.points.push_back({total > 0 ? static_cast<double>(tp) / total : 0.0,
                                static_cast<double>(tp) / static_cast<double>(tp + fp), d.confidence});
    }
    return curve;
}

double average_precision(const PrCurve& curve, Interpolation mode) {
    if (curve.gt_count == 0) throw InvalidArgument("average precision needs at least one ground truth");
    const auto& pts = curve.points;
    std::vector<double> envelope(pts.size());
    double running = 0.0;
    for (std::size_t i = pts.size(); i-- > 0;) {
        running = std::max(running, pts[i].precision);
        envelope[i] = running;
    }

    if (mode == Interpolation::all_point) {
        double ap = 0.0, prev_recall = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            ap += (pts[i].recall - prev_recall) * envelope[i];
            prev_recall = pts[i].recall;
        }
        return ap;
    }

    double sum = 0.0;
    std::size_t j = 0;
    for (int k = 0; k <= 100; ++k) {
        const double r = k / 100.0;
        while (j < pts.size() && pts[j].recall < r) ++j;
        if (j == pts.size()) break;
        sum += envelope[j];
    }
    return sum / 101.0;
}

std::vector<double> coco_thresholds() {
    std::vector<double> t;
    for (int i = 0; i < 10; ++i) t.push_back((50 + 5 * i) / 100.0);
    return t;
}

EvalReport map_range(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                     const EvalOptions& options) {
    if (gts.empty()) throw InvalidArgument("evaluation needs at least one ground-truth box");
    check_confidence(options.confidence_threshold);

    EvalReport report;
    report.iou_thresholds = options.iou_thresholds.empty() ? coco_thresholds() : options.iou_thresholds;
    report.confidence_threshold = options.confidence_threshold;
    for (double t : report.iou_thresholds) {
        if (!(t > 0.0 && t <= 1.0)) throw InvalidArgument("IoU thresholds must lie in (0, 1]");
    }

    std::set<int> classes;
    for (const auto& g : gts) classes.insert(g.class_id);

    std::vector<Detection> confident;
    for (const auto& d : dets) {
        if (d.confidence >= options.confidence_threshold) confident.push_back(d);
    }

    std::vector<double> sum_per_threshold(report.iou_thresholds.size(), 0.0);
    std::vector<double> precisions, recalls;
    for (const int c : classes) {
        ClassReport cr;
        cr.class_id = c;
        for (std::size_t t = 0; t < report.iou_thresholds.size(); ++t) {
            const auto curve = pr_curve(dets, gts, c, report.iou_thresholds[t]);
            cr.gt_count = curve.gt_count;
            cr.ap.push_back(average_precision(curve, options.interpolation));
            sum_per_threshold[t] += cr.ap.back();
        }
        const auto op = pr_curve(confident, gts, c, options.pr_iou_threshold);
        if (!op.points.empty()) {
            cr.precision = op.points.back().precision;
            cr.recall = op.points.back().recall;
        }
        precisions.push_back(cr.precision);
        recalls.push_back(cr.recall);
        report.classes.push_back(std::move(cr));
    }

    const double n = static_cast<double>(classes.size());
    std::vector<double> map_per_threshold;
    for (double s : sum_per_threshold) map_per_threshold.push_back(s / n);
    report.map_50_95 = mean(map_per_threshold);
    std::size_t closest = 0;
    for (std::size_t t = 1; t < report.iou_thresholds.size(); ++t) {
        if (std::abs(report.iou_thresholds[t] - 0.5) < std::abs(report.iou_thresholds[closest] - 0.5)) closest = t;
    }
    report.map_50 = map_per_threshold[closest];
    report.precision = mean(precisions);
    report.recall = mean(recalls);
    return report;
}

json EvalReport::to_json() const {
    json classes_json = json::array();
    for (const auto& c : classes) {
        classes_json.push_back({{"class_id", c.class_id},
                                {"ground_truth", c.gt_count},
                                {"ap", c.ap},
                                {"precision", c.precision},
                                {"recall", c.recall}});
    }
    return {{"iou_thresholds", iou_thresholds},
            {"confidence_threshold", confidence_threshold},
            {"map_50", map_50},
            {"map_50_95", map_50_95},
            {"precision", precision},
            {"recall", recall},
            {"classes", classes_json}};
}

std::string EvalReport::to_table(const std::map<int, std::string>& names) const {
    std::size_t name_w = 5;
    auto label = [&](int id) {
        const auto it = names.find(id);
        return it != names.end() ? it->second : std::to_string(id);
    };
    for (const auto& c : classes) name_w = std::max(name_w, label(c.class_id).size());
    std::string out = fmt::format("{:<{}}  {:>10}  {:>15}  {:>9}  {:>9}\n", "Class", name_w, "mAP (0.5)",
                                  "mAP (0.5-0.95)", "Precision", "Recall");
    out += std::string(name_w + 10 + 15 + 9 + 9 + 8, '-') + "\n";
    out += fmt::format("{:<{}}  {:>10.3f}  {:>15.3f}  {:>9.3f}  {:>9.3f}\n", "all", name_w, map_50, map_50_95,
                       precision, recall);
    std::size_t closest = 0;
    for (std::size_t t = 1; t < iou_thresholds.size(); ++t) {
        if (std::abs(iou_thresholds[t] - 0.5) < std::abs(iou_thresholds[closest] - 0.5)) closest = t;
    }
    for (const auto& c : classes) {
        out += fmt::format("{:<{}}  {:>10.3f}  {:>15.3f}  {:>9.3f}  {:>9.3f}\n", label(c.class_id), name_w,
                           c.ap.empty() ? 0.0 : c.ap[closest], mean(c.ap), c.precision, c.recall);
    }
    return out;
}

EvalInputs read_detector_dirs(const fs::path& gt_dir, const fs::path& pred_dir) {
    for (const auto& d : {gt_dir, pred_dir}) {
        if (!fs::is_directory(d)) throw DataError("'" + d.string() + "' is not a directory");
    }
    EvalInputs in;
    std::set<std::string> gt_ids;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(gt_dir)) {
        if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        const std::string id = f.stem().string();
        gt_ids.insert(id);
        for (const auto& line : dataset_io::parse_detector_txt(dataset_io::read_text_file(f), f.string())) {
            if (line.confidence) throw DataError("'" + f.string() + "': ground truth must not carry a confidence");
            in.ground_truth.push_back({id, line.class_index, to_box(line.box)});
        }
    }
    files.clear();
    for (const auto& e : fs::directory_iterator(pred_dir)) {
        if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        const std::string id = f.stem().string();
        if (!gt_ids.count(id)) throw DataError("prediction '" + f.string() + "' has no ground-truth file");
        for (const auto& line : dataset_io::parse_detector_txt(dataset_io::read_text_file(f), f.string())) {
            if (!line.confidence) throw DataError("'" + f.string() + "': prediction lines need a confidence");
            in.detections.push_back({id, line.class_index, to_box(line.box), *line.confidence});
        }
    }
    return in;
}

EvalInputs read_coco(const json& gt, const json& predictions) {
    try {
        EvalInputs in;
        std::set<std::int64_t> ids;
        for (const auto& im : gt.at("images")) ids.insert(im.at("id").get<std::int64_t>());
        for (const auto& a : gt.at("annotations")) {
            in.ground_truth.push_back({std::to_string(a.at("image_id").get<std::int64_t>()),
                                       a.at("category_id").get<int>(), from_xywh(a.at("bbox"))});
        }
        for (const auto& p : predictions) {
            const auto image = p.at("image_id").get<std::int64_t>();
            if (!ids.count(image)) throw DataError(fmt::format("prediction refers to unknown image id {}", image));
            const double score = p.at("score").get<double>();
            if (!(score >= 0.0 && score <= 1.0)) throw DataError(fmt::format("score {} is outside [0, 1]", score));
            in.detections.push_back(
                {std::to_string(image), p.at("category_id").get<int>(), from_xywh(p.at("bbox")), score});
        }
        return in;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed COCO input: ") + e.what());
    }
}

}  // namespace sria::eval
