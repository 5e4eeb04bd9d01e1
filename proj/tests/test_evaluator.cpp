#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "sria/errors.hpp"
#include "sria/evaluator.hpp"
#include "support.hpp"

using namespace sria;
using namespace sria::eval;

namespace {

BoxF random_boxf(Rng& rng, double extent = 10.0) {
    const double x = std::floor(uniform_real(rng, 0, extent)), y = std::floor(uniform_real(rng, 0, extent));
    return {x, y, x + std::floor(uniform_real(rng, 1, extent / 2 + 1)), y + std::floor(uniform_real(rng, 1, extent / 2 + 1))};
}

// Exhaustive search over every injective assignment. Visiting detections by
// descending confidence, the greedy rule picks the lexicographically largest
// sequence of (IoU, -gt index) keys, unmatched detections scoring lowest.
std::vector<int> brute_force_assignment(const std::vector<BoxF>& dets, const std::vector<double>& conf,
                                        const std::vector<BoxF>& gts, double thr) {
    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return conf[a] > conf[b]; });

    using Key = std::vector<std::pair<double, int>>;
    Key best_key;
    std::vector<int> best, cur(dets.size(), -1);
    std::vector<bool> used(gts.size(), false);
    auto rec = [&](auto&& self, std::size_t k, Key key) -> void {
        if (k == order.size()) {
            if (best.empty() || key > best_key) best_key = key, best = cur;
            return;
        }
        const std::size_t d = order[k];
        auto skip = key;
        skip.push_back({-1.0, 0});
        cur[d] = -1;
        self(self, k + 1, skip);
        for (std::size_t g = 0; g < gts.size(); ++g) {
            const double v = iou(dets[d], gts[g]);
            if (used[g] || v < thr) continue;
            used[g] = true;
            cur[d] = static_cast<int>(g);
            auto next = key;
            next.push_back({v, -static_cast<int>(g)});
            self(self, k + 1, next);
            used[g] = false;
            cur[d] = -1;
        }
    };
    rec(rec, 0, {});
    return best;
}

// 101-point AP straight from the definition: at each recall level take the
// best precision achieved at that recall or beyond.
double reference_ap(const PrCurve& c) {
    double sum = 0;
    for (int k = 0; k <= 100; ++k) {
        double p = 0;
        for (const auto& pt : c.points)
            if (pt.recall >= k / 100.0) p = std::max(p, pt.precision);
        sum += p;
    }
    return sum / 101.0;
}

PrCurve curve_of(const std::vector<bool>& hits, std::size_t gt_count) {
    PrCurve c;
    c.gt_count = gt_count;
    std::size_t tp = 0;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        tp += hits[i];
        c.points.push_back({double(tp) / double(gt_count), double(tp) / double(i + 1), 1.0 - 0.001 * double(i)});
    }
    return c;
}

struct RandomSet {
    std::vector<Detection> dets;
    std::vector<GroundTruth> gts;
};

RandomSet random_set(Rng& rng) {
    RandomSet s;
    const int images = static_cast<int>(uniform_int(rng, 1, 4));
    for (int i = 0; i < images; ++i) {
        const std::string id = "im" + std::to_string(i);
        const int n = static_cast<int>(uniform_int(rng, 0, 5));
        for (int k = 0; k < n; ++k) {
            GroundTruth g{id, static_cast<int>(uniform_int(rng, 0, 2)), random_boxf(rng, 40)};
            s.gts.push_back(g);
            if (bernoulli(rng, 0.7)) {
                const double j = uniform_real(rng, -3, 3);
                s.dets.push_back({id, g.class_id, {g.bbox.x_min + j, g.bbox.y_min, g.bbox.x_max + j, g.bbox.y_max},
                                  uniform01(rng)});
            }
        }
        const int fp = static_cast<int>(uniform_int(rng, 0, 3));
        for (int k = 0; k < fp; ++k)
            s.dets.push_back({id, static_cast<int>(uniform_int(rng, 0, 2)), random_boxf(rng, 40), uniform01(rng)});
    }
    if (s.gts.empty()) s.gts.push_back({"im0", 0, {0, 0, 5, 5}});
    return s;
}

}  // namespace

TEST_SUITE("evaluator") {
    TEST_CASE("iou examples and properties") {
        CHECK(iou({0, 0, 2, 2}, {0, 0, 2, 2}) == 1.0);
        CHECK(iou({0, 0, 2, 2}, {3, 3, 5, 5}) == 0.0);
        CHECK(iou({0, 0, 2, 2}, {2, 0, 4, 2}) == 0.0);
        CHECK(std::abs(iou({0, 0, 2, 2}, {1, 1, 3, 3}) - 1.0 / 7.0) <= 1e-12);
        CHECK(iou({0, 0, 0, 2}, {0, 0, 2, 2}) == 0.0);
        Rng rng(1);
        for (int i = 0; i < 2000; ++i) {
            const auto a = random_boxf(rng), b = random_boxf(rng);
            const double v = iou(a, b);
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            CHECK(v == iou(b, a));
            CHECK(iou(a, a) == 1.0);
            CHECK(std::abs(iou(a.translated(7, -3), b.translated(7, -3)) - v) <= 1e-12);
        }
    }

    TEST_CASE("match examples") {
        const std::vector<BoxF> gt{{0, 0, 10, 10}};
        const auto one = match(std::vector<BoxF>{{0, 0, 10, 10}}, std::vector{0.9}, gt, 0.5);
        CHECK(one.tp == 1);
        CHECK(one.fp == 0);
        CHECK(one.fn == 0);
        const auto two = match(std::vector<BoxF>{{0, 0, 10, 9}, {0, 0, 10, 10}}, std::vector{0.4, 0.8}, gt, 0.5);
        CHECK(two.assigned_gt == std::vector<int>{-1, 0});
        CHECK(two.tp == 1);
        CHECK(two.fp == 1);
        const auto none = match({}, {}, gt, 0.5);
        CHECK(none.fn == 1);
        CHECK_THROWS_AS(match(std::vector<BoxF>{{0, 0, 1, 1}}, std::vector{1.2}, gt, 0.5), InvalidArgument);
    }

    TEST_CASE("match equals exhaustive enumeration on small scenes") {
        Rng rng(2);
        for (int trial = 0; trial < 3000; ++trial) {
            const int nd = static_cast<int>(uniform_int(rng, 0, 4)), ng = static_cast<int>(uniform_int(rng, 0, 4));
            std::vector<BoxF> dets, gts;
            std::vector<double> conf;
            for (int i = 0; i < ng; ++i) gts.push_back(random_boxf(rng, 6));
            for (int i = 0; i < nd; ++i) {
                dets.push_back(random_boxf(rng, 6));
                conf.push_back(std::floor(uniform_real(rng, 0, 4)) / 4.0);  // ties on purpose
            }
            const double thr = std::array{0.1, 0.3, 0.5}[trial % 3];
            const auto r = match(dets, conf, gts, thr);
            CHECK(r.assigned_gt == brute_force_assignment(dets, conf, gts, thr));
            std::set<int> seen;
            for (int g : r.assigned_gt)
                if (g >= 0) CHECK(seen.insert(g).second);
            CHECK(r.tp + r.fp == dets.size());
            CHECK(r.tp + r.fn == gts.size());
        }
    }

    TEST_CASE("average precision hand values") {
        // TP, FP, TP over two ground truths: envelope 1 up to recall 0.5, then 2/3.
        const auto c = curve_of({true, false, true}, 2);
        CHECK(std::abs(average_precision(c) - (51.0 + 50.0 * 2.0 / 3.0) / 101.0) <= 1e-9);
        CHECK(std::abs(average_precision(c, Interpolation::all_point) - (0.5 + 0.5 * 2.0 / 3.0)) <= 1e-9);
        CHECK(average_precision(curve_of({true}, 1)) == 1.0);
        CHECK(average_precision(curve_of({false, false}, 1)) == 0.0);
        CHECK(average_precision(curve_of({}, 3)) == 0.0);
        CHECK_THROWS_AS(average_precision(curve_of({}, 0)), InvalidArgument);
    }

    TEST_CASE("average precision matches the definition on random curves") {
        Rng rng(3);
        for (int trial = 0; trial < 2000; ++trial) {
            const auto gt = static_cast<std::size_t>(uniform_int(rng, 1, 12));
            std::vector<bool> hits;
            std::size_t tp = 0;
            const int n = static_cast<int>(uniform_int(rng, 0, 20));
            for (int i = 0; i < n; ++i) {
                const bool h = tp < gt && bernoulli(rng, 0.5);
                tp += h;
                hits.push_back(h);
            }
            const auto c = curve_of(hits, gt);
            CHECK(std::abs(average_precision(c) - reference_ap(c)) <= 1e-9);
        }
    }

    TEST_CASE("pr curve over images") {
        const std::vector<GroundTruth> gts{{"a", 0, {0, 0, 10, 10}}, {"b", 0, {0, 0, 10, 10}}, {"b", 1, {0, 0, 4, 4}}};
        const std::vector<Detection> dets{{"a", 0, {0, 0, 10, 10}, 0.9}, {"a", 0, {50, 50, 60, 60}, 0.8},
                                          {"b", 0, {0, 0, 10, 10}, 0.7}, {"c", 0, {0, 0, 10, 10}, 0.95}};
        const auto c = pr_curve(dets, gts, 0, 0.5);
        CHECK(c.gt_count == 2);
        REQUIRE(c.points.size() == 4);
        CHECK(c.points[0].confidence == 0.95);
        CHECK(c.points[0].precision == 0.0);
        CHECK(c.points[1].recall == 0.5);
        CHECK(c.points[3].recall == 1.0);
        CHECK(c.points[3].precision == 0.5);
    }

    TEST_CASE("planted IoU 0.6 steps at its threshold") {
        // Detection covers the top 60% of its ground truth: IoU exactly 0.6.
        std::vector<GroundTruth> gts;
        std::vector<Detection> dets;
        for (int cls = 0; cls < 2; ++cls) {
            for (int i = 0; i < 3; ++i) {
                const std::string id = "im" + std::to_string(i);
                const double x = 20.0 * cls;
                gts.push_back({id, cls, {x, 0, x + 10, 10}});
                dets.push_back({id, cls, {x, 0, x + 10, 6}, 0.9});
            }
        }
        const auto r = map_range(dets, gts);
        REQUIRE(r.classes.size() == 2);
        for (const auto& c : r.classes) {
            for (std::size_t t = 0; t < r.iou_thresholds.size(); ++t)
                CHECK(c.ap[t] == (r.iou_thresholds[t] <= 0.6 ? 1.0 : 0.0));
        }
        CHECK(std::abs(r.map_50_95 - 0.3) <= 1e-9);
        CHECK(r.map_50 == 1.0);
        CHECK(r.precision == 1.0);
        CHECK(r.recall == 1.0);
    }

    TEST_CASE("perfect and all-wrong detectors") {
        Rng rng(4);
        for (int trial = 0; trial < 100; ++trial) {
            const auto s = random_set(rng);
            std::vector<Detection> perfect, wrong;
            for (const auto& g : s.gts) {
                perfect.push_back({g.image_id, g.class_id, g.bbox, uniform01(rng)});
                wrong.push_back({g.image_id, g.class_id, g.bbox.translated(1000, 1000), uniform01(rng)});
            }
            const auto p = map_range(perfect, s.gts);
            CHECK(p.map_50 == 1.0);
            CHECK(p.map_50_95 == 1.0);
            const auto w = map_range(wrong, s.gts);
            CHECK(w.map_50 == 0.0);
            CHECK(w.map_50_95 == 0.0);
        }
    }

    TEST_CASE("mAP50 is never below mAP50-95") {
        Rng rng(5);
        for (int trial = 0; trial < 1000; ++trial) {
            const auto s = random_set(rng);
            const auto r = map_range(s.dets, s.gts);
            CHECK(r.map_50 >= r.map_50_95);
            for (const auto& c : r.classes)
                for (std::size_t t = 1; t < c.ap.size(); ++t) CHECK(c.ap[t] <= c.ap[t - 1]);
        }
    }

    TEST_CASE("AP monotonicity under added detections") {
        Rng rng(6);
        for (int trial = 0; trial < 500; ++trial) {
            const auto s = random_set(rng);
            const int cls = s.gts.front().class_id;
            const auto base = average_precision(pr_curve(s.dets, s.gts, cls, 0.5));

            // A false positive below every confidence never raises AP.
            auto with_fp = s.dets;
            with_fp.push_back({"nowhere", cls, {0, 0, 1, 1}, 0.0});
            CHECK(average_precision(pr_curve(with_fp, s.gts, cls, 0.5)) <= base + 1e-12);

            // An exact hit on a missed ground truth never lowers AP.
            std::vector<BoxF> boxes;
            std::vector<double> conf;
            const auto& target = s.gts.front();
            for (const auto& d : s.dets)
                if (d.image_id == target.image_id && d.class_id == cls) boxes.push_back(d.bbox), conf.push_back(d.confidence);
            std::vector<BoxF> image_gts;
            std::size_t target_index = 0;
            for (const auto& g : s.gts) {
                if (g.image_id != target.image_id || g.class_id != cls) continue;
                if (&g == &target) target_index = image_gts.size();
                image_gts.push_back(g.bbox);
            }
            const auto m = match(boxes, conf, image_gts, 0.5);
            if (std::find(m.assigned_gt.begin(), m.assigned_gt.end(), static_cast<int>(target_index)) !=
                m.assigned_gt.end())
                continue;
            auto with_tp = s.dets;
            with_tp.push_back({target.image_id, cls, target.bbox, uniform01(rng)});
            CHECK(average_precision(pr_curve(with_tp, s.gts, cls, 0.5)) >= base - 1e-12);
        }
    }

    TEST_CASE("operating point precision and recall") {
        const std::vector<GroundTruth> gts{{"a", 0, {0, 0, 10, 10}}, {"a", 0, {20, 20, 30, 30}}};
        const std::vector<Detection> dets{{"a", 0, {0, 0, 10, 10}, 0.9}, {"a", 0, {50, 50, 60, 60}, 0.3},
                                          {"a", 0, {20, 20, 30, 30}, 0.1}};
        const auto r = map_range(dets, gts);
        CHECK(r.precision == 0.5);
        CHECK(r.recall == 0.5);
        CHECK_THROWS_AS(map_range(dets, {}), InvalidArgument);
        EvalOptions opts;
        opts.iou_thresholds = {0.0};
        CHECK_THROWS_AS(map_range(dets, gts, opts), InvalidArgument);
        CHECK(r.to_table({{0, "Nut"}}).find("Nut") != std::string::npos);
        CHECK(r.to_json()["classes"].size() == 1);
    }

    TEST_CASE("readers") {
        test::TempDir dir("eval");
        std::filesystem::create_directories(dir / "gt");
        std::filesystem::create_directories(dir / "pred");
        std::ofstream(dir / "gt" / "x.txt") << "0 0.5 0.5 0.2 0.2\n1 0.1 0.1 0.1 0.1\n";
        std::ofstream(dir / "pred" / "x.txt") << "0 0.5 0.5 0.2 0.2 0.8\n";
        const auto in = read_detector_dirs(dir / "gt", dir / "pred");
        REQUIRE(in.ground_truth.size() == 2);
        REQUIRE(in.detections.size() == 1);
        CHECK(std::abs(in.detections[0].bbox.x_min - 0.4) <= 1e-12);
        CHECK(map_range(in.detections, in.ground_truth).classes[0].ap[0] == 1.0);

        std::ofstream(dir / "pred" / "y.txt") << "0 0.5 0.5 0.2 0.2 0.8\n";
        CHECK_THROWS_AS(read_detector_dirs(dir / "gt", dir / "pred"), DataError);
        std::filesystem::remove(dir / "pred" / "y.txt");
        std::ofstream(dir / "pred" / "x.txt") << "0 0.5 0.5 0.2 0.2\n";
        CHECK_THROWS_AS(read_detector_dirs(dir / "gt", dir / "pred"), DataError);

        const auto gt = nlohmann::json::parse(R"({"images": [{"id": 1, "file_name": "a.png", "width": 10, "height": 10}],
            "annotations": [{"id": 1, "image_id": 1, "category_id": 2, "bbox": [1, 1, 4, 4], "area": 16, "iscrowd": 0}],
            "categories": [{"id": 2, "name": "Nut"}]})");
        const auto preds = nlohmann::json::parse(R"([{"image_id": 1, "category_id": 2, "bbox": [1, 1, 4, 4], "score": 0.5}])");
        const auto coco = read_coco(gt, preds);
        CHECK(coco.ground_truth.at(0).bbox == BoxF{1, 1, 5, 5});
        CHECK(map_range(coco.detections, coco.ground_truth).map_50_95 == 1.0);
        CHECK_THROWS_AS(read_coco(gt, nlohmann::json::parse(R"([{"image_id": 9, "category_id": 2, "bbox": [1, 1, 4, 4], "score": 0.5}])")),
                        DataError);
    }
}
