#include <doctest.h>

#include <set>

#include "sria/batch_scheduler.hpp"
#include "sria/errors.hpp"
#include "support.hpp"

using namespace sria;
using namespace sria::batch;

TEST_SUITE("batch_scheduler") {
    TEST_CASE("recipes encode the six flag products") {
        const auto& r = standard_recipes();
        auto flags = [](const BatchRecipe& b) {
            std::string s;
            if (b.use_rotation) s += 'R';
            if (b.use_scale) s += 'S';
            if (b.use_occlusion) s += 'O';
            if (b.use_truncation) s += 'T';
            if (b.use_instances) s += 'I';
            return s;
        };
        CHECK(flags(r[0]) == "OT");
        CHECK(flags(r[1]) == "RSOT");
        CHECK(flags(r[2]) == "TI");
        CHECK(flags(r[3]) == "RSTI");
        CHECK(flags(r[4]) == "ROT");
        CHECK(flags(r[5]) == "SOT");
        for (int i = 0; i < kBatchCount; ++i) CHECK(r[i].name() == "B" + std::to_string(i + 1));
    }

    TEST_CASE("B1 images hold one untransformed instance") {
        const auto cat = test::toy_catalog(1, 1, 4, 2);
        SynthesisConfig cfg;
        const auto images = run_batch(standard_recipes()[0], cat.classes[0].cutouts, cat.backgrounds, 40, cfg, 7);
        CHECK(images.size() == 40);
        for (const auto& img : images) {
            REQUIRE(img.instances.size() == 1);
            CHECK(img.instances[0].params.is_identity());
        }
    }

    TEST_CASE("B3 instance counts span 1..6") {
        const auto cat = test::toy_catalog(2, 1, 4, 2, 300, 300);
        SynthesisConfig cfg;
        cfg.per_batch_cap = 1000;
        const auto& b3 = standard_recipes()[2];
        std::set<std::size_t> seen;
        for (int i = 0; i < 1000; ++i) {
            const auto img = generate_image(b3, cat.classes[0].cutouts, cat.backgrounds, cfg,
                                            derive_seed(3, {static_cast<std::uint64_t>(i)}));
            CHECK(img.instances.size() <= 6);
            CHECK(img.instances.size() >= 1);
            seen.insert(img.instances.size());
            for (const auto& inst : img.instances) {
                CHECK(inst.params.is_identity());
                CHECK(inst.occluded_fraction == 0.0);  // occlusion disabled in B3
            }
        }
        CHECK(seen == std::set<std::size_t>{1, 2, 3, 4, 5, 6});
    }

    TEST_CASE("B2 parameters stay in range") {
        const auto cat = test::toy_catalog(4, 1, 4, 2);
        SynthesisConfig cfg;
        const auto images = run_batch(standard_recipes()[1], cat.classes[0].cutouts, cat.backgrounds, 60, cfg, 5);
        for (const auto& img : images) {
            REQUIRE(img.instances.size() == 1);
            const auto& p = img.instances[0].params;
            CHECK(p.rotation_deg >= -45.0);
            CHECK(p.rotation_deg <= 45.0);
            CHECK(p.scale >= 0.25);
            CHECK(p.scale <= 0.6);
            CHECK(p.perspective_tilt >= 0.0);
            CHECK(p.perspective_tilt < 0.001);
            CHECK_FALSE(p.flip_h);
        }
    }

    TEST_CASE("run_batch preconditions") {
        const auto cat = test::toy_catalog(5, 1, 1, 1);
        SynthesisConfig cfg;
        cfg.per_batch_cap = 3;
        CHECK_THROWS_AS(run_batch(standard_recipes()[0], cat.classes[0].cutouts, cat.backgrounds, 4, cfg, 1),
                        InvalidArgument);
        CHECK_THROWS_AS(run_batch(standard_recipes()[0], {}, cat.backgrounds, 1, cfg, 1), DataError);
    }

    TEST_CASE("cap 1 in fixed mode gives one image per batch") {
        const auto cat = test::toy_catalog(6, 1, 2, 1);
        SynthesisConfig cfg;
        cfg.per_batch_cap = 1;
        cfg.count_mode = CountMode::fixed;
        const auto [images, manifest] = run_all(cfg, cat);
        CHECK(images.size() == 6);
        CHECK(manifest.total_images == 6);
        for (int b = 0; b < kBatchCount; ++b) CHECK(manifest.classes[0].per_batch[b] == 1);
    }

    TEST_CASE("manifest bounds and sums") {
        const auto cat = test::toy_catalog(7, 3, 3, 2, 100, 80);
        SynthesisConfig cfg;
        cfg.per_batch_cap = 12;
        const auto [images, m] = run_all(cfg, cat, 2);
        std::size_t images_sum = 0, inst_sum = 0, masks = 0;
        for (const auto& c : m.classes) {
            CHECK(c.images_produced <= 6 * 12);
            std::size_t per = 0;
            for (auto n : c.per_batch) {
                CHECK(n >= 1);
                CHECK(n <= 12);
                per += n;
            }
            CHECK(per == c.images_produced);
            images_sum += c.images_produced;
            inst_sum += c.instances;
            masks += c.masks_used;
        }
        CHECK(images_sum == m.total_images);
        CHECK(inst_sum == m.total_instances);
        CHECK(masks == m.total_masks);
        CHECK(masks == 9);
        std::size_t counted = 0;
        for (const auto& g : images) counted += g.image.instances.size();
        CHECK(counted == m.total_instances);
        CHECK(images.size() == m.total_images);
    }

    TEST_CASE("worker count does not change the output") {
        const auto cat = test::toy_catalog(8, 2, 3, 2, 90, 70);
        SynthesisConfig cfg;
        cfg.per_batch_cap = 5;
        cfg.master_seed = 1234;
        const auto [a, ma] = run_all(cfg, cat, 1);
        const auto [b, mb] = run_all(cfg, cat, 4);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].job.stem() == b[i].job.stem());
            CHECK(a[i].image.canvas == b[i].image.canvas);
        }
        CHECK(ma.to_json() == mb.to_json());

        cfg.master_seed = 1235;
        const auto [c, mc] = run_all(cfg, cat, 1);
        bool differs = c.size() != a.size();
        for (std::size_t i = 0; !differs && i < a.size(); ++i) differs = !(a[i].image.canvas == c[i].image.canvas);
        CHECK(differs);
    }

    TEST_CASE("classes without cutouts are kept with zero images") {
        auto cat = test::toy_catalog(9, 2, 2, 1);
        cat.classes[1].cutouts.clear();
        SynthesisConfig cfg;
        cfg.per_batch_cap = 2;
        const auto [images, m] = run_all(cfg, cat);
        REQUIRE(m.classes.size() == 2);
        CHECK(m.classes[1].images_produced == 0);
        for (const auto& g : images) CHECK(g.job.class_id.index == 0);

        cfg.classes = {"class1", "nope"};
        CHECK_THROWS_AS(plan_dataset(cfg, cat), InvalidArgument);
        catalog::Catalog empty;
        CHECK_THROWS_AS(plan_dataset(SynthesisConfig{}, empty), DataError);
    }

    TEST_CASE("config JSON round trip, strictness and hash") {
        SynthesisConfig cfg = fod_preset();
        cfg.per_batch_cap = 9;
        cfg.count_mode = CountMode::fixed;
        cfg.master_seed = 0xfeedfacecafebeefULL;
        cfg.classes = {"Nut"};
        cfg.ranges.rotation_max_deg = 30;
        const nlohmann::json j = cfg;
        CHECK(j.get<SynthesisConfig>() == cfg);
        CHECK(config_hash(cfg) == config_hash(j.get<SynthesisConfig>()));
        SynthesisConfig other = cfg;
        other.per_batch_cap = 10;
        CHECK(config_hash(cfg) != config_hash(other));

        auto bad = j;
        bad["per_batch_capp"] = 3;
        CHECK_THROWS_AS(bad.get<SynthesisConfig>(), InvalidArgument);
        CHECK(nlohmann::json::object().get<SynthesisConfig>() == SynthesisConfig{});

        SynthesisConfig invalid;
        invalid.instances_max = 7;
        CHECK_THROWS_AS(invalid.validate(), InvalidArgument);
        invalid = {};
        invalid.per_batch_cap = 0;
        CHECK_THROWS_AS(invalid.validate(), InvalidArgument);
    }

    TEST_CASE("manifest JSON round trip") {
        const auto cat = test::toy_catalog(10, 2, 2, 1);
        SynthesisConfig cfg;
        cfg.per_batch_cap = 2;
        const auto [images, m] = run_all(cfg, cat);
        const auto back = DatasetManifest::from_json(m.to_json());
        CHECK(back.to_json() == m.to_json());
        CHECK(back.config_hash == m.config_hash);
        CHECK_THROWS_AS(DatasetManifest::from_json(nlohmann::json::object()), DataError);
    }

    TEST_CASE("stems") {
        ImageJob job{{7, "x"}, 0, 2, 12, 0};
        CHECK(job.stem() == "07_B2_012");
    }
}
