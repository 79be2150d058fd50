#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "prnet/checkpoint.hpp"
#include "prnet/config.hpp"
#include "prnet/dataset.hpp"
#include "prnet/rng.hpp"

using namespace prnet;

TEST_CASE("config parsing") {
    Config cfg = Config::parse_string(
        "# leading comment\n"
        "[train]\n"
        "lr = 0.1   # trailing comment\n"
        "epochs = 30\n"
        "\n"
        "[prn]\n"
        "g_layers = 32, 32\n"
        "loss_weights = 1, 0.5, 1\n"
        "variant = C\n");

    CHECK(cfg.get_double("train", "lr", 0.0) == 0.1);
    CHECK(cfg.get_size("train", "epochs", 0) == 30);
    CHECK(cfg.get_str("prn", "variant", "A") == "C");
    CHECK(cfg.get_size_list("prn", "g_layers", {}) == std::vector<size_t>{32, 32});
    CHECK(cfg.get_double_list("prn", "loss_weights", {}) == std::vector<double>{1.0, 0.5, 1.0});

    // fallbacks apply when the key is absent
    CHECK(cfg.get_double("train", "momentum", 0.9) == 0.9);
    CHECK_FALSE(cfg.has("train", "momentum"));
    CHECK(cfg.has("train", "lr"));

    cfg.check_consumed();  // every key above was touched
}

TEST_CASE("config rejects unknown and malformed input") {
    Config cfg = Config::parse_string("[train]\nlr = 0.1\nmystery = 3\n");
    CHECK(cfg.get_double("train", "lr", 0.0) == 0.1);
    CHECK_THROWS_AS(cfg.check_consumed(), InvalidConfig);

    CHECK_THROWS_AS(Config::parse_string("key_without_section = 1\n"), InvalidConfig);
    CHECK_THROWS_AS(Config::parse_string("[train]\nno_equals_sign\n"), InvalidConfig);
    CHECK_THROWS_AS(Config::parse_file("missing_config_file.conf"), ValidationError);

    // typed getters validate their parses
    Config bad = Config::parse_string("[train]\nlr = not_a_number\n");
    CHECK_THROWS_AS(bad.get_double("train", "lr", 0.0), InvalidConfig);
    Config badlist = Config::parse_string("[prn]\ng_layers = 3, x\n");
    CHECK_THROWS_AS(badlist.get_size_list("prn", "g_layers", {}), InvalidConfig);
}

TEST_CASE("checkpoint round trip") {
    Rng rng(31);
    Tensor a({3, 4});
    for (size_t i = 0; i < a.size(); ++i) a[i] = rng.normal();
    Tensor b({7});
    for (size_t i = 0; i < b.size(); ++i) b[i] = rng.normal() * 1e-7;
    const char* path = "ckpt_roundtrip.bin";

    save_checkpoint(path, {{"w", &a}, {"b", &b}});
    auto loaded = load_checkpoint(path);
    REQUIRE(loaded.count("w") == 1);
    REQUIRE(loaded.count("b") == 1);
    CHECK(bit_equal(loaded.at("w"), a));  // f64 is bit-exact
    CHECK(bit_equal(loaded.at("b"), b));

    // f32 narrows: close but generally not bit-identical
    save_checkpoint(path, {{"w", &a}}, true);
    auto narrow = load_checkpoint(path);
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(narrow.at("w")[i] == doctest::Approx(a[i]).epsilon(1e-6));
        CHECK(narrow.at("w")[i] == static_cast<double>(static_cast<float>(a[i])));
    }
    std::remove(path);
}

TEST_CASE("checkpoint format errors") {
    const char* path = "ckpt_bad.bin";
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOPE";
    }
    CHECK_THROWS_AS(load_checkpoint(path), ValidationError);
    {
        std::ofstream out(path, std::ios::binary);
        out << "PRN1";
        // truncated record: name length with no name
        uint64_t len = 400;
        out.write(reinterpret_cast<const char*>(&len), 8);
    }
    CHECK_THROWS_AS(load_checkpoint(path), ValidationError);
    std::remove(path);
    CHECK_THROWS_AS(load_checkpoint("missing_ckpt.bin"), ValidationError);

    // load_into: missing names and shape mismatches are errors
    Tensor t({2, 2});
    std::map<std::string, Tensor> only_other;
    only_other.emplace("other", Tensor({2, 2}));
    CHECK_THROWS_AS(load_into(only_other, {{"t", &t}}), ValidationError);
    std::map<std::string, Tensor> wrong_shape;
    wrong_shape.emplace("t", Tensor({3, 2}));
    CHECK_THROWS_AS(load_into(wrong_shape, {{"t", &t}}), ShapeMismatch);

    // extra loaded names are ignored
    std::map<std::string, Tensor> extra;
    extra.emplace("t", Tensor({2, 2}));
    extra.emplace("spare", Tensor({5}));
    CHECK_NOTHROW(load_into(extra, {{"t", &t}}));
}

TEST_CASE("dataset generation properties") {
    DataGenConfig cfg;
    cfg.num_ids = 16;
    cfg.per_id = 40;
    cfg.image_size = 56;
    cfg.seed = 7;
    Dataset d = gen_dataset(cfg);

    // ceil(10%) of 40 = 4 validation samples per identity
    CHECK(d.train.size() == 16 * 36);
    CHECK(d.val.size() == 16 * 4);
    CHECK(d.num_ids == 16);
    CHECK(d.image_size == 56);

    std::vector<size_t> train_per_id(16, 0), val_per_id(16, 0);
    for (const auto& s : d.train) {
        REQUIRE(s.label < 16);
        train_per_id[s.label]++;
        CHECK(s.image.dim(0) == 56);
        CHECK(s.image.dim(2) == 3);
    }
    for (const auto& s : d.val) {
        REQUIRE(s.label < 16);
        val_per_id[s.label]++;
    }
    for (size_t i = 0; i < 16; ++i) {
        CHECK(train_per_id[i] == 36);  // every id in both splits
        CHECK(val_per_id[i] == 4);
    }

    // pixels in [0, 1], landmarks inside the frame
    for (const auto& s : {d.train[0], d.train[99], d.val[5]}) {
        for (size_t i = 0; i < s.image.size(); ++i) {
            CHECK(s.image[i] >= 0.0);
            CHECK(s.image[i] <= 1.0);
        }
        for (const auto& p : s.landmarks.points) {
            CHECK(p.x >= 0.0);
            CHECK(p.x < 56.0);
            CHECK(p.y >= 0.0);
            CHECK(p.y < 56.0);
        }
    }
}

TEST_CASE("dataset generation is seed deterministic") {
    DataGenConfig cfg;
    cfg.num_ids = 4;
    cfg.per_id = 6;
    cfg.image_size = 28;
    cfg.seed = 99;
    Dataset a = gen_dataset(cfg);
    Dataset b = gen_dataset(cfg);
    REQUIRE(a.train.size() == b.train.size());
    for (size_t i = 0; i < a.train.size(); ++i) {
        CHECK(bit_equal(a.train[i].image, b.train[i].image));
        CHECK(a.train[i].label == b.train[i].label);
        for (size_t j = 0; j < kLandmarkCount; ++j) {
            CHECK(a.train[i].landmarks.points[j].x == b.train[i].landmarks.points[j].x);
            CHECK(a.train[i].landmarks.points[j].y == b.train[i].landmarks.points[j].y);
        }
    }

    cfg.seed = 100;
    Dataset c = gen_dataset(cfg);
    CHECK_FALSE(bit_equal(a.train[0].image, c.train[0].image));
}

TEST_CASE("dataset save and load round trip") {
    DataGenConfig cfg;
    cfg.num_ids = 3;
    cfg.per_id = 5;
    cfg.image_size = 28;
    cfg.seed = 13;
    Dataset d = gen_dataset(cfg);

    std::string dir = "dataset_roundtrip_tmp";
    save_dataset(d, dir);
    Dataset back = load_dataset(dir);
    CHECK(back.num_ids == d.num_ids);
    CHECK(back.image_size == d.image_size);
    REQUIRE(back.train.size() == d.train.size());
    REQUIRE(back.val.size() == d.val.size());
    for (size_t i = 0; i < d.train.size(); ++i) {
        CHECK(bit_equal(back.train[i].image, d.train[i].image));
        CHECK(back.train[i].label == d.train[i].label);
        for (size_t j = 0; j < kLandmarkCount; ++j) {
            CHECK(back.train[i].landmarks.points[j].x == d.train[i].landmarks.points[j].x);
            CHECK(back.train[i].landmarks.points[j].y == d.train[i].landmarks.points[j].y);
        }
    }
    std::filesystem::remove_all(dir);

    CHECK_THROWS_AS(load_dataset("missing_dataset_dir"), ValidationError);
}

TEST_CASE("datagen config validation") {
    DataGenConfig cfg;
    cfg.num_ids = 1;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    DataGenConfig tiny;
    tiny.image_size = 4;
    CHECK_THROWS_AS(tiny.validate(), ValidationError);
    DataGenConfig bright;
    bright.brightness = 0.4;
    bright.color_spread = 0.4;  // shifts could leave [0,1] without clipping
    CHECK_THROWS_AS(bright.validate(), ValidationError);
}
