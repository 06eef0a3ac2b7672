#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "deguv/config.hpp"

using namespace deguv;

namespace {

bool throws_with(const std::string& needle, const std::function<void()>& fn) {
    try {
        fn();
    } catch (const ConfigError& e) {
        return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
}

}  // namespace

TEST_CASE("an empty config file yields the defaults") {
    RunConfig cfg = RunConfig::parse("");
    CHECK(cfg.env.resolution == 64);
    CHECK(cfg.env.frame_stack == 3);
    CHECK(cfg.train.gamma == doctest::Approx(0.99f));
    CHECK(cfg.train.batch_size == 32);
    CHECK(cfg.train.masker_enabled);
    CHECK(cfg.aug.compose_all);
    CHECK(cfg.output_dir.empty());
    CHECK(cfg.canonical() == RunConfig{}.canonical());
    cfg.validate();
}

TEST_CASE("parsing handles comments, blanks and whitespace") {
    RunConfig cfg = RunConfig::parse(
        "# full-line comment\n"
        "\n"
        "  train.batch_size = 64   # trailing comment\n"
        "\ttrain.gamma=0.95\n"
        "run.tag = pilot a\n");
    CHECK(cfg.train.batch_size == 64);
    CHECK(cfg.train.gamma == doctest::Approx(0.95f));
    CHECK(cfg.tag == "pilot a");
}

TEST_CASE("unknown keys and malformed lines report the line number") {
    CHECK(throws_with("line 3", [] {
        RunConfig::parse("train.gamma = 0.9\n\nnot.a.key = 1\n");
    }));
    CHECK(throws_with("unknown config key", [] {
        RunConfig::parse("not.a.key = 1\n");
    }));
    CHECK(throws_with("line 2: expected key = value", [] {
        RunConfig::parse("train.gamma = 0.9\njust words\n");
    }));
    CHECK(throws_with("line 1", [] { RunConfig::parse("train.gamma = fast\n"); }));
    // the augmentation stream seed is derived from train.seed, never set directly
    CHECK(throws_with("unknown config key", [] { RunConfig::parse("aug.seed = 7\n"); }));
}

TEST_CASE("boolean and numeric literals are strict") {
    RunConfig cfg;
    for (const char* v : {"true", "1", "yes", "on"}) {
        cfg.set("train.actor_on_aug", v);
        CHECK(cfg.train.actor_on_aug);
    }
    for (const char* v : {"false", "0", "no", "off"}) {
        cfg.set("train.actor_on_aug", v);
        CHECK(!cfg.train.actor_on_aug);
    }
    CHECK(throws_with("invalid boolean", [&] { cfg.set("train.actor_on_aug", "maybe"); }));
    CHECK(throws_with("invalid integer", [&] { cfg.set("train.batch_size", "32x"); }));
    CHECK(throws_with("invalid integer", [&] { cfg.set("train.batch_size", ""); }));
    CHECK(throws_with("invalid number", [&] { cfg.set("train.gamma", "0.9.9"); }));
    cfg.set("train.gamma", "0.5");
    CHECK(cfg.train.gamma == doctest::Approx(0.5f));
    cfg.set("train.total_steps", "2000000000000");
    CHECK(cfg.train.total_steps == 2000000000000LL);
}

TEST_CASE("set applies single overrides and rejects unknown keys") {
    RunConfig cfg;
    cfg.set("eval.episodes", "25");
    cfg.set("ablate.masker_enabled", "false");
    CHECK(cfg.eval.episodes == 25);
    CHECK(!cfg.train.masker_enabled);
    CHECK(throws_with("unknown config key: 'train.batchsize'",
                      [&] { cfg.set("train.batchsize", "8"); }));
}

TEST_CASE("bare override keys resolve to their unique dotted form") {
    RunConfig cfg;
    cfg.set_override("seed", "42");
    cfg.set_override("total_steps", "123");
    cfg.set_override("masker_enabled", "false");
    cfg.set_override("train.gamma", "0.9");
    CHECK(cfg.train.seed == 42);
    CHECK(cfg.train.total_steps == 123);
    CHECK(!cfg.train.masker_enabled);
    CHECK(cfg.train.gamma == doctest::Approx(0.9f));
    CHECK(throws_with("unknown config key", [&] { cfg.set_override("stepz", "1"); }));
    // bare names never work in config files, only as CLI overrides
    CHECK(throws_with("unknown config key", [] { RunConfig::parse("seed = 1\n"); }));
}

TEST_CASE("validate rejects out-of-range values") {
    auto broken = [](const std::string& key, const std::string& value) {
        RunConfig cfg;
        cfg.set(key, value);
        try {
            cfg.validate();
        } catch (const ConfigError&) {
            return true;
        }
        return false;
    };
    CHECK(broken("env.resolution", "32"));
    CHECK(broken("env.frame_stack", "0"));
    CHECK(broken("env.frame_stack", "9"));
    CHECK(broken("env.horizon", "0"));
    CHECK(broken("env.move_delta", "0"));
    CHECK(broken("env.distractors", "-1"));
    CHECK(broken("aug.shift_pad", "-1"));
    CHECK(broken("aug.shift_pad", "64"));
    CHECK(broken("aug.overlay_alpha", "1.5"));
    CHECK(broken("aug.jitter_hue", "-0.1"));
    CHECK(broken("train.gamma", "1.0"));
    CHECK(broken("train.gamma", "0"));
    CHECK(broken("train.ema_rate", "1.5"));
    CHECK(broken("train.nce_temperature", "0"));
    CHECK(broken("train.batch_size", "1"));
    CHECK(broken("train.update_every", "0"));
    CHECK(broken("train.aux_every", "0"));
    CHECK(broken("train.warmup_steps", "-1"));
    CHECK(broken("train.replay_capacity", "16"));
    CHECK(broken("eval.interval", "0"));
    CHECK(broken("eval.episodes", "0"));
    CHECK(broken("eval.seeds", "0"));
    CHECK(broken("train.total_steps", "-1"));

    RunConfig both;
    both.set("train.alpha", "0");
    both.set("train.beta", "0");
    CHECK(throws_with("alpha + beta", [&] { both.validate(); }));
    both.set("train.alpha", "1");
    both.validate();
}

TEST_CASE("canonical output is sorted, complete and round-trips") {
    RunConfig cfg;
    cfg.set("train.seed", "1234");
    cfg.set("run.tag", "canon");
    cfg.set("train.gamma", "0.875");
    std::string canon = cfg.canonical();

    RunConfig back = RunConfig::parse(canon);
    CHECK(back.canonical() == canon);
    CHECK(back.train.seed == 1234);
    CHECK(back.train.gamma == doctest::Approx(0.875f));

    std::istringstream in(canon);
    std::string line, prev;
    std::set<std::string> keys;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        CHECK(line.find(" = ") != std::string::npos);
        std::string key = line.substr(0, line.find(' '));
        CHECK(prev < key);
        keys.insert(key);
        prev = key;
    }
    CHECK(int(keys.size()) == n);
    CHECK(keys.count("train.batch_size") == 1);
    CHECK(keys.count("ablate.masker_enabled") == 1);
    CHECK(keys.count("run.output_dir") == 1);
}

TEST_CASE("compat hash tracks geometry, not run-length knobs") {
    RunConfig a, b;
    CHECK(a.compat_hash() == b.compat_hash());

    b.set("train.total_steps", "5");
    b.set("train.seed", "99");
    b.set("eval.episodes", "2");
    b.set("run.tag", "other");
    CHECK(a.compat_hash() == b.compat_hash());

    RunConfig c;
    c.set("env.frame_stack", "4");
    CHECK(a.compat_hash() != c.compat_hash());

    RunConfig d;
    d.set("masker.per_frame", "true");
    CHECK(a.compat_hash() != d.compat_hash());

    RunConfig e;
    e.set("env.distractors", "5");
    CHECK(a.compat_hash() != e.compat_hash());
}

TEST_CASE("ablation tags name the disabled pieces") {
    RunConfig cfg;
    CHECK(cfg.ablation_tags().empty());
    cfg.set("ablate.masker_enabled", "false");
    auto tags = cfg.ablation_tags();
    REQUIRE(tags.size() == 1);
    CHECK(tags[0] == "ablation:no-masker");
    cfg.set("ablate.auxiliary_enabled", "false");
    cfg.set("ablate.augmented_branch_enabled", "false");
    tags = cfg.ablation_tags();
    REQUIRE(tags.size() == 3);
    CHECK(tags[1] == "ablation:no-auxiliary");
    CHECK(tags[2] == "ablation:no-aug-branch");
}

TEST_CASE("load reads a file and reports unreadable paths") {
    const char* path = "/tmp/deguv_cfg_test.cfg";
    {
        std::ofstream f(path);
        f << "train.batch_size = 16\ntrain.warmup_steps = 50\n";
    }
    RunConfig cfg = RunConfig::load(path);
    CHECK(cfg.train.batch_size == 16);
    CHECK(cfg.train.warmup_steps == 50);
    std::remove(path);
    CHECK(throws_with("cannot read config file",
                      [] { RunConfig::load("/tmp/deguv_no_such_file.cfg"); }));
}
