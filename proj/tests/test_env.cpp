#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "deguv/env.hpp"

using namespace deguv;

namespace {

float run_oracle_episode(MiniManipEnv& env, std::uint64_t seed, Mode mode) {
    env.reset(seed, mode);
    float ret = 0.0f;
    while (!env.done()) ret += env.step(env.oracle()).reward;
    return ret;
}

}  // namespace

TEST_CASE("reset is deterministic per (seed, mode)") {
    MiniManipEnv a, b;
    Observation oa = a.reset(7, Mode::Train);
    Observation ob = b.reset(7, Mode::Train);
    CHECK(oa.rgb == ob.rgb);
    CHECK(oa.depth == ob.depth);

    Observation oc = b.reset(8, Mode::Train);
    CHECK(oa.rgb != oc.rgb);
}

TEST_CASE("depth is identical across modes, rgb is not") {
    MiniManipEnv a, b;
    Observation oa = a.reset(7, Mode::Train);
    Observation ob = b.reset(7, Mode::Hard);
    CHECK(oa.depth == ob.depth);
    CHECK(oa.rgb != ob.rgb);

    for (Mode m : kAllModes) {
        MiniManipEnv e;
        Observation o = e.reset(7, m);
        CHECK(o.depth == oa.depth);
    }
}

TEST_CASE("render depth is a pure function of state") {
    MiniManipEnv a, b;
    a.reset(11, Mode::Easy);
    b.reset(11, Mode::Medium);
    std::vector<std::uint8_t> rgb_a, rgb_b;
    std::vector<float> dep_a, dep_b;
    a.current_frames(rgb_a, dep_a);
    b.current_frames(rgb_b, dep_b);
    CHECK(dep_a == dep_b);
}

TEST_CASE("depth carries layer codes only") {
    EnvParams p;
    p.n_distractors = 0;
    MiniManipEnv env(p);
    Observation o = env.reset(3, Mode::Train);
    bool ok = true;
    for (float v : o.depth) ok = ok && (v == 0.0f || v == 0.8f || v == 1.0f);
    CHECK(ok);
    CHECK(std::count(o.depth.begin(), o.depth.end(), 1.0f) > 0);
    CHECK(std::count(o.depth.begin(), o.depth.end(), 0.8f) > 0);

    MiniManipEnv full;
    Observation od = full.reset(3, Mode::Train);
    bool ok2 = true;
    for (float v : od.depth) ok2 = ok2 && (v == 0.0f || v == 0.4f || v == 0.8f || v == 1.0f);
    CHECK(ok2);
}

TEST_CASE("zero action far from cube gives small reach reward") {
    MiniManipEnv env;
    env.reset(5, Mode::Train);
    StepResult r = env.step({0.0f, 0.0f, -1.0f});
    CHECK(r.reward >= 0.0f);
    CHECK(r.reward <= 0.01f);
    CHECK_FALSE(r.done);
}

TEST_CASE("grip action near cube attaches, attachment persists") {
    MiniManipEnv env;
    env.reset(5, Mode::Train);
    while (!env.state().held && !env.done()) {
        auto st = env.state();
        float dx = st.cube[0] - st.gripper[0], dy = st.cube[1] - st.gripper[1];
        auto clamp1 = [](float v) { return std::min(std::max(v, -1.0f), 1.0f); };
        env.step({clamp1(dx / env.params().move_delta), clamp1(dy / env.params().move_delta),
                  1.0f});
    }
    REQUIRE(env.state().held);
    CHECK(env.state().gripper == env.state().cube);
    env.step({0.3f, -0.2f, -1.0f});
    CHECK(env.state().held);
    CHECK(env.state().gripper == env.state().cube);
}

TEST_CASE("per-step reward bounds and clamping hold under random actions") {
    MiniManipEnv env;
    env.reset(21, Mode::Medium);
    Rng rng(77);
    while (!env.done()) {
        StepResult r = env.step({float(rng.uniform(-1.3, 1.3)), float(rng.uniform(-1.3, 1.3)),
                                 float(rng.uniform(-1.0, 1.0))});
        CHECK(r.reward >= 0.0f);
        CHECK(r.reward <= 0.06f);
        const auto& st = env.state();
        for (float v : {st.gripper[0], st.gripper[1], st.cube[0], st.cube[1]}) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
    }
    CHECK(env.state().step_count == env.params().horizon);
}

TEST_CASE("step after done raises a protocol error") {
    EnvParams p;
    p.horizon = 3;
    MiniManipEnv env(p);
    env.reset(1, Mode::Train);
    for (int i = 0; i < 3; ++i) env.step({0, 0, 0});
    CHECK(env.done());
    CHECK_THROWS_AS(env.step({0, 0, 0}), ProtocolError);
    MiniManipEnv fresh;
    CHECK_THROWS_AS(fresh.step({0, 0, 0}), ProtocolError);
}

TEST_CASE("unknown mode name raises a configuration error") {
    CHECK(mode_from_string("hard") == Mode::Hard);
    CHECK_THROWS_AS(mode_from_string("extreme"), ConfigError);
    CHECK_THROWS_AS(mode_from_string(""), ConfigError);
}

TEST_CASE("trajectories are determined by (seed, mode, actions)") {
    MiniManipEnv a, b;
    a.reset(99, Mode::Hard);
    b.reset(99, Mode::Hard);
    Rng rng(5);
    for (int i = 0; i < 40; ++i) {
        std::array<float, 3> act{float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)),
                                 float(rng.uniform(-1, 1))};
        StepResult ra = a.step(act);
        StepResult rb = b.step(act);
        CHECK(ra.reward == rb.reward);
        CHECK(ra.obs.rgb == rb.obs.rgb);
        CHECK(ra.obs.depth == rb.obs.depth);
    }
}

TEST_CASE("frame stack holds k copies at reset and shifts on step") {
    MiniManipEnv env;
    Observation o = env.reset(13, Mode::Train);
    REQUIRE(o.k == 3);
    std::size_t fr = std::size_t(o.frame_rgb_size());
    CHECK(std::equal(o.rgb.begin(), o.rgb.begin() + fr, o.rgb.begin() + fr));
    CHECK(std::equal(o.rgb.begin(), o.rgb.begin() + fr, o.rgb.begin() + 2 * fr));

    StepResult r = env.step({1.0f, 1.0f, -1.0f});
    const auto& o2 = r.obs.rgb;
    CHECK(std::equal(o2.begin(), o2.begin() + fr, o.rgb.begin()));
    CHECK_FALSE(std::equal(o2.begin() + 2 * fr, o2.end(), o.rgb.begin() + 2 * fr, o.rgb.end()));
}

TEST_CASE("oracle moves toward the cube and holds inside the zone") {
    MiniManipEnv env;
    env.reset(31, Mode::Train);
    EnvState st = env.state();
    st.held = false;
    st.gripper = {st.cube[0] - 0.3f, st.cube[1]};
    auto a = oracle_action(st, env.params());
    CHECK(a[0] > 0.0f);

    st.held = true;
    st.gripper = {env.params().zone_x, env.params().zone_y};
    st.cube = st.gripper;
    auto b = oracle_action(st, env.params());
    CHECK(std::fabs(b[0]) < 0.05f);
    CHECK(std::fabs(b[1]) < 0.05f);
}

TEST_CASE("oracle return stays inside the pinned band") {
    MiniManipEnv env;
    float lo = 1e9f, hi = -1e9f, sum = 0.0f;
    const int n = 100;
    for (int i = 0; i < n; ++i) {
        float ret = run_oracle_episode(env, 1000 + std::uint64_t(i), Mode::Train);
        lo = std::min(lo, ret);
        hi = std::max(hi, ret);
        sum += ret;
    }
    float mean = sum / n;
    MESSAGE("oracle return min=" << lo << " max=" << hi << " mean=" << mean);
    CHECK(lo >= kOracleReturnLo);
    CHECK(hi <= kOracleReturnHi);
    CHECK(mean >= 0.8f * hi);
    CHECK(mean == doctest::Approx(kOracleReturnMean).epsilon(0.03));
}

TEST_CASE("relevance mask marks gripper and cube pixels") {
    MiniManipEnv env;
    Observation o = env.reset(17, Mode::Train);
    auto mask = env.relevance_mask();
    const float* last = o.depth.data() + 2 * o.frame_depth_size();
    for (std::size_t i = 0; i < mask.size(); ++i) {
        CHECK(mask[i] == (last[i] >= 0.6f ? 1 : 0));
    }
}
