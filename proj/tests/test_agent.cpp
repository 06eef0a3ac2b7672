#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "deguv/agent.hpp"

using namespace deguv;

namespace {

RunConfig small_cfg(std::uint64_t seed) {
    RunConfig cfg;
    cfg.train.seed = seed;
    cfg.train.batch_size = 8;
    cfg.train.warmup_steps = 40;
    cfg.train.total_steps = 0;
    cfg.env.horizon = 20;
    cfg.eval.interval = 1 << 20;
    return cfg;
}

// replay filled with jittered-expert episodes from the real environment
ReplayBuffer make_replay(const EnvParams& p, int episodes, std::uint64_t seed) {
    MiniManipEnv env(p);
    ReplayBuffer rb(4096, p.frame_stack, p.resolution, p.resolution);
    Rng rng(seed);
    for (int e = 0; e < episodes; ++e) {
        Observation obs = env.reset(seed * 977 + std::uint64_t(e), Mode::Train);
        bool done = false;
        while (!done) {
            std::array<float, 3> a = env.oracle();
            for (float& x : a) x = std::clamp(x + float(rng.uniform(-0.4, 0.4)), -1.0f, 1.0f);
            StepResult sr = env.step(a);
            rb.add(newest_rgb(obs), newest_depth(obs), a, sr.reward, sr.done);
            done = sr.done;
            if (done)
                rb.end_episode(newest_rgb(sr.obs), newest_depth(sr.obs));
            else
                obs = std::move(sr.obs);
        }
    }
    return rb;
}

std::vector<std::vector<float>> snapshot(const std::vector<Param*>& ps) {
    std::vector<std::vector<float>> out;
    out.reserve(ps.size());
    for (const Param* p : ps) out.push_back(p->value.vec());
    return out;
}

bool unchanged(const std::vector<Param*>& ps, const std::vector<std::vector<float>>& snap) {
    if (ps.size() != snap.size()) return false;
    for (std::size_t i = 0; i < ps.size(); ++i)
        if (!(ps[i]->value.vec() == snap[i])) return false;
    return true;
}

bool grads_zero(const std::vector<Param*>& ps) {
    for (const Param* p : ps)
        for (float g : p->grad.vec())
            if (g != 0.0f) return false;
    return true;
}

std::vector<float> rand_vec(int n, Rng& rng) {
    std::vector<float> v(std::size_t(n), 0.0f);
    for (float& x : v) x = float(rng.uniform(-1.0, 1.0));
    return v;
}

}  // namespace

TEST_CASE("cosine similarity basics") {
    std::vector<float> a = {0.3f, -1.2f, 2.0f, 0.5f};
    CHECK(cosine_similarity(a.data(), a.data(), 4) == doctest::Approx(1.0).epsilon(1e-6));

    std::vector<float> x = {1.0f, 0.0f}, y = {0.0f, 1.0f};
    CHECK(cosine_similarity(x.data(), y.data(), 2) == doctest::Approx(0.0));

    std::vector<float> q = {1.0f, 1.0f}, k = {1.0f, 0.0f};
    CHECK(cosine_similarity(q.data(), k.data(), 2) ==
          doctest::Approx(0.70710678).epsilon(1e-6));

    std::vector<float> zero = {0.0f, 0.0f};
    const double s = cosine_similarity(zero.data(), k.data(), 2);
    CHECK(std::isfinite(s));
    CHECK(s == doctest::Approx(0.0));
}

TEST_CASE("contrastive loss pinned values") {
    // every key equal to the query: softmax is uniform over M+1 entries
    std::vector<float> q = {0.4f, -0.9f, 1.3f};
    for (int m : {1, 7}) {
        std::vector<std::vector<float>> negs(std::size_t(m), q);
        const double loss = infonce_loss(q, q, negs, 0.37f);
        CHECK(loss == doctest::Approx(std::log(double(m + 1))).epsilon(1e-6));
    }
    // opposite negative at unit temperature
    std::vector<float> qp = {1.0f, 0.0f};
    std::vector<std::vector<float>> opp = {{-1.0f, 0.0f}};
    const double loss = infonce_loss(qp, qp, opp, 1.0f);
    CHECK(loss == doctest::Approx(std::log(1.0 + std::exp(-2.0))).epsilon(1e-6));
    CHECK(loss == doctest::Approx(0.126928).epsilon(1e-4));

    CHECK_THROWS_AS(infonce_loss(qp, qp, opp, 0.0f), ConfigError);
    CHECK_THROWS_AS(infonce_loss(qp, qp, opp, -0.5f), ConfigError);
    std::vector<std::vector<float>> none;
    CHECK_THROWS_AS(infonce_loss(qp, qp, none, 1.0f), ConfigError);
}

TEST_CASE("contrastive loss gradient matches finite differences") {
    Rng rng(42);
    for (int rep = 0; rep < 4; ++rep) {
        const int n = 16;
        const float tau = rep % 2 == 0 ? 0.1f : 1.0f;
        std::vector<float> q = rand_vec(n, rng);
        std::vector<float> kp = rand_vec(n, rng);
        std::vector<std::vector<float>> kn;
        for (int j = 0; j < 5; ++j) kn.push_back(rand_vec(n, rng));

        std::vector<float> grad;
        infonce_loss(q, kp, kn, tau, &grad);

        auto f = [&]() { return infonce_loss(q, kp, kn, tau); };
        std::vector<double> fd = numerical_grad(f, q.data(), n, 1e-4);
        for (int i = 0; i < n; ++i) {
            const double tol = 1e-4 * std::max(1e-3, std::abs(fd[std::size_t(i)]));
            CHECK(std::abs(double(grad[std::size_t(i)]) - fd[std::size_t(i)]) <= tol);
        }
    }
}

TEST_CASE("soft residual arithmetic") {
    CHECK(bellman_residual(1.0f, 1.0f, 0.0f, 2.0f, 0.99f) == doctest::Approx(1.98).epsilon(1e-6));
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        const float q = float(rng.uniform(-3.0, 3.0));
        const float r = float(rng.uniform(-1.0, 1.0));
        const float tv = float(rng.uniform(-3.0, 3.0));
        // zero discount ignores the bootstrap entirely
        CHECK(bellman_residual(q, r, 0.0f, tv, 0.0f) == doctest::Approx(r - q));
        // terminal transitions carry no bootstrap either
        CHECK(bellman_residual(q, r, 1.0f, tv, 0.99f) == doctest::Approx(r - q));
        const float g = float(rng.uniform(0.1, 0.99));
        CHECK(bellman_residual(q, r, 0.0f, tv, g) ==
              doctest::Approx(double(r) + double(g) * double(tv) - double(q)).epsilon(1e-6));
    }
}

TEST_CASE("prepared batches compute masks once, from depth alone") {
    RunConfig cfg = small_cfg(11);
    DeGuVAgent agent(cfg);
    ReplayBuffer rb = make_replay(cfg.env, 2, 31);
    Rng srng(9);
    ReplayBatch batch = rb.sample(6, srng);

    DeGuVAgent::Prepared p = agent.prepare(batch);
    CHECK(p.mask.vec() == agent.masker().forward(batch.depth).vec());
    CHECK(p.mask_next.vec() == agent.masker().forward(batch.next_depth).vec());

    // scrambling RGB cannot move the masks
    ReplayBatch scrambled = batch;
    Rng noise(77);
    for (auto& x : scrambled.rgb.vec()) x = float(noise.uniform(0.0, 255.0));
    for (auto& x : scrambled.next_rgb.vec()) x = float(noise.uniform(0.0, 255.0));
    DeGuVAgent::Prepared ps = agent.prepare(scrambled);
    CHECK(ps.mask.vec() == p.mask.vec());
    CHECK(ps.mask_next.vec() == p.mask_next.vec());

    // raw branch, augmented branch and contrastive positives share the
    // masked source: the augmented twin is a pure function of it
    CHECK(p.masked.vec() == apply_mask(batch.rgb, p.mask).vec());
    DeGuVAgent::Prepared p2 = agent.prepare(batch);
    CHECK(p2.masked_aug.vec() == p.masked_aug.vec());
}

TEST_CASE("actor step leaves encoder, masker and critic untouched") {
    RunConfig cfg = small_cfg(21);
    DeGuVAgent agent(cfg);
    ReplayBuffer rb = make_replay(cfg.env, 2, 22);
    Rng srng(3);
    DeGuVAgent::Prepared p = agent.prepare(rb.sample(8, srng));

    auto enc_snap = snapshot(agent.encoder().params());
    auto msk_snap = snapshot(agent.masker().params());
    auto cri_snap = snapshot(agent.critic().params());
    auto act_snap = snapshot(agent.actor().params());

    const float loss = agent.actor_update(p);
    CHECK(std::isfinite(loss));
    CHECK(unchanged(agent.encoder().params(), enc_snap));
    CHECK(unchanged(agent.masker().params(), msk_snap));
    CHECK(unchanged(agent.critic().params(), cri_snap));
    CHECK_FALSE(unchanged(agent.actor().params(), act_snap));

    CHECK(grads_zero(agent.encoder().params()));
    CHECK(grads_zero(agent.masker().params()));
    CHECK(grads_zero(agent.critic().params()));
    CHECK(grads_zero(agent.actor().params()));

    // policy entropy starts far above the target, so the coefficient shrinks
    CHECK(agent.entropy_coef() < cfg.train.init_entropy_coef);
}

TEST_CASE("actor loss reduces to the negated minimum Q as the coefficient vanishes") {
    RunConfig cfg = small_cfg(23);
    cfg.train.actor_on_aug = false;
    cfg.train.init_entropy_coef = 1e-12f;
    DeGuVAgent agent(cfg);
    ReplayBuffer rb = make_replay(cfg.env, 2, 24);
    Rng srng(6);
    DeGuVAgent::Prepared p = agent.prepare(rb.sample(8, srng));

    Rng noise = p.noise;  // replay the same policy draws
    Tensor z = agent.encoder().forward(p.masked);
    Tensor a = agent.actor().sample(z, &noise);
    auto [q1, q2] = agent.critic().forward(z, a);
    double want = 0.0;
    for (int b = 0; b < p.B; ++b) want -= double(std::min(q1[b], q2[b]));
    want /= p.B;

    const float loss = agent.actor_update(p);
    CHECK(loss == doctest::Approx(want).epsilon(1e-5));
}

TEST_CASE("zero learning rates freeze the actor") {
    RunConfig cfg = small_cfg(25);
    cfg.train.actor_lr = 0.0f;
    cfg.train.entropy_lr = 0.0f;
    DeGuVAgent agent(cfg);
    ReplayBuffer rb = make_replay(cfg.env, 2, 26);
    Rng srng(4);
    DeGuVAgent::Prepared p = agent.prepare(rb.sample(8, srng));

    auto act_snap = snapshot(agent.actor().params());
    const float coef = agent.entropy_coef();
    agent.actor_update(p);
    CHECK(unchanged(agent.actor().params(), act_snap));
    CHECK(agent.entropy_coef() == coef);
}

TEST_CASE("critic loss with zero augmented weight is the plain twin-head objective") {
    RunConfig cfg = small_cfg(31);
    cfg.train.alpha = 1.0f;
    cfg.train.beta = 0.0f;
    DeGuVAgent agent(cfg);
    ReplayBuffer rb = make_replay(cfg.env, 2, 32);
    Rng srng(8);
    DeGuVAgent::Prepared p = agent.prepare(rb.sample(8, srng));

    // independent assembly of the masked-raw objective, same target draws
    Rng noise = p.noise;
    Tensor z_next = agent.encoder_target().forward(p.masked_next);
    Tensor logp_next;
    Tensor a_next = agent.actor().sample(z_next, &noise, &logp_next);
    auto [q1t, q2t] = agent.critic_target().forward(z_next, a_next);
    Tensor z = agent.encoder().forward(p.masked);
    auto [q1, q2] = agent.critic().forward(z, p.batch.action);
    const float coef = agent.entropy_coef();
    double want = 0.0;
    for (int b = 0; b < p.B; ++b) {
        const float tv = std::min(q1t[b], q2t[b]) - coef * logp_next[b];
        const float r1 =
            bellman_residual(q1[b], p.batch.reward[b], p.batch.done[b], tv, cfg.train.gamma);
        const float r2 =
            bellman_residual(q2[b], p.batch.reward[b], p.batch.done[b], tv, cfg.train.gamma);
        want += double(r1) * r1 + double(r2) * r2;
    }
    want /= p.B;

    const float loss = agent.critic_update(p);
    CHECK(loss == doctest::Approx(want).epsilon(1e-6));
}

TEST_CASE("zero-strength augmentation makes both residual branches coincide") {
    auto zero_aug = [](RunConfig cfg) {
        cfg.aug.shift_pad = 0;
        cfg.aug.overlay_alpha = 0.0f;
        cfg.aug.jitter_contrast = 0.0f;
        cfg.aug.jitter_hue = 0.0f;
        return cfg;
    };
    RunConfig cfg_both = zero_aug(small_cfg(33));
    cfg_both.train.alpha = 0.5f;
    cfg_both.train.beta = 0.5f;
    RunConfig cfg_raw = zero_aug(small_cfg(33));
    cfg_raw.train.alpha = 1.0f;
    cfg_raw.train.beta = 0.0f;

    DeGuVAgent a_both(cfg_both);
    DeGuVAgent a_raw(cfg_raw);
    ReplayBuffer rb = make_replay(cfg_both.env, 2, 34);
    std::vector<std::int64_t> idx = {0, 3, 7, 11, 19, 23};
    DeGuVAgent::Prepared p_both = a_both.prepare(rb.sample_at(idx));
    DeGuVAgent::Prepared p_raw = a_raw.prepare(rb.sample_at(idx));

    CHECK(p_both.masked_aug.vec() == p_both.masked.vec());
    const float l_both = a_both.critic_update(p_both);
    const float l_raw = a_raw.critic_update(p_raw);
    CHECK(l_both == doctest::Approx(l_raw).epsilon(1e-6));
}

TEST_CASE("critic step never moves or differentiates the targets") {
    RunConfig cfg = small_cfg(35);
    DeGuVAgent agent(cfg);
    ReplayBuffer rb = make_replay(cfg.env, 2, 36);
    Rng srng(12);
    DeGuVAgent::Prepared p = agent.prepare(rb.sample(8, srng));

    auto tgt_enc = snapshot(agent.encoder_target().params());
    auto tgt_cri = snapshot(agent.critic_target().params());
    auto act_snap = snapshot(agent.actor().params());
    auto onl_enc = snapshot(agent.encoder().params());
    auto onl_msk = snapshot(agent.masker().params());
    auto onl_cri = snapshot(agent.critic().params());

    const float loss = agent.critic_update(p);
    CHECK(std::isfinite(loss));
    CHECK(unchanged(agent.encoder_target().params(), tgt_enc));
    CHECK(unchanged(agent.critic_target().params(), tgt_cri));
    CHECK(grads_zero(agent.encoder_target().params()));
    CHECK(grads_zero(agent.critic_target().params()));
    CHECK(unchanged(agent.actor().params(), act_snap));
    CHECK(grads_zero(agent.actor().params()));

    // the joint group did move: critic, encoder and masker all take the step
    CHECK_FALSE(unchanged(agent.encoder().params(), onl_enc));
    CHECK_FALSE(unchanged(agent.masker().params(), onl_msk));
    CHECK_FALSE(unchanged(agent.critic().params(), onl_cri));
    CHECK(grads_zero(agent.critic_group()));
}

TEST_CASE("auxiliary step updates the encoder and nothing else") {
    RunConfig cfg = small_cfg(41);
    DeGuVAgent agent(cfg);
    ReplayBuffer rb = make_replay(cfg.env, 2, 42);
    Rng srng(14);
    DeGuVAgent::Prepared p = agent.prepare(rb.sample(8, srng));

    auto msk_snap = snapshot(agent.masker().params());
    auto act_snap = snapshot(agent.actor().params());
    auto cri_snap = snapshot(agent.critic().params());
    auto tgt_snap = snapshot(agent.encoder_target().params());
    auto enc_snap = snapshot(agent.encoder().params());

    const float loss = agent.auxiliary_update(p);
    CHECK(std::isfinite(loss));
    CHECK(loss >= 0.0f);
    CHECK(unchanged(agent.masker().params(), msk_snap));
    CHECK(unchanged(agent.actor().params(), act_snap));
    CHECK(unchanged(agent.critic().params(), cri_snap));
    CHECK(unchanged(agent.encoder_target().params(), tgt_snap));
    CHECK_FALSE(unchanged(agent.encoder().params(), enc_snap));
    CHECK(grads_zero(agent.masker().params()));
    CHECK(grads_zero(agent.actor().params()));
    CHECK(grads_zero(agent.critic().params()));
    CHECK(grads_zero(agent.encoder().params()));
}

TEST_CASE("auxiliary update requires in-batch negatives") {
    RunConfig cfg = small_cfg(43);
    DeGuVAgent agent(cfg);
    ReplayBuffer rb = make_replay(cfg.env, 1, 44);
    DeGuVAgent::Prepared p = agent.prepare(rb.sample_at({2}));
    CHECK_THROWS_AS(agent.auxiliary_update(p), ConfigError);
}

TEST_CASE("identical rows under identity augmentation give the uniform-softmax loss") {
    RunConfig cfg = small_cfg(45);
    cfg.aug.shift_pad = 0;
    cfg.aug.overlay_alpha = 0.0f;
    cfg.aug.jitter_contrast = 0.0f;
    cfg.aug.jitter_hue = 0.0f;
    DeGuVAgent agent(cfg);

    // one episode of identical frames: every stack and next-stack coincide
    const int hw = cfg.env.resolution * cfg.env.resolution;
    std::vector<std::uint8_t> rgb(std::size_t(hw) * 3, 0);
    std::vector<float> depth(std::size_t(hw), 0.0f);
    Rng rng(46);
    for (auto& x : rgb) x = std::uint8_t(rng.uniform_int(0, 255));
    for (auto& x : depth) x = float(rng.uniform(0.0, 1.0));
    ReplayBuffer rb(64, cfg.env.frame_stack, cfg.env.resolution, cfg.env.resolution);
    for (int t = 0; t < 5; ++t) rb.add(rgb.data(), depth.data(), {0, 0, 0}, 0.0f, false);
    rb.end_episode(rgb.data(), depth.data());

    for (int B : {2, 4}) {
        std::vector<std::int64_t> idx(std::size_t(B), 1);
        DeGuVAgent::Prepared p = agent.prepare(rb.sample_at(idx));
        DeGuVAgent probe(cfg);  // fresh nets, target still equal to online
        const float loss = probe.auxiliary_update(p);
        CHECK(loss == doctest::Approx(std::log(double(B))).epsilon(1e-6));
    }
}

TEST_CASE("auxiliary steps pull positives closer than negatives") {
    RunConfig cfg = small_cfg(47);
    cfg.train.aux_lr = 3e-4f;
    DeGuVAgent agent(cfg);
    ReplayBuffer rb = make_replay(cfg.env, 2, 48);
    Rng srng(16);
    DeGuVAgent::Prepared p = agent.prepare(rb.sample(8, srng));

    auto separation = [&]() {
        Tensor q = agent.encoder().forward(p.masked);
        Tensor kpos = agent.encoder().forward(p.masked_aug);
        Tensor kneg = agent.encoder_target().forward(p.masked_next);
        double pos = 0.0, neg = 0.0;
        for (int b = 0; b < p.B; ++b) {
            const float* qb = q.data() + std::int64_t(b) * kLatentDim;
            pos += cosine_similarity(qb, kpos.data() + std::int64_t(b) * kLatentDim, kLatentDim);
            for (int j = 0; j < p.B; ++j) {
                if (j == b) continue;
                neg +=
                    cosine_similarity(qb, kneg.data() + std::int64_t(j) * kLatentDim, kLatentDim);
            }
        }
        return pos / p.B - neg / (double(p.B) * (p.B - 1));
    };

    std::vector<double> sep = {separation()};
    for (int i = 0; i < 50; ++i) {
        agent.auxiliary_update(p);
        sep.push_back(separation());
    }
    for (std::size_t i = 0; i + 1 < sep.size(); ++i) CHECK(sep[i + 1] > sep[i] - 1e-5);
    CHECK(sep.back() > sep.front() + 0.01);
}

TEST_CASE("full update with zero learning rates moves only the targets") {
    RunConfig cfg = small_cfg(51);
    cfg.train.actor_lr = 0.0f;
    cfg.train.critic_lr = 0.0f;
    cfg.train.aux_lr = 0.0f;
    cfg.train.entropy_lr = 0.0f;
    DeGuVAgent agent(cfg);
    ReplayBuffer rb = make_replay(cfg.env, 2, 52);

    // push one target weight off its online twin so the EMA pull is visible
    Param* tweaked = agent.critic_target().params()[0];
    const float online0 = agent.critic().params()[0]->value[0];
    tweaked->value[0] = online0 + 0.5f;

    std::vector<Param*> online = agent.critic_group();
    for (Param* q : agent.actor().params()) online.push_back(q);
    online.push_back(&agent.entropy_param());
    auto snap = snapshot(online);

    UpdateMetrics m = agent.update_step(rb);
    CHECK(unchanged(online, snap));
    const float expected = online0 + (1.0f - cfg.train.ema_rate) * 0.5f;
    CHECK(tweaked->value[0] == doctest::Approx(expected).epsilon(1e-6));
    CHECK(std::isfinite(m.actor_loss));
    CHECK(std::isfinite(m.critic_loss));
    CHECK(std::isfinite(m.aux_loss));
    CHECK(m.aux_ran);
}

TEST_CASE("disabling the masker forces a unit mask and skips its update") {
    RunConfig cfg = small_cfg(53);
    cfg.train.masker_enabled = false;
    DeGuVAgent agent(cfg);
    ReplayBuffer rb = make_replay(cfg.env, 2, 54);
    Rng srng(18);
    ReplayBatch batch = rb.sample(8, srng);
    DeGuVAgent::Prepared p = agent.prepare(batch);

    for (float v : p.mask.vec()) CHECK(v == 1.0f);
    CHECK(p.masked.vec() == batch.rgb.vec());
    CHECK(p.masked_next.vec() == batch.next_rgb.vec());
    CHECK(p.stats.reveal_mean == 1.0f);

    auto msk_snap = snapshot(agent.masker().params());
    UpdateMetrics m = agent.update_step(rb);
    CHECK(unchanged(agent.masker().params(), msk_snap));
    CHECK(m.reveal_mean == 1.0f);
}

TEST_CASE("disabling the augmented branch keeps the raw objective and the contrastive step") {
    RunConfig cfg = small_cfg(55);
    cfg.train.augmented_branch_enabled = false;
    cfg.train.alpha = 1.0f;
    DeGuVAgent agent(cfg);
    ReplayBuffer rb = make_replay(cfg.env, 2, 56);
    UpdateMetrics m = agent.update_step(rb);
    CHECK(std::isfinite(m.critic_loss));
    CHECK(m.aux_ran);
    CHECK(m.aux_loss > 0.0f);
}

TEST_CASE("auxiliary cadence follows its configured period") {
    RunConfig cfg = small_cfg(57);
    cfg.train.aux_every = 2;
    DeGuVAgent agent(cfg);
    ReplayBuffer rb = make_replay(cfg.env, 2, 58);
    CHECK(agent.update_step(rb).aux_ran);
    CHECK_FALSE(agent.update_step(rb).aux_ran);
    CHECK(agent.update_step(rb).aux_ran);

    RunConfig off = small_cfg(57);
    off.train.auxiliary_enabled = false;
    DeGuVAgent agent_off(off);
    CHECK_FALSE(agent_off.update_step(rb).aux_ran);
}

TEST_CASE("updates refuse a replay with fewer transitions than one batch") {
    RunConfig cfg = small_cfg(61);
    DeGuVAgent agent(cfg);
    ReplayBuffer rb(64, cfg.env.frame_stack, cfg.env.resolution, cfg.env.resolution);
    MiniManipEnv env(cfg.env);
    Observation obs = env.reset(1, Mode::Train);
    for (int t = 0; t < 4; ++t) {
        StepResult sr = env.step({0.1f, 0.0f, 0.0f});
        rb.add(newest_rgb(obs), newest_depth(obs), {0.1f, 0.0f, 0.0f}, sr.reward, sr.done);
        obs = std::move(sr.obs);
    }
    CHECK(rb.transitions() < cfg.train.batch_size);
    CHECK_THROWS_AS(agent.update_step(rb), ProtocolError);
}

TEST_CASE("acting is deterministic in eval mode and bounded always") {
    RunConfig cfg = small_cfg(63);
    DeGuVAgent agent(cfg);
    MiniManipEnv env(cfg.env);
    Observation obs = env.reset(5, Mode::Train);

    auto a1 = agent.act(obs, nullptr);
    auto a2 = agent.act(obs, nullptr);
    CHECK(a1 == a2);
    for (int i = 0; i < 8; ++i) {
        Rng rng = Rng::stream(99, "explore", std::uint64_t(i));
        auto a = agent.act(obs, &rng);
        for (float x : a) {
            CHECK(x > -1.0f);
            CHECK(x < 1.0f);
        }
        Rng rng_again = Rng::stream(99, "explore", std::uint64_t(i));
        CHECK(agent.act(obs, &rng_again) == a);
    }
}

TEST_CASE("actions depend on RGB only through the revealed region") {
    RunConfig cfg = small_cfg(65);
    DeGuVAgent agent(cfg);
    MiniManipEnv env(cfg.env);
    Observation obs = env.reset(7, Mode::Train);
    Observation scrambled = obs;
    Rng noise(66);
    for (auto& b : scrambled.rgb) b = std::uint8_t(noise.uniform_int(0, 255));

    // a saturated-closed mask hides every pixel: RGB cannot matter
    Param* bias = agent.masker().params().back();
    REQUIRE(bias->name == "masker.conv3.b");
    const std::vector<float> keep = bias->value.vec();
    bias->value.fill(-100.0f);
    CHECK(agent.act(obs, nullptr) == agent.act(scrambled, nullptr));

    // a saturated-open mask reveals every pixel: RGB changes reach the policy
    bias->value.fill(100.0f);
    CHECK(agent.act(obs, nullptr) != agent.act(scrambled, nullptr));
    bias->value.vec() = keep;
}

TEST_CASE("one update is reproducible across identically seeded agents") {
    RunConfig cfg = small_cfg(67);
    ReplayBuffer rb = make_replay(cfg.env, 2, 68);
    DeGuVAgent a(cfg), b(cfg);
    UpdateMetrics ma = a.update_step(rb);
    UpdateMetrics mb = b.update_step(rb);
    CHECK(ma.actor_loss == mb.actor_loss);
    CHECK(ma.critic_loss == mb.critic_loss);
    CHECK(ma.aux_loss == mb.aux_loss);
    CHECK(ma.mean_q == mb.mean_q);
    auto pa = snapshot(a.critic_group());
    CHECK(unchanged(b.critic_group(), pa));
    auto aa = snapshot(a.actor().params());
    CHECK(unchanged(b.actor().params(), aa));
}

TEST_CASE("training for zero steps returns an initialized agent and no history") {
    RunConfig cfg = small_cfg(71);
    cfg.train.total_steps = 0;
    cfg.train.warmup_steps = 25;
    MiniManipEnv env(cfg.env);
    DeGuVAgent agent(cfg);
    TrainResult r = train(env, agent, cfg);
    CHECK(r.history.empty());
    CHECK(r.cursor.step == 0);
    CHECK_FALSE(r.interrupted);
    CHECK(agent.update_count() == 0);
    Observation obs = env.reset(3, Mode::Train);
    auto a = agent.act(obs, nullptr);
    for (float x : a) CHECK(std::abs(x) < 1.0f);
}

TEST_CASE("same-seed training runs produce identical metrics") {
    RunConfig cfg = small_cfg(73);
    cfg.train.total_steps = 60;
    cfg.train.warmup_steps = 40;
    cfg.train.update_every = 10;
    cfg.train.batch_size = 8;

    auto run = [&]() {
        MiniManipEnv env(cfg.env);
        DeGuVAgent agent(cfg);
        return train(env, agent, cfg);
    };
    TrainResult r1 = run();
    TrainResult r2 = run();
    REQUIRE(r1.history.size() == r2.history.size());
    REQUIRE(r1.history.size() == 6);
    for (std::size_t i = 0; i < r1.history.size(); ++i) {
        const UpdateMetrics &m1 = r1.history[i], &m2 = r2.history[i];
        CHECK(m1.env_step == m2.env_step);
        CHECK(m1.actor_loss == m2.actor_loss);
        CHECK(m1.critic_loss == m2.critic_loss);
        CHECK(m1.aux_loss == m2.aux_loss);
        CHECK(m1.entropy_coef == m2.entropy_coef);
        CHECK(m1.mean_q == m2.mean_q);
        CHECK(m1.reveal_mean == m2.reveal_mean);
    }
    CHECK(r1.cursor.episode == r2.cursor.episode);
}

TEST_CASE("interrupting and resuming continues the update schedule") {
    RunConfig cfg = small_cfg(75);
    cfg.train.total_steps = 40;
    cfg.train.warmup_steps = 30;
    cfg.train.update_every = 10;
    cfg.train.batch_size = 8;

    MiniManipEnv env(cfg.env);
    DeGuVAgent agent(cfg);
    ReplayBuffer rb(cfg.train.replay_capacity, cfg.env.frame_stack, cfg.env.resolution,
                    cfg.env.resolution);
    TrainHooks hooks;
    hooks.should_stop = [](std::int64_t t) { return t > 20; };
    TrainResult first = train(env, agent, rb, cfg, TrainCursor{}, hooks);
    CHECK(first.interrupted);
    CHECK(first.cursor.step == 20);
    CHECK(first.history.size() == 2);

    MiniManipEnv env2(cfg.env);
    TrainResult rest = train(env2, agent, rb, cfg, first.cursor, {});
    CHECK_FALSE(rest.interrupted);
    CHECK(rest.cursor.step == 40);
    CHECK(rest.history.size() == 2);
    CHECK(rest.history.front().env_step == 30);
    CHECK(agent.update_count() == 4);
}

TEST_CASE("metrics stay finite through a short run") {
    RunConfig cfg = small_cfg(77);
    cfg.train.total_steps = 200;
    cfg.train.warmup_steps = 60;
    cfg.train.update_every = 5;
    cfg.train.batch_size = 8;
    cfg.env.horizon = 25;

    MiniManipEnv env(cfg.env);
    DeGuVAgent agent(cfg);
    TrainResult r = train(env, agent, cfg);
    REQUIRE(r.history.size() == 40);
    for (const UpdateMetrics& m : r.history) {
        CHECK(std::isfinite(m.actor_loss));
        CHECK(std::isfinite(m.critic_loss));
        CHECK(std::isfinite(m.aux_loss));
        CHECK(std::isfinite(m.entropy_coef));
        CHECK(std::isfinite(m.mean_q));
        CHECK(std::isfinite(m.mean_log_prob));
        CHECK(m.entropy_coef > 0.0f);
        CHECK(m.reveal_mean >= 0.0f);
        CHECK(m.reveal_mean <= 1.0f);
        CHECK(m.aux_ran);
    }
}
