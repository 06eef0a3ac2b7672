#include "deguv/agent.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <tuple>

namespace deguv {

double cosine_similarity(const float* q, const float* k, int n) {
    double dot = 0.0, qq = 0.0, kk = 0.0;
    for (int i = 0; i < n; ++i) {
        dot += double(q[i]) * double(k[i]);
        qq += double(q[i]) * double(q[i]);
        kk += double(k[i]) * double(k[i]);
    }
    return dot / (std::sqrt(qq) * std::sqrt(kk) + 1e-8);
}

double infonce_loss(const float* q, const float* k_pos, const float* const* k_negs, int n_negs,
                    int n, float temperature, float* dq) {
    if (!(temperature > 0.0f)) throw ConfigError("infonce temperature must be positive");
    if (n_negs < 1) throw ConfigError("infonce needs at least one negative key");
    const double tau = double(temperature);
    const int m = n_negs + 1;  // key 0 is the positive

    double qq = 0.0;
    for (int i = 0; i < n; ++i) qq += double(q[i]) * double(q[i]);
    const double qn = std::sqrt(qq);

    std::vector<const float*> keys(std::size_t(m), nullptr);
    keys[0] = k_pos;
    for (int j = 0; j < n_negs; ++j) keys[std::size_t(j + 1)] = k_negs[j];

    std::vector<double> sim(std::size_t(m), 0.0);
    std::vector<double> dot(std::size_t(m), 0.0);
    std::vector<double> kn(std::size_t(m), 0.0);
    for (int j = 0; j < m; ++j) {
        const float* kp = keys[std::size_t(j)];
        double d = 0.0, k2 = 0.0;
        for (int i = 0; i < n; ++i) {
            d += double(q[i]) * double(kp[i]);
            k2 += double(kp[i]) * double(kp[i]);
        }
        dot[std::size_t(j)] = d;
        kn[std::size_t(j)] = std::sqrt(k2);
        sim[std::size_t(j)] = d / (qn * kn[std::size_t(j)] + 1e-8);
    }

    double lmax = sim[0] / tau;
    for (int j = 1; j < m; ++j) lmax = std::max(lmax, sim[std::size_t(j)] / tau);
    std::vector<double> p(std::size_t(m), 0.0);
    double z = 0.0;
    for (int j = 0; j < m; ++j) {
        p[std::size_t(j)] = std::exp(sim[std::size_t(j)] / tau - lmax);
        z += p[std::size_t(j)];
    }
    const double loss = -(sim[0] / tau) + lmax + std::log(z);

    if (dq) {
        for (int j = 0; j < m; ++j) {
            const double gs = (p[std::size_t(j)] / z - (j == 0 ? 1.0 : 0.0)) / tau;
            if (gs == 0.0) continue;
            const double den = qn * kn[std::size_t(j)] + 1e-8;
            const double ck = gs / den;
            const double cq =
                qn > 0.0 ? gs * dot[std::size_t(j)] * kn[std::size_t(j)] / (qn * den * den) : 0.0;
            const float* kp = keys[std::size_t(j)];
            for (int i = 0; i < n; ++i)
                dq[i] += float(ck * double(kp[i]) - cq * double(q[i]));
        }
    }
    return loss;
}

namespace {

constexpr int kTextureCount = 24;

AugmentationSpec derive_aug(const RunConfig& cfg) {
    AugmentationSpec a = cfg.aug;
    if (a.seed == 0) a.seed = splitmix64(cfg.train.seed ^ fnv1a64("aug"));
    return a;
}

const RunConfig& validated(const RunConfig& cfg) {
    cfg.validate();
    if (!(cfg.train.init_entropy_coef > 0.0f))
        throw ConfigError("train.init_entropy_coef must be positive");
    return cfg;
}

}  // namespace

DeGuVAgent::DeGuVAgent(const RunConfig& cfg)
    : DeGuVAgent(validated(cfg), Rng::stream(cfg.train.seed, "init")) {}

DeGuVAgent::DeGuVAgent(const RunConfig& cfg, Rng init)
    : cfg_(cfg),
      aug_(derive_aug(cfg)),
      bank_(splitmix64(cfg.train.seed ^ fnv1a64("textures")), kTextureCount, cfg.env.resolution,
            cfg.env.resolution),
      masker_(cfg.env.frame_stack, cfg.masker.per_frame, init),
      enc_(cfg.env.frame_stack, init),
      enc_tgt_(cfg.env.frame_stack, init),
      actor_(init),
      critic_(init),
      critic_tgt_(init),
      log_ent_("ent.log_coef", {1}),
      actor_adam_(cfg.train.actor_lr),
      critic_adam_(cfg.train.critic_lr),
      aux_adam_(cfg.train.aux_lr),
      ent_adam_(cfg.train.entropy_lr) {
    log_ent_.value[0] = std::log(cfg.train.init_entropy_coef);
    hard_copy(enc_tgt_.params(), enc_.params());
    hard_copy(critic_tgt_.params(), critic_.params());
    critic_group_ = critic_.params();
    for (Param* p : enc_.params()) critic_group_.push_back(p);
    for (Param* p : masker_.params()) critic_group_.push_back(p);
}

DeGuVAgent::Prepared DeGuVAgent::prepare(ReplayBatch batch) const {
    const auto& sh = batch.rgb.shape();
    if (sh.size() != 4) throw DataError("prepare expects a [B, 3k, H, W] rgb batch");
    Prepared p;
    p.B = sh[0];
    const int C = sh[1], H = sh[2], W = sh[3];
    if (cfg_.train.masker_enabled) {
        p.mask = masker_.forward(batch.depth, &p.mctx);
        p.mask_next = masker_.forward(batch.next_depth);
        p.masked = apply_mask(batch.rgb, p.mask);
        p.masked_next = apply_mask(batch.next_rgb, p.mask_next);
    } else {
        p.mask = Tensor({p.B, 1, H, W});
        p.mask.fill(1.0f);
        p.mask_next = p.mask;
        p.masked = batch.rgb;
        p.masked_next = batch.next_rgb;
    }
    p.masked_aug = Tensor({p.B, C, H, W});
    p.plan = apply_aug(p.masked.data(), p.masked_aug.data(), p.B, C, H, W, aug_, bank_,
                       std::uint64_t(update_count_));
    p.noise = Rng::stream(cfg_.train.seed, "update-noise", std::uint64_t(update_count_));
    p.stats.reveal_mean = float(reveal_fraction(p.mask));
    p.stats.reveal_thresholded = float(reveal_fraction_thresholded(p.mask));
    double r = 0.0;
    for (int b = 0; b < p.B; ++b) r += double(batch.reward[b]);
    p.stats.batch_reward = float(r / p.B);
    p.batch = std::move(batch);
    return p;
}

float DeGuVAgent::actor_update(Prepared& p) {
    const TrainingConfig& tc = cfg_.train;
    const int B = p.B;
    Tensor z = enc_.forward(p.masked);  // no context: latents stay detached
    if (tc.actor_on_aug) {
        Tensor z_aug = enc_.forward(p.masked_aug);
        Tensor both({2 * B, kLatentDim});
        std::memcpy(both.data(), z.data(), sizeof(float) * std::size_t(z.size()));
        std::memcpy(both.data() + z.size(), z_aug.data(),
                    sizeof(float) * std::size_t(z_aug.size()));
        z = std::move(both);
    }
    const int N = z.shape()[0];

    Actor::Ctx actx;
    Tensor logp;
    Tensor a = actor_.sample(z, &p.noise, &logp, &actx);
    TwinCritic::Ctx cctx;
    auto [q1, q2] = critic_.forward(z, a, &cctx);

    const float coef = entropy_coef();
    Tensor dq1({N, 1}), dq2({N, 1});
    double loss_raw = 0.0, logp_sum = 0.0, logp_raw = 0.0;
    for (int b = 0; b < N; ++b) {
        const float qmin = std::min(q1[b], q2[b]);
        if (q1[b] <= q2[b])
            dq1[b] = -1.0f / float(N);
        else
            dq2[b] = -1.0f / float(N);
        logp_sum += double(logp[b]);
        if (b < B) {
            loss_raw += double(coef) * double(logp[b]) - double(qmin);
            logp_raw += double(logp[b]);
        }
    }
    Tensor da({N, kActionDim});
    critic_.backward(cctx, dq1, dq2, nullptr, &da, false);
    Tensor dlogp({N});
    dlogp.fill(coef / float(N));
    actor_.backward(actx, da, dlogp, nullptr, true);
    actor_adam_.step(actor_.params());
    Adam::zero_grads(actor_.params());

    // coefficient chases the entropy target using the same sampled log-probs
    log_ent_.grad[0] += float(-(logp_sum / double(N) + double(tc.target_entropy)));
    ent_adam_.step({&log_ent_});
    log_ent_.grad.zero();

    p.stats.actor_loss = float(loss_raw / B);
    p.stats.mean_log_prob = float(logp_raw / B);
    p.stats.entropy_coef = entropy_coef();
    return p.stats.actor_loss;
}

float DeGuVAgent::critic_update(Prepared& p) {
    const TrainingConfig& tc = cfg_.train;
    const int B = p.B;
    const auto& sh = p.masked.shape();
    const int C = sh[1], H = sh[2], W = sh[3];

    // soft target from the raw next branch; everything here is a constant
    Tensor z_next = enc_tgt_.forward(p.masked_next);
    Tensor logp_next;
    Tensor a_next = actor_.sample(z_next, &p.noise, &logp_next);
    auto [q1t, q2t] = critic_tgt_.forward(z_next, a_next);
    const float coef = entropy_coef();

    Encoder::Ctx ectx_raw;
    Tensor z_raw = enc_.forward(p.masked, &ectx_raw);
    TwinCritic::Ctx cctx_raw;
    auto [q1, q2] = critic_.forward(z_raw, p.batch.action, &cctx_raw);

    const bool aug_branch = tc.augmented_branch_enabled;
    Encoder::Ctx ectx_aug;
    TwinCritic::Ctx cctx_aug;
    Tensor z_aug, q1a, q2a;
    if (aug_branch) {
        z_aug = enc_.forward(p.masked_aug, &ectx_aug);
        std::tie(q1a, q2a) = critic_.forward(z_aug, p.batch.action, &cctx_aug);
    }

    Tensor dq1({B, 1}), dq2({B, 1}), dq1a, dq2a;
    if (aug_branch) {
        dq1a = Tensor({B, 1});
        dq2a = Tensor({B, 1});
    }
    const float inv_b = 1.0f / float(B);
    double loss = 0.0, qmin_sum = 0.0;
    for (int b = 0; b < B; ++b) {
        const float tv = std::min(q1t[b], q2t[b]) - coef * logp_next[b];
        const float r = p.batch.reward[b], d = p.batch.done[b];
        const float r1 = bellman_residual(q1[b], r, d, tv, tc.gamma);
        const float r2 = bellman_residual(q2[b], r, d, tv, tc.gamma);
        loss += double(tc.alpha) * (double(r1) * r1 + double(r2) * r2);
        dq1[b] = -2.0f * tc.alpha * r1 * inv_b;
        dq2[b] = -2.0f * tc.alpha * r2 * inv_b;
        if (aug_branch) {
            const float r1a = bellman_residual(q1a[b], r, d, tv, tc.gamma);
            const float r2a = bellman_residual(q2a[b], r, d, tv, tc.gamma);
            loss += double(tc.beta) * (double(r1a) * r1a + double(r2a) * r2a);
            dq1a[b] = -2.0f * tc.beta * r1a * inv_b;
            dq2a[b] = -2.0f * tc.beta * r2a * inv_b;
        }
        qmin_sum += double(std::min(q1[b], q2[b]));
    }
    loss /= B;

    const bool mask_grads = tc.masker_enabled;
    Tensor dmasked;
    if (mask_grads) dmasked = Tensor({B, C, H, W});
    Tensor dz_raw({B, kLatentDim});
    critic_.backward(cctx_raw, dq1, dq2, &dz_raw, nullptr, true);
    enc_.backward(ectx_raw, dz_raw, mask_grads ? &dmasked : nullptr, true);
    if (aug_branch) {
        Tensor dz_aug({B, kLatentDim});
        critic_.backward(cctx_aug, dq1a, dq2a, &dz_aug, nullptr, true);
        if (mask_grads) {
            Tensor dmasked_aug({B, C, H, W});
            enc_.backward(ectx_aug, dz_aug, &dmasked_aug, true);
            apply_aug_backward(p.plan, dmasked_aug.data(), dmasked.data());
        } else {
            enc_.backward(ectx_aug, dz_aug, nullptr, true);
        }
    }
    if (mask_grads) {
        Tensor dmask(p.mask.shape());
        apply_mask_backward(p.batch.rgb, p.mask, dmasked, nullptr, &dmask);
        masker_.backward(p.mctx, dmask, true);
    }
    critic_adam_.step(critic_group_);
    Adam::zero_grads(critic_group_);

    p.stats.critic_loss = float(loss);
    p.stats.mean_q = float(qmin_sum / B);
    return p.stats.critic_loss;
}

void DeGuVAgent::target_update() {
    ema_update(critic_tgt_.params(), critic_.params(), cfg_.train.ema_rate);
    if (cfg_.train.encoder_target_ema)
        ema_update(enc_tgt_.params(), enc_.params(), cfg_.train.ema_rate);
}

float DeGuVAgent::auxiliary_update(Prepared& p) {
    const int B = p.B;
    if (B < 2) throw ConfigError("auxiliary update needs batch size >= 2 for negatives");
    Encoder::Ctx qctx;
    Tensor q = enc_.forward(p.masked, &qctx);
    Tensor kpos = enc_.forward(p.masked_aug);       // constant positive keys
    Tensor kneg = enc_tgt_.forward(p.masked_next);  // constant negative keys

    Tensor dq({B, kLatentDim});
    std::vector<const float*> negs(std::size_t(B - 1), nullptr);
    double loss = 0.0;
    for (int b = 0; b < B; ++b) {
        int w = 0;
        for (int j = 0; j < B; ++j)
            if (j != b) negs[std::size_t(w++)] = kneg.data() + std::int64_t(j) * kLatentDim;
        loss += infonce_loss(q.data() + std::int64_t(b) * kLatentDim,
                             kpos.data() + std::int64_t(b) * kLatentDim, negs.data(), B - 1,
                             kLatentDim, cfg_.train.nce_temperature,
                             dq.data() + std::int64_t(b) * kLatentDim);
    }
    loss /= B;
    const float inv_b = 1.0f / float(B);
    for (std::int64_t i = 0; i < dq.size(); ++i) dq[i] *= inv_b;
    enc_.backward(qctx, dq, nullptr, true);
    aux_adam_.step(enc_.params());
    Adam::zero_grads(enc_.params());

    p.stats.aux_loss = float(loss);
    p.stats.aux_ran = true;
    return p.stats.aux_loss;
}

UpdateMetrics DeGuVAgent::update_step(const ReplayBuffer& replay) {
    const TrainingConfig& tc = cfg_.train;
    if (replay.transitions() < tc.batch_size)
        throw ProtocolError("replay holds fewer transitions than one batch");
    Rng srng = Rng::stream(tc.seed, "update-sample", std::uint64_t(update_count_));
    Prepared p = prepare(replay.sample(tc.batch_size, srng));
    actor_update(p);
    critic_update(p);
    target_update();
    if (tc.auxiliary_enabled && update_count_ % std::int64_t(tc.aux_every) == 0)
        auxiliary_update(p);
    p.stats.update_index = update_count_;
    ++update_count_;
    return p.stats;
}

std::array<float, 3> DeGuVAgent::act(const Observation& obs, Rng* rng) const {
    Tensor rgb, depth;
    split_observation(obs, rgb, depth);
    Tensor masked = cfg_.train.masker_enabled ? apply_mask(rgb, masker_.forward(depth)) : rgb;
    Tensor z = enc_.forward(masked);
    Tensor a = actor_.sample(z, rng);
    return {a[0], a[1], a[2]};
}

TrainResult train(MiniManipEnv& env, DeGuVAgent& agent, ReplayBuffer& replay,
                  const RunConfig& cfg, TrainCursor cursor, const TrainHooks& hooks) {
    const TrainingConfig& tc = cfg.train;
    TrainResult res;
    // a resumed run starts a fresh episode; never splice it onto the tail of
    // the interrupted one
    if (cursor.step > 0) replay.abandon_episode();

    auto episode_seed = [&](std::int64_t e) {
        return Rng::stream(tc.seed, "episodes", std::uint64_t(e)).next_u64();
    };
    std::int64_t ep_index = cursor.episode;
    double ep_return = 0.0;
    int ep_len = 0;
    Observation obs = env.reset(episode_seed(ep_index), Mode::Train);
    cursor.episode = ep_index + 1;

    auto advance = [&](const std::array<float, 3>& a, std::int64_t at_step) {
        StepResult sr = env.step(a);
        replay.add(newest_rgb(obs), newest_depth(obs), a, sr.reward, sr.done);
        ep_return += sr.reward;
        ++ep_len;
        if (sr.done) {
            replay.end_episode(newest_rgb(sr.obs), newest_depth(sr.obs));
            if (hooks.on_episode) hooks.on_episode(at_step, ep_index, ep_return, ep_len);
            ep_index = cursor.episode;
            ep_return = 0.0;
            ep_len = 0;
            obs = env.reset(episode_seed(ep_index), Mode::Train);
            cursor.episode = ep_index + 1;
            return true;
        }
        obs = std::move(sr.obs);
        return false;
    };

    if (cursor.step == 0) {
        for (int t = 0; t < tc.warmup_steps; ++t) {
            Rng wrng = Rng::stream(tc.seed, "warmup", std::uint64_t(t));
            std::array<float, 3> a = {float(wrng.uniform(-1.0, 1.0)),
                                      float(wrng.uniform(-1.0, 1.0)),
                                      float(wrng.uniform(-1.0, 1.0))};
            advance(a, 0);
        }
    }

    for (std::int64_t t = cursor.step + 1; t <= tc.total_steps; ++t) {
        if (hooks.should_stop && hooks.should_stop(t)) {
            res.interrupted = true;
            break;
        }
        Rng erng = Rng::stream(tc.seed, "explore", std::uint64_t(t));
        if (advance(agent.act(obs, &erng), t)) ++res.episodes;
        if (t % tc.update_every == 0 && replay.transitions() >= tc.batch_size) {
            UpdateMetrics m = agent.update_step(replay);
            m.env_step = t;
            res.history.push_back(m);
            if (hooks.on_update) hooks.on_update(t, m);
        }
        cursor.step = t;
        if (hooks.on_eval && t % cfg.eval.interval == 0) hooks.on_eval(t, cursor);
    }
    res.cursor = cursor;
    return res;
}

TrainResult train(MiniManipEnv& env, DeGuVAgent& agent, const RunConfig& cfg,
                  const TrainHooks& hooks) {
    ReplayBuffer replay(cfg.train.replay_capacity, cfg.env.frame_stack, cfg.env.resolution,
                        cfg.env.resolution);
    return train(env, agent, replay, cfg, TrainCursor{}, hooks);
}

}  // namespace deguv
