#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "deguv/agent_nets.hpp"
#include "deguv/augment.hpp"
#include "deguv/config.hpp"
#include "deguv/env.hpp"
#include "deguv/masker.hpp"
#include "deguv/replay.hpp"

namespace deguv {

// qT k / (|q|*|k| + 1e-8), accumulated in double. The guard keeps zero
// vectors finite instead of raising.
double cosine_similarity(const float* q, const float* k, int n);

// Contrastive loss of one query against one positive and n_negs negative
// keys: -log softmax over cosine similarities scaled by 1/temperature,
// stabilized with log-sum-exp. Keys are constants; when dq is non-null the
// gradient with respect to q accumulates into it.
double infonce_loss(const float* q, const float* k_pos, const float* const* k_negs, int n_negs,
                    int n, float temperature, float* dq = nullptr);

inline double infonce_loss(const std::vector<float>& q, const std::vector<float>& k_pos,
                           const std::vector<std::vector<float>>& k_negs, float temperature,
                           std::vector<float>* dq = nullptr) {
    std::vector<const float*> ptrs;
    ptrs.reserve(k_negs.size());
    for (const auto& kn : k_negs) ptrs.push_back(kn.data());
    if (dq) dq->assign(q.size(), 0.0f);
    return infonce_loss(q.data(), k_pos.data(), ptrs.data(), int(k_negs.size()), int(q.size()),
                        temperature, dq ? dq->data() : nullptr);
}

// Soft one-step residual; done in {0,1} gates the bootstrap term.
inline float bellman_residual(float q, float reward, float done, float target_value, float gamma) {
    return reward + gamma * (1.0f - done) * target_value - q;
}

struct UpdateMetrics {
    std::int64_t update_index = 0;
    std::int64_t env_step = 0;  // filled by the training loop
    float actor_loss = 0.0f;
    float critic_loss = 0.0f;
    float aux_loss = 0.0f;
    float entropy_coef = 0.0f;
    float mean_q = 0.0f;
    float mean_log_prob = 0.0f;
    float batch_reward = 0.0f;
    float reveal_mean = 0.0f;
    float reveal_thresholded = 0.0f;
    bool aux_ran = false;
};

// One learner: depth masker + pixel encoder + squashed-Gaussian actor + twin
// critic with EMA targets and a learnable entropy coefficient. The update
// phases are public so each gradient-routing contract can be exercised in
// isolation; update_step composes them in order actor -> critic -> targets
// -> auxiliary.
class DeGuVAgent {
public:
    explicit DeGuVAgent(const RunConfig& cfg);

    // Shared per-batch state. Masks are computed once, from depth alone; the
    // augmented twin is built from the already-masked raw branch, so both
    // critic branches and the auxiliary positives see one identical mask.
    struct Prepared {
        ReplayBatch batch;
        int B = 0;
        Masker::Ctx mctx;  // raw-branch masker context (masker enabled only)
        Tensor mask;       // [B, mch, H, W]; all ones when the masker is off
        Tensor mask_next;
        Tensor masked;  // [B, 3k, H, W], values in [0,255]
        Tensor masked_next;
        Tensor masked_aug;
        AugPlan plan;
        Rng noise{0};  // per-update stream, shared by actor and target draws
        UpdateMetrics stats;
    };

    Prepared prepare(ReplayBatch batch) const;

    // mean over the batch of coef*log_pi - min-head Q at latents that are
    // deliberately not back-propagated; steps the actor and the entropy
    // coefficient, touches no other parameters. Returns the raw-half loss.
    float actor_update(Prepared& p);

    // One shared soft target from the raw next state; squared residuals on
    // the raw branch (weight alpha) and the augmented branch (weight beta);
    // a single Adam step over critic + encoder + masker.
    float critic_update(Prepared& p);

    void target_update();

    // InfoNCE step on the encoder alone: query f(masked) carries the
    // gradient, positive f(masked aug) of the same row is a constant, and
    // the negatives are target encodings of the other rows' next states.
    // ConfigError when the batch has no negatives (size < 2).
    float auxiliary_update(Prepared& p);

    // Samples a batch and runs one full update. ProtocolError when the
    // replay holds fewer than batch_size transitions.
    UpdateMetrics update_step(const ReplayBuffer& replay);

    // Mask, encode, act; no augmentation. rng == nullptr takes the mean
    // action, otherwise samples from the policy.
    std::array<float, 3> act(const Observation& obs, Rng* rng) const;

    Encoder& encoder() { return enc_; }
    Encoder& encoder_target() { return enc_tgt_; }
    Actor& actor() { return actor_; }
    TwinCritic& critic() { return critic_; }
    TwinCritic& critic_target() { return critic_tgt_; }
    Masker& masker() { return masker_; }
    const Masker& masker() const { return masker_; }
    Param& entropy_param() { return log_ent_; }
    float entropy_coef() const { return std::exp(log_ent_.value[0]); }

    Adam& actor_adam() { return actor_adam_; }
    Adam& critic_adam() { return critic_adam_; }
    Adam& aux_adam() { return aux_adam_; }
    Adam& entropy_adam() { return ent_adam_; }
    // critic + encoder + masker, the joint critic-phase param group
    const std::vector<Param*>& critic_group() const { return critic_group_; }

    const RunConfig& config() const { return cfg_; }
    const AugmentationSpec& aug_spec() const { return aug_; }
    const TextureBank& textures() const { return bank_; }

    std::int64_t update_count() const { return update_count_; }
    void set_update_count(std::int64_t n) { update_count_ = n; }

private:
    DeGuVAgent(const RunConfig& cfg, Rng init);

    RunConfig cfg_;
    AugmentationSpec aug_;  // cfg_.aug with the run-derived stream seed
    TextureBank bank_;
    Masker masker_;
    Encoder enc_, enc_tgt_;
    Actor actor_;
    TwinCritic critic_, critic_tgt_;
    Param log_ent_;
    Adam actor_adam_, critic_adam_, aux_adam_, ent_adam_;
    std::vector<Param*> critic_group_;
    std::int64_t update_count_ = 0;
};

// Position inside a run, for resuming: environment steps completed in the
// main loop and episode seeds consumed.
struct TrainCursor {
    std::int64_t step = 0;
    std::int64_t episode = 0;
};

struct TrainHooks {
    std::function<void(std::int64_t, const UpdateMetrics&)> on_update;
    // fired when a training episode finishes: (step, episode index, return, length)
    std::function<void(std::int64_t, std::int64_t, double, int)> on_episode;
    // every eval.interval steps, with the cursor for checkpointing
    std::function<void(std::int64_t, const TrainCursor&)> on_eval;
    std::function<bool(std::int64_t)> should_stop;  // polled before each step
};

struct TrainResult {
    std::vector<UpdateMetrics> history;
    TrainCursor cursor;
    std::int64_t episodes = 0;  // episodes finished in the main loop
    bool interrupted = false;
};

// Full training loop: warm-start the replay with warmup_steps random actions
// (only when starting from step 0), then alternate act / store / update,
// updating every update_every steps once a batch is available. All draws
// come from per-index streams of the run seed, so a (cursor, replay, agent)
// snapshot resumes deterministically.
TrainResult train(MiniManipEnv& env, DeGuVAgent& agent, ReplayBuffer& replay,
                  const RunConfig& cfg, TrainCursor cursor, const TrainHooks& hooks = {});

TrainResult train(MiniManipEnv& env, DeGuVAgent& agent, const RunConfig& cfg,
                  const TrainHooks& hooks = {});

}  // namespace deguv
