#include "deguv/replay.hpp"

#include <cstring>

namespace deguv {

ReplayBuffer::ReplayBuffer(std::int64_t capacity, int k, int h, int w)
    : capacity_(capacity),
      k_(k),
      h_(h),
      w_(w),
      frame_rgb_(std::int64_t(h) * w * 3),
      frame_depth_(std::int64_t(h) * w) {
    if (capacity < 2) throw ConfigError("replay capacity must be at least 2");
    if (k < 1 || h < 1 || w < 1) throw ConfigError("replay frame geometry must be positive");
    meta_episode_.assign(std::size_t(capacity), 0);
    meta_step_.assign(std::size_t(capacity), 0);
    meta_action_.assign(std::size_t(capacity), {0.0f, 0.0f, 0.0f});
    meta_reward_.assign(std::size_t(capacity), 0.0f);
    meta_done_.assign(std::size_t(capacity), 0);
    meta_terminal_.assign(std::size_t(capacity), 0);
}

std::int64_t ReplayBuffer::physical(std::int64_t logical) const {
    const std::int64_t oldest = (head_ - filled_ + capacity_) % capacity_;
    return (oldest + logical) % capacity_;
}

std::uint8_t* ReplayBuffer::rgb_at(std::int64_t phys) {
    const std::size_t chunk = std::size_t(phys / kChunk);
    while (rgb_chunks_.size() <= chunk) {
        rgb_chunks_.emplace_back(new std::uint8_t[std::size_t(kChunk) * frame_rgb_]);
        depth_chunks_.emplace_back(new float[std::size_t(kChunk) * frame_depth_]);
    }
    return rgb_chunks_[chunk].get() + std::size_t(phys % kChunk) * frame_rgb_;
}

const std::uint8_t* ReplayBuffer::rgb_at(std::int64_t phys) const {
    return rgb_chunks_[std::size_t(phys / kChunk)].get() + std::size_t(phys % kChunk) * frame_rgb_;
}

float* ReplayBuffer::depth_at(std::int64_t phys) {
    rgb_at(phys);  // ensures the chunk pair exists
    return depth_chunks_[std::size_t(phys / kChunk)].get() +
           std::size_t(phys % kChunk) * frame_depth_;
}

const float* ReplayBuffer::depth_at(std::int64_t phys) const {
    return depth_chunks_[std::size_t(phys / kChunk)].get() +
           std::size_t(phys % kChunk) * frame_depth_;
}

std::int64_t ReplayBuffer::push_frame(const std::uint8_t* rgb, const float* depth) {
    const std::int64_t phys = head_;
    std::memcpy(rgb_at(phys), rgb, std::size_t(frame_rgb_));
    std::memcpy(depth_at(phys), depth, std::size_t(frame_depth_) * sizeof(float));
    head_ = (head_ + 1) % capacity_;
    if (filled_ < capacity_) ++filled_;
    return phys;
}

void ReplayBuffer::add(const std::uint8_t* rgb, const float* depth,
                       const std::array<float, 3>& action, float reward, bool done) {
    if (last_was_done_)
        throw ProtocolError("replay: end_episode must close a finished episode before add");
    const std::int64_t phys = push_frame(rgb, depth);
    meta_episode_[std::size_t(phys)] = episode_;
    meta_step_[std::size_t(phys)] = step_counter_++;
    meta_action_[std::size_t(phys)] = action;
    meta_reward_[std::size_t(phys)] = reward;
    meta_done_[std::size_t(phys)] = done ? 1 : 0;
    meta_terminal_[std::size_t(phys)] = 0;
    episode_open_ = true;
    last_was_done_ = done;
}

void ReplayBuffer::end_episode(const std::uint8_t* rgb, const float* depth) {
    if (!episode_open_) throw ProtocolError("replay: end_episode without any added transition");
    const std::int64_t phys = push_frame(rgb, depth);
    meta_episode_[std::size_t(phys)] = episode_;
    meta_step_[std::size_t(phys)] = step_counter_;
    meta_action_[std::size_t(phys)] = {0.0f, 0.0f, 0.0f};
    meta_reward_[std::size_t(phys)] = 0.0f;
    meta_done_[std::size_t(phys)] = 0;
    meta_terminal_[std::size_t(phys)] = 1;
    ++episode_;
    step_counter_ = 0;
    episode_open_ = false;
    last_was_done_ = false;
}

void ReplayBuffer::abandon_episode() {
    if (!episode_open_) return;
    ++episode_;
    step_counter_ = 0;
    episode_open_ = false;
    last_was_done_ = false;
}

void ReplayBuffer::restore_slot(const std::uint8_t* rgb, const float* depth,
                                const std::array<float, 3>& action, float reward, bool done,
                                bool terminal, std::uint64_t episode, std::int64_t step) {
    const std::int64_t phys = push_frame(rgb, depth);
    meta_episode_[std::size_t(phys)] = episode;
    meta_step_[std::size_t(phys)] = step;
    meta_action_[std::size_t(phys)] = action;
    meta_reward_[std::size_t(phys)] = reward;
    meta_done_[std::size_t(phys)] = done ? 1 : 0;
    meta_terminal_[std::size_t(phys)] = terminal ? 1 : 0;
}

void ReplayBuffer::restore_state(std::uint64_t episode_counter, std::int64_t step_counter,
                                 bool episode_open, bool last_was_done) {
    episode_ = episode_counter;
    step_counter_ = step_counter;
    episode_open_ = episode_open;
    last_was_done_ = last_was_done;
}

bool ReplayBuffer::valid_index(std::int64_t logical) const {
    if (logical < 0 || logical + 1 >= filled_) return false;
    const std::int64_t cur = physical(logical);
    const std::int64_t nxt = physical(logical + 1);
    if (meta_terminal_[std::size_t(cur)]) return false;
    return meta_episode_[std::size_t(nxt)] == meta_episode_[std::size_t(cur)] &&
           meta_step_[std::size_t(nxt)] == meta_step_[std::size_t(cur)] + 1;
}

std::int64_t ReplayBuffer::transitions() const {
    std::int64_t n = 0;
    for (std::int64_t i = 0; i + 1 < filled_; ++i)
        if (valid_index(i)) ++n;
    return n;
}

ReplayBuffer::SlotView ReplayBuffer::slot(std::int64_t logical) const {
    if (logical < 0 || logical >= filled_) throw ProtocolError("replay slot index out of range");
    const std::int64_t phys = physical(logical);
    return {rgb_at(phys),
            depth_at(phys),
            meta_action_[std::size_t(phys)],
            meta_reward_[std::size_t(phys)],
            meta_done_[std::size_t(phys)] != 0,
            meta_terminal_[std::size_t(phys)] != 0,
            meta_episode_[std::size_t(phys)],
            meta_step_[std::size_t(phys)]};
}

void ReplayBuffer::write_stack(std::int64_t logical, float* rgb_dst, float* depth_dst) const {
    std::vector<std::int64_t> frames(std::size_t(k_), 0);
    std::int64_t cur = logical;
    frames[std::size_t(k_ - 1)] = cur;
    for (int f = k_ - 2; f >= 0; --f) {
        const std::int64_t prev = cur - 1;
        bool ok = prev >= 0;
        if (ok) {
            const std::int64_t pp = physical(prev), cp = physical(cur);
            ok = meta_episode_[std::size_t(pp)] == meta_episode_[std::size_t(cp)] &&
                 meta_step_[std::size_t(pp)] + 1 == meta_step_[std::size_t(cp)];
        }
        if (ok) cur = prev;
        frames[std::size_t(f)] = cur;
    }
    const std::int64_t fr = frame_depth_;
    for (int f = 0; f < k_; ++f) {
        const std::int64_t phys = physical(frames[std::size_t(f)]);
        const std::uint8_t* src = rgb_at(phys);
        for (int c = 0; c < 3; ++c) {
            float* dst = rgb_dst + (std::size_t(3 * f + c)) * fr;
            for (std::int64_t i = 0; i < fr; ++i) dst[i] = float(src[i * 3 + c]);
        }
        const float* dsrc = depth_at(phys);
        std::copy(dsrc, dsrc + fr, depth_dst + std::size_t(f) * fr);
    }
}

ReplayBatch ReplayBuffer::sample_at(const std::vector<std::int64_t>& logical) const {
    const int B = int(logical.size());
    ReplayBatch batch;
    batch.rgb = Tensor({B, 3 * k_, h_, w_});
    batch.depth = Tensor({B, k_, h_, w_});
    batch.next_rgb = Tensor({B, 3 * k_, h_, w_});
    batch.next_depth = Tensor({B, k_, h_, w_});
    batch.action = Tensor({B, 3});
    batch.reward = Tensor({B});
    batch.done = Tensor({B});
    batch.indices = logical;

    const std::int64_t stack_rgb = std::int64_t(3) * k_ * frame_depth_;
    const std::int64_t stack_depth = std::int64_t(k_) * frame_depth_;
    for (int b = 0; b < B; ++b) {
        const std::int64_t idx = logical[std::size_t(b)];
        if (!valid_index(idx)) throw ProtocolError("replay: index has no complete transition");
        write_stack(idx, batch.rgb.data() + b * stack_rgb, batch.depth.data() + b * stack_depth);
        write_stack(idx + 1, batch.next_rgb.data() + b * stack_rgb,
                    batch.next_depth.data() + b * stack_depth);
        const std::int64_t phys = physical(idx);
        for (int j = 0; j < 3; ++j)
            batch.action[std::int64_t(b) * 3 + j] = meta_action_[std::size_t(phys)][std::size_t(j)];
        batch.reward[b] = meta_reward_[std::size_t(phys)];
        batch.done[b] = meta_done_[std::size_t(phys)] ? 1.0f : 0.0f;
    }
    return batch;
}

ReplayBatch ReplayBuffer::sample(int batch_size, Rng& rng) const {
    if (batch_size < 1) throw ConfigError("replay batch size must be positive");
    if (filled_ < 2) throw ProtocolError("replay buffer has no complete transition");

    std::vector<std::int64_t> picks;
    picks.reserve(std::size_t(batch_size));
    std::int64_t misses = 0;
    while (std::int64_t(picks.size()) < batch_size) {
        const std::int64_t idx = rng.uniform_int(0, int(filled_ - 1));
        if (valid_index(idx)) {
            picks.push_back(idx);
            misses = 0;
            continue;
        }
        if (++misses >= 1024 && transitions() == 0)
            throw ProtocolError("replay buffer has no complete transition");
    }
    return sample_at(picks);
}

}  // namespace deguv
