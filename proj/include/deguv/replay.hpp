#pragma once

#include <array>
#include <memory>

#include "deguv/tensor.hpp"

namespace deguv {

struct ReplayBatch {
    Tensor rgb;         // [B, 3k, h, w], values 0..255
    Tensor depth;       // [B, k, h, w]
    Tensor action;      // [B, 3]
    Tensor reward;      // [B]
    Tensor next_rgb;    // [B, 3k, h, w]
    Tensor next_depth;  // [B, k, h, w]
    Tensor done;        // [B], 0 or 1
    std::vector<std::int64_t> indices;  // logical slot per row, oldest slot = 0
};

// Ring buffer of single un-augmented, un-masked RGB-D frames. Each step adds
// one frame together with the action/reward taken from it; end_episode adds
// the final frame as a sentinel slot carrying no action. Observation stacks
// are rebuilt on sampling by walking history backward, repeating the earliest
// same-episode frame when fewer than k predecessors exist. Frame pixels are
// allocated lazily in chunks, so small experiments stay small.
class ReplayBuffer {
public:
    ReplayBuffer(std::int64_t capacity, int k, int h, int w);

    // rgb: h*w*3 interleaved uint8, depth: h*w float
    void add(const std::uint8_t* rgb, const float* depth, const std::array<float, 3>& action,
             float reward, bool done);
    void end_episode(const std::uint8_t* rgb, const float* depth);
    // Close an episode whose tail is lost (interrupted run). No sentinel is
    // written, so the last stored step never becomes a sampleable transition.
    void abandon_episode();

    std::int64_t size() const { return filled_; }
    std::int64_t capacity() const { return capacity_; }
    int k() const { return k_; }
    int h() const { return h_; }
    int w() const { return w_; }

    // count of logical slots that currently start a complete transition
    std::int64_t transitions() const;

    // uniform over valid slots; ProtocolError when none exist
    ReplayBatch sample(int batch_size, Rng& rng) const;
    // deterministic variant used by tests and diagnostics
    ReplayBatch sample_at(const std::vector<std::int64_t>& logical) const;

    struct SlotView {
        const std::uint8_t* rgb;
        const float* depth;
        std::array<float, 3> action;
        float reward;
        bool done;
        bool terminal;  // sentinel slot closing an episode
        std::uint64_t episode;
        std::int64_t step;
    };
    SlotView slot(std::int64_t logical) const;  // 0 = oldest filled slot

    bool valid_index(std::int64_t logical) const;

    // Episode bookkeeping, exposed so checkpoints can capture and rebuild the
    // exact buffer state.
    std::uint64_t episode_counter() const { return episode_; }
    std::int64_t step_counter() const { return step_counter_; }
    bool episode_open() const { return episode_open_; }
    bool last_was_done() const { return last_was_done_; }

    // Restore path: append one slot verbatim (bypassing the episode state
    // machine), then reinstate the bookkeeping with restore_state.
    void restore_slot(const std::uint8_t* rgb, const float* depth,
                      const std::array<float, 3>& action, float reward, bool done, bool terminal,
                      std::uint64_t episode, std::int64_t step);
    void restore_state(std::uint64_t episode_counter, std::int64_t step_counter, bool episode_open,
                       bool last_was_done);

private:
    static constexpr std::int64_t kChunk = 4096;

    std::int64_t capacity_;
    int k_, h_, w_;
    std::int64_t frame_rgb_, frame_depth_;

    std::int64_t head_ = 0;    // physical index of the next write
    std::int64_t filled_ = 0;  // number of filled slots
    std::uint64_t episode_ = 0;
    std::int64_t step_counter_ = 0;
    bool episode_open_ = false;
    bool last_was_done_ = false;

    std::vector<std::unique_ptr<std::uint8_t[]>> rgb_chunks_;
    std::vector<std::unique_ptr<float[]>> depth_chunks_;
    std::vector<std::uint64_t> meta_episode_;
    std::vector<std::int64_t> meta_step_;
    std::vector<std::array<float, 3>> meta_action_;
    std::vector<float> meta_reward_;
    std::vector<std::uint8_t> meta_done_;
    std::vector<std::uint8_t> meta_terminal_;

    std::int64_t physical(std::int64_t logical) const;
    std::uint8_t* rgb_at(std::int64_t phys);
    const std::uint8_t* rgb_at(std::int64_t phys) const;
    float* depth_at(std::int64_t phys);
    const float* depth_at(std::int64_t phys) const;
    std::int64_t push_frame(const std::uint8_t* rgb, const float* depth);
    void write_stack(std::int64_t logical, float* rgb_dst, float* depth_dst) const;
};

}  // namespace deguv
