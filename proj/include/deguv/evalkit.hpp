#pragma once

#include <functional>
#include <string>
#include <vector>

#include "deguv/agent.hpp"
#include "deguv/env.hpp"

namespace deguv {

using Policy = std::function<std::array<float, 3>(const MiniManipEnv&, const Observation&)>;

Policy agent_policy(const DeGuVAgent& agent);  // deterministic (mean) actions
Policy oracle_policy();
Policy zero_policy();

struct EvalStats {
    double mean = 0.0;
    double stddev = 0.0;  // population, over episodes x seeds
    std::vector<double> returns;
    double reveal = 0.0;  // mean mask value per step; 1.0 without a masker
};

// Deterministic rollouts: episode e under seed s resets the environment with
// stream(s, "eval-episodes", e). When a masker is given, the mean mask value
// is tracked across every step.
EvalStats evaluate(const Policy& policy, const EnvParams& params, Mode mode, int episodes,
                   const std::vector<std::uint64_t>& seeds, const Masker* masker = nullptr);

// eval_return / train_return, clamped below at zero.
// DataError when train_return is not positive (the ratio is undefined).
double retention(double train_return, double eval_return);

struct EvalModeRow {
    Mode mode = Mode::Train;
    double mean = 0.0;
    double stddev = 0.0;
    int episodes = 0;
    int seeds = 0;
    double retention = 0.0;
    double reveal_fraction = 0.0;
};

struct EvalReport {
    std::vector<EvalModeRow> rows;
    double train_mean = 0.0;  // baseline used for the retention column
    std::int64_t step = 0;
};

// Always measures the train-mode baseline (even when not requested), then one
// row per requested mode. Uses the agent's deterministic policy.
EvalReport eval_report(const DeGuVAgent& agent, const std::vector<Mode>& modes, int episodes,
                       const std::vector<std::uint64_t>& seeds);

// CSV columns: mode,mean,std,retention,reveal_fraction
void write_report_csv(const EvalReport& report, const std::string& path);
std::string report_table(const EvalReport& report);

using AugFn = std::function<void(const float* in, float* out, int B, int C, int H, int W)>;
AugFn make_aug_fn(const AugmentationSpec& spec, const TextureBank& bank,
                  std::uint64_t call_index);

// Summed per-pixel population variance over the batch, for each stage of the
// augmentation pipeline, plus the relevant/distraction split of the augmented
// RGB variance. Every squared deviation is attributed to its own sample's
// label, and the total is formed as relevant + distraction, which makes the
// partition an exact identity.
struct VarianceDiagnostic {
    double raw_rgb = 0.0;
    double aug_rgb = 0.0;  // == relevant + distraction by construction
    double depth = 0.0;
    double aug_depth = 0.0;  // augmentation never touches depth
    double masked_aug_rgb = 0.0;
    double relevant = 0.0;
    double distraction = 0.0;
    bool partition_exact = false;
    bool depth_invariant = false;
};

// raw_rgb: [B, 3k, H, W] in [0,255]; mask: [B, 1 or k, H, W];
// depth: [B, k, H, W]; labels: B*H*W bytes, nonzero = task-relevant pixel.
VarianceDiagnostic variance_diagnostic(const Tensor& raw_rgb, const AugFn& aug,
                                       const Tensor& mask, const Tensor& depth,
                                       const std::vector<std::uint8_t>& labels);

void write_variance_csv(const VarianceDiagnostic& d, const std::string& path);

struct GalleryEntry {
    std::string path;
    Mode mode = Mode::Train;
    double reveal = 0.0;
};

// Side-by-side panels (raw RGB | depth | mask | masked RGB) for n_samples
// deterministic states per mode, written as PNG files plus an index listing
// each file's reveal fraction. The state for sample i is identical across
// modes, so identical depth yields identical mask panels.
std::vector<GalleryEntry> export_mask_gallery(const DeGuVAgent& agent,
                                              const std::vector<Mode>& modes, int n_samples,
                                              const std::string& output_dir);

// Mean mask value split by the ground-truth silhouette, over n_states
// deterministic train-mode states.
struct MaskSplit {
    double object_mean = 0.0;
    double background_mean = 0.0;
    std::int64_t object_px = 0;
    std::int64_t background_px = 0;
};
MaskSplit mask_relevance_split(const DeGuVAgent& agent, int n_states);

}  // namespace deguv
