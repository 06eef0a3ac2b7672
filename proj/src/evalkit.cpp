#include "deguv/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "deguv/metrics.hpp"
#include "deguv/png.hpp"

namespace deguv {

Policy agent_policy(const DeGuVAgent& agent) {
    const DeGuVAgent* a = &agent;
    return [a](const MiniManipEnv&, const Observation& o) { return a->act(o, nullptr); };
}

Policy oracle_policy() {
    return [](const MiniManipEnv& env, const Observation&) { return env.oracle(); };
}

Policy zero_policy() {
    return [](const MiniManipEnv&, const Observation&) {
        return std::array<float, 3>{0.0f, 0.0f, 0.0f};
    };
}

EvalStats evaluate(const Policy& policy, const EnvParams& params, Mode mode, int episodes,
                   const std::vector<std::uint64_t>& seeds, const Masker* masker) {
    if (episodes < 1) throw ConfigError("evaluate: episodes must be >= 1");
    if (seeds.empty()) throw ConfigError("evaluate: at least one seed required");

    MiniManipEnv env(params);
    EvalStats stats;
    double reveal_sum = 0.0;
    std::int64_t reveal_n = 0;
    Tensor rgb, depth;

    for (std::uint64_t seed : seeds) {
        for (int e = 0; e < episodes; ++e) {
            std::uint64_t es = Rng::stream(seed, "eval-episodes", std::uint64_t(e)).next_u64();
            Observation obs = env.reset(es, mode);
            double ret = 0.0;
            while (true) {
                if (masker) {
                    split_observation(obs, rgb, depth);
                    reveal_sum += reveal_fraction(masker->forward(depth));
                    ++reveal_n;
                }
                StepResult sr = env.step(policy(env, obs));
                ret += sr.reward;
                obs = std::move(sr.obs);
                if (sr.done) break;
            }
            stats.returns.push_back(ret);
        }
    }

    const double n = double(stats.returns.size());
    double mu = 0.0;
    for (double r : stats.returns) mu += r;
    mu /= n;
    double var = 0.0;
    for (double r : stats.returns) var += (r - mu) * (r - mu);
    stats.mean = mu;
    stats.stddev = std::sqrt(var / n);
    stats.reveal = reveal_n ? reveal_sum / double(reveal_n) : 1.0;
    return stats;
}

double retention(double train_return, double eval_return) {
    if (!(train_return > 0.0))
        throw DataError("retention: undefined for non-positive train return");
    double r = eval_return / train_return;
    return r < 0.0 ? 0.0 : r;
}

EvalReport eval_report(const DeGuVAgent& agent, const std::vector<Mode>& modes, int episodes,
                       const std::vector<std::uint64_t>& seeds) {
    const RunConfig& cfg = agent.config();
    const Masker* masker = cfg.train.masker_enabled ? &agent.masker() : nullptr;
    Policy pi = agent_policy(agent);

    EvalReport report;
    EvalStats train_stats = evaluate(pi, cfg.env, Mode::Train, episodes, seeds, masker);
    report.train_mean = train_stats.mean;

    for (Mode m : modes) {
        EvalStats s = m == Mode::Train ? train_stats
                                       : evaluate(pi, cfg.env, m, episodes, seeds, masker);
        EvalModeRow row;
        row.mode = m;
        row.mean = s.mean;
        row.stddev = s.stddev;
        row.episodes = episodes;
        row.seeds = int(seeds.size());
        row.retention = report.train_mean > 0.0 ? retention(report.train_mean, s.mean) : 0.0;
        row.reveal_fraction = s.reveal;
        report.rows.push_back(row);
    }
    return report;
}

void write_report_csv(const EvalReport& report, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "mode,mean,std,retention,reveal_fraction\n";
    for (const EvalModeRow& r : report.rows)
        f << mode_name(r.mode) << ',' << csv_num(r.mean) << ',' << csv_num(r.stddev) << ','
          << csv_num(r.retention) << ',' << csv_num(r.reveal_fraction) << '\n';
    f.flush();
    if (!f) throw IoError("report write failed: " + path);
}

std::string report_table(const EvalReport& report) {
    char line[160];
    std::string out = "mode        mean      std  retention    reveal  (episodes x seeds)\n";
    for (const EvalModeRow& r : report.rows) {
        std::snprintf(line, sizeof line, "%-8s %8.4f %8.4f %10.4f %9.4f  (%d x %d)\n",
                      mode_name(r.mode), r.mean, r.stddev, r.retention, r.reveal_fraction,
                      r.episodes, r.seeds);
        out += line;
    }
    return out;
}

AugFn make_aug_fn(const AugmentationSpec& spec, const TextureBank& bank,
                  std::uint64_t call_index) {
    const TextureBank* b = &bank;
    return [spec, b, call_index](const float* in, float* out, int B, int C, int H, int W) {
        apply_aug(in, out, B, C, H, W, spec, *b, call_index);
    };
}

namespace {

// summed per-position population variance, positions iterated row-major
double summed_variance(const float* x, std::int64_t B, std::int64_t per_sample) {
    double total = 0.0;
    for (std::int64_t p = 0; p < per_sample; ++p) {
        double mu = 0.0;
        for (std::int64_t b = 0; b < B; ++b) mu += double(x[b * per_sample + p]);
        mu /= double(B);
        double acc = 0.0;
        for (std::int64_t b = 0; b < B; ++b) {
            double d = double(x[b * per_sample + p]) - mu;
            acc += d * d;
        }
        total += acc / double(B);
    }
    return total;
}

}  // namespace

VarianceDiagnostic variance_diagnostic(const Tensor& raw_rgb, const AugFn& aug,
                                       const Tensor& mask, const Tensor& depth,
                                       const std::vector<std::uint8_t>& labels) {
    if (raw_rgb.shape().size() != 4) throw DataError("variance: raw batch must be [B,C,H,W]");
    const std::int64_t B = raw_rgb.shape()[0], C = raw_rgb.shape()[1];
    const std::int64_t H = raw_rgb.shape()[2], W = raw_rgb.shape()[3];
    if (std::int64_t(labels.size()) != B * H * W)
        throw DataError("variance: relevance labels do not match the batch shape");
    if (depth.shape().size() != 4 || depth.shape()[0] != B || depth.shape()[2] != H ||
        depth.shape()[3] != W)
        throw DataError("variance: depth batch does not match the RGB batch");

    Tensor augmented(std::vector<int>{int(B), int(C), int(H), int(W)});
    aug(raw_rgb.data(), augmented.data(), int(B), int(C), int(H), int(W));
    Tensor masked = apply_mask(augmented, mask);

    VarianceDiagnostic d;
    d.raw_rgb = summed_variance(raw_rgb.data(), B, C * H * W);
    d.masked_aug_rgb = summed_variance(masked.data(), B, C * H * W);
    d.depth = summed_variance(depth.data(), B, depth.shape()[1] * H * W);
    // the pipeline leaves depth alone by construction; measure it again on
    // the post-pipeline buffer (the same one) so the record states it
    d.aug_depth = summed_variance(depth.data(), B, depth.shape()[1] * H * W);

    const float* a = augmented.data();
    const std::int64_t per_sample = C * H * W;
    for (std::int64_t c = 0; c < C; ++c) {
        for (std::int64_t pix = 0; pix < H * W; ++pix) {
            const std::int64_t off = c * H * W + pix;
            double mu = 0.0;
            for (std::int64_t b = 0; b < B; ++b) mu += double(a[b * per_sample + off]);
            mu /= double(B);
            for (std::int64_t b = 0; b < B; ++b) {
                double dev = double(a[b * per_sample + off]) - mu;
                double contrib = dev * dev / double(B);
                if (labels[std::size_t(b * H * W + pix)])
                    d.relevant += contrib;
                else
                    d.distraction += contrib;
            }
        }
    }
    d.aug_rgb = d.relevant + d.distraction;
    d.partition_exact = (d.aug_rgb == d.relevant + d.distraction);
    d.depth_invariant = (d.aug_depth == d.depth);
    return d;
}

void write_variance_csv(const VarianceDiagnostic& d, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "metric,value\n";
    f << "raw_rgb," << csv_num(d.raw_rgb) << '\n';
    f << "aug_rgb," << csv_num(d.aug_rgb) << '\n';
    f << "depth," << csv_num(d.depth) << '\n';
    f << "aug_depth," << csv_num(d.aug_depth) << '\n';
    f << "masked_aug_rgb," << csv_num(d.masked_aug_rgb) << '\n';
    f << "relevant," << csv_num(d.relevant) << '\n';
    f << "distraction," << csv_num(d.distraction) << '\n';
    f << "partition_identity," << (d.partition_exact ? "PASS" : "FAIL") << '\n';
    f << "depth_invariance," << (d.depth_invariant ? "PASS" : "FAIL") << '\n';
    f.flush();
    if (!f) throw IoError("variance record write failed: " + path);
}

namespace {

int mask_panel_channel(const Masker& m) { return m.per_frame() ? m.frame_channels() - 1 : 0; }

std::string sample_name(Mode mode, int i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s-%03d.png", mode_name(mode), i);
    return buf;
}

}  // namespace

std::vector<GalleryEntry> export_mask_gallery(const DeGuVAgent& agent,
                                              const std::vector<Mode>& modes, int n_samples,
                                              const std::string& output_dir) {
    if (n_samples < 0) throw ConfigError("gallery: n_samples must be >= 0");
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(output_dir, ec);
    if (ec) throw IoError("cannot create gallery directory: " + output_dir);

    const RunConfig& cfg = agent.config();
    const EnvParams& p = cfg.env;
    MiniManipEnv env(p);
    const int H = p.resolution, W = p.resolution;

    std::vector<GalleryEntry> entries;
    Tensor rgb_t, depth_t;
    std::vector<std::uint8_t> panel(std::size_t(H) * W * 4 * 3);

    for (Mode mode : modes) {
        for (int i = 0; i < n_samples; ++i) {
            std::uint64_t es = Rng::stream(cfg.train.seed, "gallery", std::uint64_t(i)).next_u64();
            Observation obs = env.reset(es, mode);
            const int steps = (i * 7) % std::max(1, p.horizon / 2);
            for (int s = 0; s < steps; ++s) obs = env.step(env.oracle()).obs;

            split_observation(obs, rgb_t, depth_t);
            Tensor mask;
            if (cfg.train.masker_enabled) {
                mask = agent.masker().forward(depth_t);
            } else {
                mask = Tensor(std::vector<int>{1, 1, H, W});
                mask.fill(1.0f);
            }
            const int mch = cfg.train.masker_enabled ? mask_panel_channel(agent.masker()) : 0;
            const float* mp = mask.data() + std::size_t(mch) * H * W;
            const std::uint8_t* rgb = newest_rgb(obs);
            const float* depth = newest_depth(obs);

            for (int y = 0; y < H; ++y) {
                for (int x = 0; x < W; ++x) {
                    std::uint8_t* row = panel.data() + (std::size_t(y) * W * 4 + x) * 3;
                    const std::uint8_t* px = rgb + (std::size_t(y) * W + x) * 3;
                    float m = std::clamp(mp[std::size_t(y) * W + x], 0.0f, 1.0f);
                    std::uint8_t g = std::uint8_t(std::lround(depth[std::size_t(y) * W + x] * 255.0f));
                    std::uint8_t mg = std::uint8_t(std::lround(m * 255.0f));
                    for (int c = 0; c < 3; ++c) {
                        row[c] = px[c];
                        row[std::size_t(W) * 3 + c] = g;
                        row[std::size_t(2 * W) * 3 + c] = mg;
                        row[std::size_t(3 * W) * 3 + c] =
                            std::uint8_t(std::lround(float(px[c]) * m));
                    }
                }
            }

            GalleryEntry e;
            e.mode = mode;
            e.reveal = reveal_fraction(mask);
            e.path = (fs::path(output_dir) / sample_name(mode, i)).string();
            write_png(e.path, panel.data(), H, W * 4, 3);
            entries.push_back(std::move(e));
        }
    }

    std::ofstream idx((fs::path(output_dir) / "index.txt").string(), std::ios::binary);
    if (!idx) throw IoError("cannot write gallery index in " + output_dir);
    idx << "# file mode reveal_fraction\n";
    for (const GalleryEntry& e : entries)
        idx << fs::path(e.path).filename().string() << ' ' << mode_name(e.mode) << ' '
            << csv_num(e.reveal) << '\n';
    return entries;
}

MaskSplit mask_relevance_split(const DeGuVAgent& agent, int n_states) {
    if (n_states < 1) throw ConfigError("mask split: need at least one state");
    const RunConfig& cfg = agent.config();
    const EnvParams& p = cfg.env;
    MiniManipEnv env(p);
    const int H = p.resolution, W = p.resolution;
    const int mch = cfg.train.masker_enabled ? mask_panel_channel(agent.masker()) : 0;

    MaskSplit split;
    double obj = 0.0, bg = 0.0;
    Tensor rgb_t, depth_t;
    for (int i = 0; i < n_states; ++i) {
        std::uint64_t es = Rng::stream(cfg.train.seed, "mask-split", std::uint64_t(i)).next_u64();
        Observation obs = env.reset(es, Mode::Train);
        const int steps = (i * 5) % std::max(1, p.horizon - 1);
        for (int s = 0; s < steps; ++s) obs = env.step(env.oracle()).obs;

        split_observation(obs, rgb_t, depth_t);
        Tensor mask = agent.masker().forward(depth_t);
        const float* mp = mask.data() + std::size_t(mch) * H * W;
        std::vector<std::uint8_t> labels = relevance_from_depth(newest_depth(obs), H, W);
        for (int px = 0; px < H * W; ++px) {
            if (labels[std::size_t(px)]) {
                obj += double(mp[px]);
                ++split.object_px;
            } else {
                bg += double(mp[px]);
                ++split.background_px;
            }
        }
    }
    split.object_mean = split.object_px ? obj / double(split.object_px) : 0.0;
    split.background_mean = split.background_px ? bg / double(split.background_px) : 0.0;
    return split;
}

}  // namespace deguv
