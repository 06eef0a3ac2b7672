#include "deguv/runner.hpp"

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>

#include "deguv/agent.hpp"
#include "deguv/checkpoint.hpp"
#include "deguv/evalkit.hpp"
#include "deguv/metrics.hpp"

namespace deguv {
namespace {

namespace fs = std::filesystem;

volatile std::sig_atomic_t g_stop = 0;
void handle_stop(int) { g_stop = 1; }

std::string utc_now(const char* fmt) {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[64];
    std::strftime(buf, sizeof buf, fmt, &tm);
    return buf;
}

std::string hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void apply_cli_config(RunConfig& cfg, const std::string& seed,
                      const std::vector<std::string>& overrides) {
    if (!seed.empty()) cfg.set_override("train.seed", seed);
    for (const std::string& ov : overrides) {
        std::size_t eq = ov.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("override must be key=value: '" + ov + "'");
        cfg.set_override(ov.substr(0, eq), ov.substr(eq + 1));
    }
    cfg.validate();
}

void write_run_info(const std::string& dir, const RunConfig& cfg,
                    const std::string& resumed_from) {
    std::ofstream f(fs::path(dir) / "run.info", std::ios::binary);
    if (!f) throw IoError("cannot write run.info in " + dir);
    f << "created = " << utc_now("%Y-%m-%dT%H:%M:%SZ") << "\n";
    f << "tag = " << cfg.tag << "\n";
    f << "seed = " << cfg.train.seed << "\n";
    f << "config_hash = " << hex64(cfg.compat_hash()) << "\n";
    std::string tags;
    for (const std::string& t : cfg.ablation_tags()) {
        if (!tags.empty()) tags += ' ';
        tags += t;
    }
    f << "tags = " << tags << "\n";
    if (!resumed_from.empty()) f << "resumed_from = " << resumed_from << "\n";
    f.flush();
    if (!f) throw IoError("run.info write failed in " + dir);
}

std::vector<Mode> parse_modes(const std::vector<std::string>& names) {
    if (names.empty()) return {kAllModes.begin(), kAllModes.end()};
    std::vector<Mode> m;
    m.reserve(names.size());
    for (const std::string& s : names) m.push_back(mode_from_string(s));
    return m;
}

template <typename Fn>
int guarded(Fn&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const ProtocolError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

}  // namespace

std::string run_root(const RunConfig& cfg) {
    if (!cfg.output_dir.empty()) return cfg.output_dir;
    if (const char* env = std::getenv("DEGUV_RUN_ROOT"); env && *env) return env;
    return "runs";
}

std::string make_run_dir(const RunConfig& cfg) {
    fs::path root(run_root(cfg));
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw IoError("cannot create run root: " + root.string());
    const std::string stamp = utc_now("%Y%m%d-%H%M%S");
    const std::string tag = cfg.tag.empty() ? "run" : cfg.tag;
    for (int i = 1; i < 10000; ++i) {
        std::string name = stamp + "-" + tag + (i == 1 ? "" : "-" + std::to_string(i));
        std::error_code ec2;
        fs::path dir = root / name;
        if (fs::create_directory(dir, ec2) && !ec2) return dir.string();
    }
    throw IoError("cannot create a fresh run directory under " + root.string());
}

std::vector<std::uint64_t> eval_seed_values(int n) {
    if (n < 1) throw ConfigError("eval needs at least one seed");
    std::vector<std::uint64_t> v;
    v.reserve(std::size_t(n));
    for (int i = 1; i <= n; ++i) v.push_back(std::uint64_t(i));
    return v;
}

int cmd_train(const CliTrain& args) {
    return guarded([&]() -> int {
        RunConfig cfg;
        std::unique_ptr<Checkpoint> rck;
        if (!args.resume.empty()) {
            rck = std::make_unique<Checkpoint>(Checkpoint::load(args.resume));
            cfg = RunConfig::parse(rck->get_text("config"));
        } else if (!args.config_path.empty()) {
            cfg = RunConfig::load(args.config_path);
        }
        apply_cli_config(cfg, args.seed, args.overrides);
        if (rck && cfg.compat_hash() != rck->config_hash) {
            std::fprintf(stderr,
                         "error: checkpoint %s was written for a different environment "
                         "(hash %s, configured %s)\n",
                         args.resume.c_str(), hex64(rck->config_hash).c_str(),
                         hex64(cfg.compat_hash()).c_str());
            return 3;
        }

        std::string run_dir;
        if (args.run_dir.empty()) {
            run_dir = make_run_dir(cfg);
        } else {
            fs::path p(args.run_dir);
            if (fs::exists(p)) throw ConfigError("run directory already exists: " + args.run_dir);
            std::error_code ec;
            fs::create_directories(p, ec);
            if (ec) throw IoError("cannot create run directory: " + args.run_dir);
            run_dir = p.string();
        }
        {
            std::ofstream f(fs::path(run_dir) / "config.cfg", std::ios::binary);
            if (!f) throw IoError("cannot write config.cfg in " + run_dir);
            f << cfg.canonical();
        }
        write_run_info(run_dir, cfg, args.resume);
        std::printf("run directory: %s\n", run_dir.c_str());
        std::fflush(stdout);

        DeGuVAgent agent(cfg);
        TrainCursor cursor;
        std::unique_ptr<ReplayBuffer> replay;
        if (rck) {
            restore_agent(*rck, agent);
            cursor = checkpoint_cursor(*rck);
            const std::string sidecar = args.resume + ".replay";
            if (fs::exists(sidecar)) {
                replay = load_replay_snapshot(sidecar);
            } else if (has_replay(*rck)) {
                replay = restore_replay(*rck);
            } else if (cursor.step < cfg.train.total_steps) {
                throw ConfigError("no replay snapshot next to " + args.resume + " (expected " +
                                  sidecar + "); cannot resume mid-run");
            }
            if (replay &&
                (replay->k() != cfg.env.frame_stack || replay->h() != cfg.env.resolution ||
                 replay->w() != cfg.env.resolution ||
                 replay->capacity() != cfg.train.replay_capacity))
                throw DataError("replay snapshot does not match the configured buffer shape");
        }
        if (!replay)
            replay = std::make_unique<ReplayBuffer>(cfg.train.replay_capacity,
                                                    cfg.env.frame_stack, cfg.env.resolution,
                                                    cfg.env.resolution);

        MetricsWriter metrics((fs::path(run_dir) / "metrics.csv").string(),
                              update_metric_columns());
        MetricsWriter episodes((fs::path(run_dir) / "episodes.csv").string(),
                               episode_metric_columns());

        TrainHooks hooks;
        hooks.on_update = [&](std::int64_t step, const UpdateMetrics& m) {
            metrics.row({double(step), double(m.update_index), double(m.actor_loss),
                         double(m.critic_loss), double(m.aux_loss), double(m.entropy_coef),
                         double(m.mean_q), double(m.mean_log_prob), double(m.batch_reward),
                         double(m.reveal_mean), double(m.reveal_thresholded),
                         m.aux_ran ? 1.0 : 0.0});
        };
        hooks.on_episode = [&](std::int64_t step, std::int64_t ep, double ret, int len) {
            episodes.row({double(step), double(ep), ret, double(len)});
        };
        hooks.on_eval = [&](std::int64_t step, const TrainCursor& cur) {
            EvalReport rep = eval_report(agent, parse_modes({}), cfg.eval.episodes,
                                         eval_seed_values(cfg.eval.seeds));
            rep.step = step;
            char name[64];
            std::snprintf(name, sizeof name, "eval-%lld.csv", static_cast<long long>(step));
            write_report_csv(rep, (fs::path(run_dir) / name).string());
            std::snprintf(name, sizeof name, "ckpt-%lld.ckpt", static_cast<long long>(step));
            make_agent_checkpoint(agent, step, cur).save((fs::path(run_dir) / name).string());
            std::printf("step %lld  train return %.3f\n", static_cast<long long>(step),
                        rep.train_mean);
            std::fflush(stdout);
        };
        hooks.should_stop = [](std::int64_t) { return g_stop != 0; };

        g_stop = 0;
        std::signal(SIGINT, handle_stop);
        std::signal(SIGTERM, handle_stop);
        MiniManipEnv env(cfg.env);
        TrainResult tr = train(env, agent, *replay, cfg, cursor, hooks);
        std::signal(SIGINT, SIG_DFL);
        std::signal(SIGTERM, SIG_DFL);

        if (tr.interrupted) {
            const std::string ck_path = (fs::path(run_dir) / "resume.ckpt").string();
            make_agent_checkpoint(agent, tr.cursor.step, tr.cursor).save(ck_path);
            save_replay_snapshot(*replay, ck_path + ".replay", cfg.compat_hash(), tr.cursor.step);
            std::printf("interrupted at step %lld; resume with --resume %s\n",
                        static_cast<long long>(tr.cursor.step), ck_path.c_str());
            return 130;
        }

        make_agent_checkpoint(agent, tr.cursor.step, tr.cursor)
            .save((fs::path(run_dir) / "final.ckpt").string());
        EvalReport rep = eval_report(agent, parse_modes({}), cfg.eval.episodes,
                                     eval_seed_values(cfg.eval.seeds));
        rep.step = tr.cursor.step;
        write_report_csv(rep, (fs::path(run_dir) / "eval-final.csv").string());
        std::printf("%s", report_table(rep).c_str());
        std::printf("finished %lld steps, %lld updates\n",
                    static_cast<long long>(tr.cursor.step),
                    static_cast<long long>(agent.update_count()));
        return 0;
    });
}

int cmd_eval(const CliEval& args) {
    return guarded([&]() -> int {
        Checkpoint ck = Checkpoint::load(args.checkpoint);
        RunConfig cfg = RunConfig::parse(ck.get_text("config"));
        apply_cli_config(cfg, "", args.overrides);
        if (cfg.compat_hash() != ck.config_hash) {
            std::fprintf(stderr,
                         "error: checkpoint %s was written for a different environment "
                         "(hash %s, configured %s)\n",
                         args.checkpoint.c_str(), hex64(ck.config_hash).c_str(),
                         hex64(cfg.compat_hash()).c_str());
            return 3;
        }
        DeGuVAgent agent(cfg);
        restore_agent(ck, agent);

        std::vector<Mode> modes = parse_modes(args.modes);
        const int episodes = args.episodes > 0 ? args.episodes : cfg.eval.episodes;
        const int nseeds = args.seeds > 0 ? args.seeds : cfg.eval.seeds;
        EvalReport rep = eval_report(agent, modes, episodes, eval_seed_values(nseeds));
        rep.step = ck.step;

        std::string out = args.out;
        if (out.empty()) {
            char name[64];
            std::snprintf(name, sizeof name, "eval-%lld.csv", static_cast<long long>(ck.step));
            out = (fs::path(args.checkpoint).parent_path() / name).string();
        }
        write_report_csv(rep, out);
        std::printf("%s", report_table(rep).c_str());
        std::printf("wrote %s\n", out.c_str());
        return 0;
    });
}

int cmd_analyze(const CliAnalyze& args) {
    return guarded([&]() -> int {
        if (args.kind != "masks" && args.kind != "variance") {
            std::fprintf(stderr, "error: unknown analysis kind '%s' (expected masks or variance)\n",
                         args.kind.c_str());
            return 2;
        }
        Checkpoint ck = Checkpoint::load(args.checkpoint);
        RunConfig cfg = RunConfig::parse(ck.get_text("config"));
        DeGuVAgent agent(cfg);
        restore_agent(ck, agent);

        fs::path out = args.out.empty()
                           ? fs::path(args.checkpoint).parent_path() / ("analysis-" + args.kind)
                           : fs::path(args.out);

        if (args.kind == "masks") {
            auto entries = export_mask_gallery(agent, parse_modes({}), args.samples, out.string());
            std::printf("wrote %zu panels to %s\n", entries.size(), out.string().c_str());
            return 0;
        }

        // variance: a fixed 256-state deterministic batch of train-mode frames
        const int B = 256;
        const EnvParams& p = cfg.env;
        const int H = p.resolution, W = p.resolution, k = p.frame_stack;
        MiniManipEnv env(p);
        Tensor rgb(std::vector<int>{B, 3 * k, H, W});
        Tensor depth(std::vector<int>{B, k, H, W});
        std::vector<std::uint8_t> labels(std::size_t(B) * H * W);
        Tensor r1, d1;
        for (int b = 0; b < B; ++b) {
            std::uint64_t es =
                Rng::stream(cfg.train.seed, "variance", std::uint64_t(b)).next_u64();
            Observation obs = env.reset(es, Mode::Train);
            const int steps = (b * 3) % std::max(1, p.horizon / 2);
            for (int s = 0; s < steps; ++s) obs = env.step(env.oracle()).obs;
            split_observation(obs, r1, d1);
            std::copy(r1.data(), r1.data() + r1.size(),
                      rgb.data() + std::size_t(b) * 3 * k * H * W);
            std::copy(d1.data(), d1.data() + d1.size(),
                      depth.data() + std::size_t(b) * k * H * W);
            std::vector<std::uint8_t> lab = relevance_from_depth(newest_depth(obs), H, W);
            std::copy(lab.begin(), lab.end(), labels.begin() + std::size_t(b) * H * W);
        }

        Tensor mask;
        if (cfg.train.masker_enabled) {
            mask = agent.masker().forward(depth);
        } else {
            mask = Tensor(std::vector<int>{B, 1, H, W});
            mask.fill(1.0f);
        }
        VarianceDiagnostic d = variance_diagnostic(
            rgb, make_aug_fn(agent.aug_spec(), agent.textures(), 0), mask, depth, labels);

        std::error_code ec;
        fs::create_directories(out, ec);
        if (ec) throw IoError("cannot create analysis directory: " + out.string());
        const std::string csv = (out / "variance.csv").string();
        write_variance_csv(d, csv);
        std::printf("partition identity %s\n", d.partition_exact ? "PASS" : "FAIL");
        std::printf("depth invariance %s\n", d.depth_invariant ? "PASS" : "FAIL");
        std::printf("raw_rgb %.6g  aug_rgb %.6g  masked_aug_rgb %.6g\n", d.raw_rgb, d.aug_rgb,
                    d.masked_aug_rgb);
        std::printf("wrote %s\n", csv.c_str());
        return d.partition_exact && d.depth_invariant ? 0 : 1;
    });
}

}  // namespace deguv
