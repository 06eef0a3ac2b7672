#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deguv/config.hpp"

namespace deguv {

// Base directory for new runs: the run.output_dir config key when set,
// otherwise $DEGUV_RUN_ROOT, otherwise ./runs.
std::string run_root(const RunConfig& cfg);

// Create <root>/<UTC timestamp>-<tag> (suffixed -2, -3, ... on collision).
// Run directories are append-only; an existing directory is never reused.
std::string make_run_dir(const RunConfig& cfg);

// The canonical eval seed values for a run: 1..n.
std::vector<std::uint64_t> eval_seed_values(int n);

struct CliTrain {
    std::string config_path;             // empty: built-in defaults
    std::vector<std::string> overrides;  // key=value, applied in order
    std::string seed;                    // --seed shorthand, empty when absent
    std::string run_dir;                 // exact directory; empty: timestamped
    std::string resume;                  // checkpoint to continue from
};

struct CliEval {
    std::string checkpoint;
    std::vector<std::string> overrides;
    std::vector<std::string> modes;  // empty: train easy medium hard
    int episodes = 0;                // 0: the checkpointed eval.episodes
    int seeds = 0;                   // 0: the checkpointed eval.seeds
    std::string out;                 // report CSV; empty: next to the checkpoint
};

struct CliAnalyze {
    std::string checkpoint;
    std::string kind;  // masks | variance
    int samples = 6;   // gallery states per mode / variance batch = 256 fixed
    std::string out;   // output directory; empty: next to the checkpoint
};

// Exit codes: 0 success, 2 invalid config or unreadable input, 3 checkpoint
// incompatible with the configured environment, 130 interrupted (a resumable
// checkpoint and replay snapshot are left in the run directory).
int cmd_train(const CliTrain& args);
int cmd_eval(const CliEval& args);
int cmd_analyze(const CliAnalyze& args);

}  // namespace deguv
