#include "CLI11.hpp"

#include "deguv/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"deguv: depth-guided masking agent lab"};
    app.require_subcommand(1);

    deguv::CliTrain train_args;
    CLI::App* train = app.add_subcommand("train", "Train an agent into a fresh run directory");
    train->add_option("--config", train_args.config_path, "config file (key = value lines)");
    train->add_option("--set", train_args.overrides,
                      "config override, key=value (repeatable; bare keys allowed)");
    train->add_option("--seed", train_args.seed, "shorthand for --set train.seed=N");
    train->add_option("--run-dir", train_args.run_dir,
                      "exact run directory (default: timestamped under the run root)");
    train->add_option("--resume", train_args.resume, "checkpoint to continue from");

    deguv::CliEval eval_args;
    CLI::App* ev = app.add_subcommand("eval", "Evaluate a checkpoint across perturbation modes");
    ev->add_option("--checkpoint", eval_args.checkpoint, "agent checkpoint")->required();
    ev->add_option("--set", eval_args.overrides, "config override, key=value");
    ev->add_option("--modes", eval_args.modes, "modes to report (default: all four)")
        ->delimiter(',');
    ev->add_option("--episodes", eval_args.episodes, "episodes per mode and seed");
    ev->add_option("--seeds", eval_args.seeds, "number of eval seeds");
    ev->add_option("--out", eval_args.out, "report CSV path");

    deguv::CliAnalyze an_args;
    CLI::App* an = app.add_subcommand("analyze", "Export mask galleries or the variance record");
    an->add_option("--checkpoint", an_args.checkpoint, "agent checkpoint")->required();
    an->add_option("--kind", an_args.kind, "masks | variance")->required();
    an->add_option("--samples", an_args.samples, "gallery states per mode");
    an->add_option("--out", an_args.out, "output directory");

    CLI11_PARSE(app, argc, argv);

    if (train->parsed()) return deguv::cmd_train(train_args);
    if (ev->parsed()) return deguv::cmd_eval(eval_args);
    return deguv::cmd_analyze(an_args);
}
